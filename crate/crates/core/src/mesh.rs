//! Box-refined Cartesian hexahedral mesh with stair-step immersed solids.
//!
//! Cells are the leaves of a uniform base grid refined by successive
//! halving inside axis-aligned boxes, kept 2:1 balanced across faces. A
//! face between a coarse cell and a refined neighbor is split into the four
//! child faces, each owned by the refined cell.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::case::ValidatedCase;
use crate::geom::{Aabb, Vec3};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("only {cells_across:.2} cells across the disk diameter (need at least 8)")]
    ResolutionTooCoarse { cells_across: f64 },
    #[error("deflector solid overlaps the actuator-disk zone ({cells} cells)")]
    DiskIntersectsSolid { cells: usize },
    #[error("refinement level {0} exceeds the supported maximum of 6")]
    TooManyLevels(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Fluid,
    Solid,
    Disk,
}

impl CellKind {
    /// Fluid and disk cells carry flow.
    pub fn is_flow(self) -> bool {
        !matches!(self, CellKind::Solid)
    }

    pub fn code(self) -> u8 {
        match self {
            CellKind::Fluid => 0,
            CellKind::Solid => 1,
            CellKind::Disk => 2,
        }
    }
}

pub const NO_NEIGHBOR: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub owner: u32,
    /// `NO_NEIGHBOR` on the domain boundary.
    pub neighbor: u32,
    pub axis: u8,
    /// +1 or -1: the normal points along `sign * e_axis`, out of the owner.
    pub sign: f64,
    pub area: f64,
    pub center: Vec3,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor == NO_NEIGHBOR
    }

    /// Unit normal out of the owner.
    pub fn normal(&self) -> Vec3 {
        Vec3::axis(self.axis as usize) * self.sign
    }

    pub fn area_vector(&self) -> Vec3 {
        self.normal() * self.area
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineBox {
    pub region: Aabb,
    pub level: u8,
}

type Key = (u8, [u32; 3]);

#[derive(Debug, Clone)]
pub struct Mesh {
    pub edge: f64,
    pub base_cells: usize,
    pub max_level: u8,
    pub refine_boxes: Vec<RefineBox>,
    pub levels: Vec<u8>,
    /// Integer cell index within its level's grid.
    pub coords: Vec<[u32; 3]>,
    pub centers: Vec<Vec3>,
    pub spacing: Vec<f64>,
    pub volumes: Vec<f64>,
    pub kinds: Vec<CellKind>,
    pub faces: Vec<Face>,
    cell_face_offsets: Vec<u32>,
    cell_face_ids: Vec<u32>,
    lookup: HashMap<Key, u32>,
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.levels.len()
    }

    pub fn cell_faces(&self, c: usize) -> &[u32] {
        let a = self.cell_face_offsets[c] as usize;
        let b = self.cell_face_offsets[c + 1] as usize;
        &self.cell_face_ids[a..b]
    }

    /// Sign of the face normal as seen from cell `c` (+1 when outward).
    pub fn outward_sign(&self, face: &Face, c: usize) -> f64 {
        if face.owner as usize == c {
            face.sign
        } else {
            -face.sign
        }
    }

    /// Cell on the other side of `face` from `c`.
    pub fn other(&self, face: &Face, c: usize) -> Option<usize> {
        if face.is_boundary() {
            None
        } else if face.owner as usize == c {
            Some(face.neighbor as usize)
        } else {
            Some(face.owner as usize)
        }
    }

    fn level_spacing(&self, level: u8) -> f64 {
        self.edge / (self.base_cells as f64 * f64::from(1u32 << level))
    }

    /// Leaf cell containing `p` (points on shared faces resolve to the upper cell).
    pub fn locate(&self, p: Vec3) -> Option<usize> {
        if !(0..3).all(|a| p[a] >= 0.0 && p[a] <= self.edge) {
            return None;
        }
        for level in 0..=self.max_level {
            let n = (self.base_cells as u32) << level;
            let h = self.level_spacing(level);
            let idx = [0, 1, 2].map(|a| ((p[a] / h).floor() as u32).min(n - 1));
            if let Some(&c) = self.lookup.get(&(level, idx)) {
                return Some(c as usize);
            }
        }
        None
    }

    /// Mirror image of cell `c` through the mid-plane normal to `axis`.
    pub fn mirror_cell(&self, c: usize, axis: usize) -> Option<usize> {
        let level = self.levels[c];
        let n = (self.base_cells as u32) << level;
        let mut idx = self.coords[c];
        idx[axis] = n - 1 - idx[axis];
        self.lookup.get(&(level, idx)).map(|&m| m as usize)
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// Distance between the centers of the cells sharing an interior face,
    /// projected on the face normal; for boundary faces, owner center to face.
    pub fn normal_distance(&self, face: &Face) -> f64 {
        let o = self.centers[face.owner as usize];
        let a = face.axis as usize;
        if face.is_boundary() {
            (face.center[a] - o[a]).abs()
        } else {
            (self.centers[face.neighbor as usize][a] - o[a]).abs()
        }
    }

    /// Owner-side interpolation weight of an interior face.
    pub fn owner_weight(&self, face: &Face) -> f64 {
        let a = face.axis as usize;
        let dp = (face.center[a] - self.centers[face.owner as usize][a]).abs();
        let dn = (self.centers[face.neighbor as usize][a] - face.center[a]).abs();
        dn / (dp + dn)
    }

    pub fn stats(&self) -> MeshStats {
        let (min_h, max_h) = self
            .spacing
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &h| (lo.min(h), hi.max(h)));
        let patch = exposed_solid_faces(self);
        MeshStats {
            cells: self.n_cells(),
            fluid: self.count(CellKind::Fluid),
            solid: self.count(CellKind::Solid),
            disk: self.count(CellKind::Disk),
            faces: self.faces.len(),
            boundary_faces: self.faces.iter().filter(|f| f.is_boundary()).count(),
            patch_faces: patch.faces.len(),
            patch_area: patch.area(),
            disk_volume: (0..self.n_cells())
                .filter(|&c| self.kinds[c] == CellKind::Disk)
                .map(|c| self.volumes[c])
                .sum(),
            min_spacing: min_h,
            max_spacing: max_h,
            max_level: self.max_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    pub cells: usize,
    pub fluid: usize,
    pub solid: usize,
    pub disk: usize,
    pub faces: usize,
    pub boundary_faces: usize,
    pub patch_faces: usize,
    pub patch_area: f64,
    pub disk_volume: f64,
    pub min_spacing: f64,
    pub max_spacing: f64,
    pub max_level: u8,
}

impl fmt::Display for MeshStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cells          {}", self.cells)?;
        writeln!(f, "  fluid        {}", self.fluid)?;
        writeln!(f, "  solid        {}", self.solid)?;
        writeln!(f, "  disk         {}", self.disk)?;
        writeln!(f, "faces          {}", self.faces)?;
        writeln!(f, "  boundary     {}", self.boundary_faces)?;
        writeln!(f, "  solid patch  {}", self.patch_faces)?;
        writeln!(f, "patch area     {:.6} m^2", self.patch_area)?;
        writeln!(f, "disk volume    {:.6e} m^3", self.disk_volume)?;
        writeln!(f, "min spacing    {:.6} m", self.min_spacing)?;
        writeln!(f, "max spacing    {:.6} m", self.max_spacing)?;
        write!(f, "max level      {}", self.max_level)
    }
}

/// Bounding box of the tilted disk cylinder.
pub fn disk_zone_box(case: &ValidatedCase) -> Aabb {
    let r = 0.5 * case.config.disk.diameter;
    let half_h = 0.5 * case.config.disk.zone_height.max(case.disk_spacing());
    let a = case.axis;
    let ext = Vec3::new(
        r * (1.0 - a.x * a.x).max(0.0).sqrt() + half_h * a.x.abs(),
        r * (1.0 - a.y * a.y).max(0.0).sqrt() + half_h * a.y.abs(),
        r * (1.0 - a.z * a.z).max(0.0).sqrt() + half_h * a.z.abs(),
    );
    Aabb::new(case.disk_center - ext, case.disk_center + ext)
}

/// Refinement boxes placed around the disk zone and the deflector.
pub fn auto_refine_boxes(case: &ValidatedCase) -> Vec<RefineBox> {
    let cfg = &case.config;
    let margin = cfg.mesh.refine_margin * cfg.disk.diameter;
    let mut boxes = Vec::new();
    if cfg.mesh.disk_refine_level > 0 {
        boxes.push(RefineBox {
            region: disk_zone_box(case).inflated(margin),
            level: cfg.mesh.disk_refine_level,
        });
    }
    if let Some(d) = &case.deflector {
        if cfg.mesh.deflector_refine_level > 0 {
            boxes.push(RefineBox {
                region: d.solid_box.inflated(margin),
                level: cfg.mesh.deflector_refine_level,
            });
        }
    }
    boxes
}

fn cell_box(edge: f64, base: usize, key: &Key) -> Aabb {
    let h = edge / (base as f64 * f64::from(1u32 << key.0));
    let lo = Vec3::new(
        key.1[0] as f64 * h,
        key.1[1] as f64 * h,
        key.1[2] as f64 * h,
    );
    Aabb::new(lo, lo + Vec3::new(h, h, h))
}

fn children(key: &Key) -> impl Iterator<Item = Key> + '_ {
    (0..8u32).map(move |c| {
        let [i, j, k] = key.1;
        (
            key.0 + 1,
            [2 * i + (c & 1), 2 * j + ((c >> 1) & 1), 2 * k + ((c >> 2) & 1)],
        )
    })
}

fn neighbor_key(key: &Key, axis: usize, dir: i32, base: usize) -> Option<Key> {
    let n = (base as i64) << key.0;
    let mut idx = key.1;
    let v = idx[axis] as i64 + dir as i64;
    if v < 0 || v >= n {
        return None;
    }
    idx[axis] = v as u32;
    Some((key.0, idx))
}

fn parent(key: &Key) -> Option<Key> {
    if key.0 == 0 {
        None
    } else {
        Some((key.0 - 1, key.1.map(|v| v >> 1)))
    }
}

fn has_leaf_ancestor(leaves: &HashSet<Key>, key: &Key) -> bool {
    let mut k = *key;
    while let Some(p) = parent(&k) {
        if leaves.contains(&p) {
            return true;
        }
        k = p;
    }
    false
}

/// Builds the refined mesh for `case` with every cell marked fluid.
pub fn build_mesh(case: &ValidatedCase) -> Result<Mesh, MeshError> {
    let boxes = auto_refine_boxes(case);
    let mesh = build_mesh_with_boxes(case.config.domain_edge, case.config.mesh.base_cells, &boxes)?;
    if let Some(c) = mesh.locate(case.disk_center) {
        let cells_across = case.config.disk.diameter / mesh.spacing[c];
        if cells_across < 8.0 {
            return Err(MeshError::ResolutionTooCoarse { cells_across });
        }
    }
    Ok(mesh)
}

/// Builds an unclassified mesh of a cube of side `edge` with `base` cells per
/// edge, refined inside `boxes`.
pub fn build_mesh_with_boxes(
    edge: f64,
    base: usize,
    boxes: &[RefineBox],
) -> Result<Mesh, MeshError> {
    let max_level = boxes.iter().map(|b| b.level).max().unwrap_or(0);
    if max_level > 6 {
        return Err(MeshError::TooManyLevels(max_level));
    }
    let target = |key: &Key| -> u8 {
        let cb = cell_box(edge, base, key);
        boxes
            .iter()
            .filter(|b| b.region.overlaps(&cb))
            .map(|b| b.level)
            .max()
            .unwrap_or(0)
    };

    let mut leaves: HashSet<Key> = HashSet::new();
    let mut stack: Vec<Key> = Vec::new();
    let b = base as u32;
    for k in 0..b {
        for j in 0..b {
            for i in 0..b {
                stack.push((0, [i, j, k]));
            }
        }
    }
    while let Some(key) = stack.pop() {
        if key.0 < target(&key) {
            stack.extend(children(&key));
        } else {
            leaves.insert(key);
        }
    }

    // 2:1 balance across faces.
    loop {
        let mut sorted: Vec<Key> = leaves.iter().copied().collect();
        sorted.sort_unstable();
        let mut split = Vec::new();
        for key in &sorted {
            'dirs: for axis in 0..3 {
                for dir in [-1, 1] {
                    let Some(nk) = neighbor_key(key, axis, dir, base) else {
                        continue;
                    };
                    if leaves.contains(&nk) || has_leaf_ancestor(&leaves, &nk) {
                        continue;
                    }
                    // neighbor is subdivided: its children touching us must be leaves
                    let touching = children(&nk).filter(|ck| {
                        let side = if dir > 0 { 0 } else { 1 };
                        ck.1[axis] & 1 == side
                    });
                    for ck in touching {
                        if !leaves.contains(&ck) {
                            split.push(*key);
                            break 'dirs;
                        }
                    }
                }
            }
        }
        if split.is_empty() {
            break;
        }
        for key in split {
            leaves.remove(&key);
            leaves.extend(children(&key));
        }
    }

    let mut keys: Vec<Key> = leaves.into_iter().collect();
    keys.sort_unstable_by_key(|key| {
        let s = max_level - key.0;
        let f = key.1.map(|v| v << s);
        (f[2], f[1], f[0], key.0)
    });

    let n = keys.len();
    let mut lookup = HashMap::with_capacity(n);
    for (c, key) in keys.iter().enumerate() {
        lookup.insert(*key, c as u32);
    }
    let mut levels = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(n);
    let mut spacing = Vec::with_capacity(n);
    let mut volumes = Vec::with_capacity(n);
    for key in &keys {
        let h = edge / (base as f64 * f64::from(1u32 << key.0));
        levels.push(key.0);
        coords.push(key.1);
        centers.push(Vec3::new(
            (key.1[0] as f64 + 0.5) * h,
            (key.1[1] as f64 + 0.5) * h,
            (key.1[2] as f64 + 0.5) * h,
        ));
        spacing.push(h);
        volumes.push(h * h * h);
    }

    let mut faces = Vec::with_capacity(3 * n + 6 * base * base);
    for (c, key) in keys.iter().enumerate() {
        let h = spacing[c];
        for axis in 0..3 {
            for dir in [-1i32, 1] {
                let center = centers[c] + Vec3::axis(axis) * (0.5 * h * dir as f64);
                let mut face = Face {
                    owner: c as u32,
                    neighbor: NO_NEIGHBOR,
                    axis: axis as u8,
                    sign: dir as f64,
                    area: h * h,
                    center,
                };
                match neighbor_key(key, axis, dir, base) {
                    None => faces.push(face),
                    Some(nk) => {
                        if let Some(&nb) = lookup.get(&nk) {
                            if dir > 0 {
                                face.neighbor = nb;
                                faces.push(face);
                            }
                        } else if let Some(&nb) = parent(&nk).and_then(|p| lookup.get(&p)) {
                            face.neighbor = nb;
                            faces.push(face);
                        }
                    }
                }
            }
        }
    }

    let mut counts = vec![0u32; n + 1];
    for f in &faces {
        counts[f.owner as usize + 1] += 1;
        if !f.is_boundary() {
            counts[f.neighbor as usize + 1] += 1;
        }
    }
    for c in 0..n {
        counts[c + 1] += counts[c];
    }
    let offsets = counts.clone();
    let mut fill = counts;
    let mut ids = vec![0u32; offsets[n] as usize];
    for (fi, f) in faces.iter().enumerate() {
        for c in [f.owner, f.neighbor] {
            if c != NO_NEIGHBOR {
                ids[fill[c as usize] as usize] = fi as u32;
                fill[c as usize] += 1;
            }
        }
    }

    Ok(Mesh {
        edge,
        base_cells: base,
        max_level,
        refine_boxes: boxes.to_vec(),
        levels,
        coords,
        centers,
        spacing,
        volumes,
        kinds: vec![CellKind::Fluid; n],
        faces,
        cell_face_offsets: offsets,
        cell_face_ids: ids,
        lookup,
    })
}

/// True when `p` lies in the disk cylinder, using a zone height of at least
/// `local_spacing`.
pub fn in_disk_zone(case: &ValidatedCase, p: Vec3, local_spacing: f64) -> bool {
    let rel = p - case.disk_center;
    let axial = rel.dot(case.axis);
    let radial = (rel - case.axis * axial).norm();
    let h_eff = case.config.disk.zone_height.max(local_spacing);
    let slack = 1e-9;
    axial.abs() <= 0.5 * h_eff * (1.0 + slack)
        && radial <= 0.5 * case.config.disk.diameter * (1.0 + slack)
}

/// Assigns solid and disk kinds: solid within half a thickness of the
/// deflector surface, disk inside the tilted cylinder.
pub fn classify_cells(mut mesh: Mesh, case: &ValidatedCase) -> Result<Mesh, MeshError> {
    let deflector = case.deflector.as_ref();
    let centers = &mesh.centers;
    let spacing = &mesh.spacing;
    let kinds: Vec<(bool, bool)> = par::map(mesh.n_cells(), |c| {
        let p = centers[c];
        let disk = in_disk_zone(case, p, spacing[c]);
        let solid = deflector.is_some_and(|d| {
            d.solid_box.contains(p) && d.surface.distance(p) <= 0.5 * d.thickness
        });
        (disk, solid)
    });
    let overlap = kinds.iter().filter(|(d, s)| *d && *s).count();
    if overlap > 0 {
        return Err(MeshError::DiskIntersectsSolid { cells: overlap });
    }
    for (c, &(disk, solid)) in kinds.iter().enumerate() {
        mesh.kinds[c] = if solid {
            CellKind::Solid
        } else if disk {
            CellKind::Disk
        } else {
            CellKind::Fluid
        };
    }
    Ok(mesh)
}

/// Builds and classifies the mesh for `case`.
pub fn mesh_for_case(case: &ValidatedCase) -> Result<Mesh, MeshError> {
    classify_cells(build_mesh(case)?, case)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchFace {
    pub face: u32,
    /// Points from the fluid cell into the solid.
    pub area_vector: Vec3,
    pub fluid_cell: u32,
}

/// Discrete deflector surface: every flow/solid face.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FacePatch {
    pub faces: Vec<PatchFace>,
}

impl FacePatch {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.faces.iter().map(|f| f.area_vector.norm()).sum()
    }
}

pub fn exposed_solid_faces(mesh: &Mesh) -> FacePatch {
    let faces = mesh
        .faces
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.is_boundary())
        .filter_map(|(fi, f)| {
            let ko = mesh.kinds[f.owner as usize];
            let kn = mesh.kinds[f.neighbor as usize];
            match (ko.is_flow(), kn.is_flow()) {
                (true, false) => Some(PatchFace {
                    face: fi as u32,
                    area_vector: f.area_vector(),
                    fluid_cell: f.owner,
                }),
                (false, true) => Some(PatchFace {
                    face: fi as u32,
                    area_vector: -f.area_vector(),
                    fluid_cell: f.neighbor,
                }),
                _ => None,
            }
        })
        .collect();
    FacePatch { faces }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mesh(base: usize, boxes: &[RefineBox]) -> Mesh {
        build_mesh_with_boxes(1.0, base, boxes).unwrap()
    }

    #[test]
    fn uniform_grid_counts() {
        let m = unit_mesh(4, &[]);
        assert_eq!(m.n_cells(), 64);
        // 3 * 4 * 4 * 5 unique faces
        assert_eq!(m.faces.len(), 240);
        assert_eq!(m.faces.iter().filter(|f| f.is_boundary()).count(), 96);
    }

    #[test]
    fn refined_box_adds_hanging_faces() {
        let b = RefineBox {
            region: Aabb::new(Vec3::new(0.3, 0.3, 0.3), Vec3::new(0.45, 0.45, 0.45)),
            level: 1,
        };
        let m = unit_mesh(4, &[b]);
        // one base cell [0.25, 0.5]^3 split into 8
        assert_eq!(m.n_cells(), 64 - 1 + 8);
        for c in 0..m.n_cells() {
            let mut sum = Vec3::ZERO;
            for &fi in m.cell_faces(c) {
                let f = &m.faces[fi as usize];
                sum += f.area_vector() * m.outward_sign(f, c) * f.sign;
            }
            assert!(sum.max_abs() <= 1e-12 * m.spacing[c] * m.spacing[c]);
        }
    }

    #[test]
    fn two_to_one_balance() {
        let b = RefineBox {
            region: Aabb::new(Vec3::new(0.51, 0.51, 0.51), Vec3::new(0.52, 0.52, 0.52)),
            level: 3,
        };
        let m = unit_mesh(4, &[b]);
        for f in m.faces.iter().filter(|f| !f.is_boundary()) {
            let lo = m.levels[f.owner as usize];
            let ln = m.levels[f.neighbor as usize];
            assert!(lo.abs_diff(ln) <= 1);
        }
    }

    #[test]
    fn locate_and_mirror() {
        let m = unit_mesh(6, &[]);
        let c = m.locate(Vec3::new(0.1, 0.5, 0.9)).unwrap();
        assert!(m.centers[c].x < 1.0 / 6.0);
        let mc = m.mirror_cell(c, 0).unwrap();
        assert!((m.centers[mc].x - (1.0 - m.centers[c].x)).abs() < 1e-12);
        assert!(m.locate(Vec3::new(1.5, 0.0, 0.0)).is_none());
    }

    #[test]
    fn isolated_solid_cell_patch() {
        let mut m = unit_mesh(4, &[]);
        let c = m.locate(Vec3::new(0.4, 0.4, 0.6)).unwrap();
        m.kinds[c] = CellKind::Solid;
        let p = exposed_solid_faces(&m);
        assert_eq!(p.faces.len(), 6);
        let sum = p.faces.iter().fold(Vec3::ZERO, |a, f| a + f.area_vector);
        assert!(sum.max_abs() < 1e-15);
        for f in &p.faces {
            let fc = m.centers[f.fluid_cell as usize];
            assert!(f.area_vector.dot(m.centers[c] - fc) > 0.0);
        }
    }
}
