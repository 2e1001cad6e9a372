//! Case description, angle conventions and deflector geometry.
//!
//! Lab frame: `+y` is up, tilt rotations happen in the x–y plane. The disk
//! tilt φ is measured from `+y` toward `+x`, so the thrust axis is
//! `(sin φ, cos φ, 0)` and the slipstream leaves along `-axis`. The deflector
//! is a circular-arc scoop swept along `z`; its exit angle θ is a rigid
//! clockwise rotation of the whole scoop about its center of curvature, which
//! turns the exit tangent from straight down toward `-x` (away from the
//! propeller).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Vec3};
use crate::solver::SolverSettings;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("domain edge {edge} m is smaller than 8 disk diameters ({min} m)")]
    DomainTooSmall { edge: f64, min: f64 },
    #[error("{what} extends outside the domain")]
    GeometryOutOfDomain { what: &'static str },
    #[error("{name} must be positive (got {value})")]
    NegativePhysicalQuantity { name: &'static str, value: f64 },
    #[error("deflector exit angle {0} deg outside [0, 60]")]
    ExitAngleOutOfRange(f64),
    #[error("angle {0} deg outside [0, 90]")]
    AngleOutOfRange(f64),
    #[error("deflector arc is degenerate: inlet and exit tangents coincide")]
    DegenerateArc,
    #[error("deflector capture area {capture} m^2 is smaller than the disk area {disk} m^2")]
    InsufficientCapture { capture: f64, disk: f64 },
    #[error("invalid setting {name}: {reason}")]
    InvalidSetting { name: &'static str, reason: String },
}

/// Plane angle stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub fn from_degrees(deg: f64) -> Self {
        Angle(deg.to_radians())
    }

    pub fn from_radians(rad: f64) -> Self {
        Angle(rad)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

impl std::ops::Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle(-self.0)
    }
}

/// Rotates `v` counter-clockwise by `angle`: `[[cos, -sin], [sin, cos]] v`.
pub fn rotate2d(angle: Angle, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.radians().sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Rotates the x–y components of `v` by `angle`, leaving `z` untouched.
pub fn rotate_tilt_plane(angle: Angle, v: Vec3) -> Vec3 {
    let [x, y] = rotate2d(angle, [v.x, v.y]);
    Vec3::new(x, y, v.z)
}

const ANGLE_SLACK_RAD: f64 = 1e-12;

/// Thrust axis for tilt angle φ: `(sin φ, cos φ, 0)`.
pub fn disk_axis(tilt: Angle) -> Result<Vec3, CaseError> {
    let r = tilt.radians();
    if !(-ANGLE_SLACK_RAD..=PI / 2.0 + ANGLE_SLACK_RAD).contains(&r) {
        return Err(CaseError::AngleOutOfRange(tilt.degrees()));
    }
    Ok(Vec3::new(r.sin(), r.cos(), 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConvention {
    /// Gravity-opposing unit vector.
    pub vertical: Vec3Ser,
}

impl Default for FrameConvention {
    fn default() -> Self {
        FrameConvention {
            vertical: Vec3::EY.into(),
        }
    }
}

/// Serializable mirror of [`Vec3`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3Ser(pub [f64; 3]);

impl From<Vec3> for Vec3Ser {
    fn from(v: Vec3) -> Self {
        Vec3Ser(v.to_array())
    }
}

impl From<Vec3Ser> for Vec3 {
    fn from(v: Vec3Ser) -> Self {
        Vec3::from(v.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorDiskSpec {
    pub diameter: f64,
    /// Axial thickness of the source zone before the one-cell floor.
    pub zone_height: f64,
    /// Disk center; `None` places it at the domain center, nudged half a
    /// disk-zone cell upward so the untilted zone holds one cell layer.
    pub center: Option<Vec3Ser>,
    pub tilt_deg: f64,
    pub thrust: f64,
}

impl ActuatorDiskSpec {
    pub fn area(&self) -> f64 {
        PI * 0.25 * self.diameter * self.diameter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectorGeometry {
    /// Span along `z`.
    pub width: f64,
    pub arc_radius: f64,
    /// Inlet tangent, degrees below horizontal, in the unrotated scoop.
    pub inlet_angle_deg: f64,
    /// Exit angle θ from straight down.
    pub exit_angle_deg: f64,
    /// Transverse bow curvature (1/m); 0 gives a singly curved scoop.
    pub cross_curvature: f64,
    /// Solid thickness; `None` means two cells of the deflector refinement level.
    pub thickness: Option<f64>,
    /// Center of curvature of the scoop cross-section relative to the disk center.
    pub mount_offset: Vec3Ser,
    pub require_full_capture: bool,
}

impl DeflectorGeometry {
    /// Default scoop for a disk of diameter `d` at exit angle `exit_deg`.
    pub fn benchtop(d: f64, exit_deg: f64) -> Self {
        DeflectorGeometry {
            width: 1.2 * d,
            arc_radius: 0.6 * d,
            inlet_angle_deg: 20.0,
            exit_angle_deg: exit_deg,
            cross_curvature: 0.0,
            thickness: None,
            mount_offset: Vec3::new(-0.25 * d, -0.75 * d, 0.0).into(),
            require_full_capture: false,
        }
    }

    /// Total turning of the arc (radians).
    pub fn turn(&self) -> f64 {
        (90.0 - self.inlet_angle_deg).to_radians()
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_radius * self.turn()
    }

    /// Scoop point at arc parameter `s` (0 = inlet lip, 1 = exit edge) and
    /// span coordinate `w` in `[-W/2, W/2]`, for a disk centered at `disk_center`.
    pub fn point(&self, disk_center: Vec3, s: f64, w: f64) -> Vec3 {
        let center = disk_center + Vec3::from(self.mount_offset);
        let beta = self.turn() * (1.0 - s);
        let rot = -Angle::from_degrees(self.exit_angle_deg);
        let radial = Vec3::new(-beta.cos(), beta.sin(), 0.0);
        let inward = -radial;
        let bow = 0.5 * self.cross_curvature * w * w;
        let local = radial * self.arc_radius + inward * bow;
        center + rotate_tilt_plane(rot, local) + Vec3::EZ * w
    }

    /// Flow direction along the arc at parameter `s` (unit, lab frame).
    pub fn tangent(&self, s: f64) -> Vec3 {
        let beta = self.turn() * (1.0 - s);
        let t = Vec3::new(-beta.sin(), -beta.cos(), 0.0);
        rotate_tilt_plane(-Angle::from_degrees(self.exit_angle_deg), t)
    }

    /// Unit normal at parameter `s` on the span center line, pointing into the jet.
    pub fn inward_normal(&self, s: f64) -> Vec3 {
        let beta = self.turn() * (1.0 - s);
        let n = Vec3::new(beta.cos(), -beta.sin(), 0.0);
        rotate_tilt_plane(-Angle::from_degrees(self.exit_angle_deg), n)
    }

    /// Area presented to a horizontal slipstream: vertical extent of the arc
    /// times the span.
    pub fn capture_area(&self, disk_center: Vec3) -> f64 {
        let n = 256;
        let (lo, hi) = (0..=n)
            .map(|i| self.point(disk_center, i as f64 / n as f64, 0.0).y)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
                (lo.min(y), hi.max(y))
            });
        (hi - lo) * self.width
    }
}

/// Triangulated deflector surface; vertex `(i, j)` sits at arc sample `i`
/// and span sample `j`.
#[derive(Debug, Clone)]
pub struct TriSurface {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub n_s: usize,
    pub n_w: usize,
}

impl TriSurface {
    pub fn vertex(&self, i: usize, j: usize) -> Vec3 {
        self.vertices[i * self.n_w + j]
    }

    /// Area vector of a triangle (normal into the jet, length = area).
    pub fn area_vector(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangles[t].map(|k| self.vertices[k as usize]);
        (b - a).cross(c - a) * 0.5
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area_vector(t).norm()).sum()
    }

    pub fn bounding_box(&self) -> Aabb {
        let mut b = Aabb::empty();
        for &v in &self.vertices {
            b.include(v);
        }
        b
    }

    /// Unsigned distance from `p` to the surface.
    pub fn distance(&self, p: Vec3) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|k| self.vertices[k as usize]);
                (closest_point_on_triangle(p, a, b, c) - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Triangulates the scoop with `n_s` arc samples and `n_w` span samples.
pub fn deflector_surface(
    geom: &DeflectorGeometry,
    disk_center: Vec3,
    n_s: usize,
    n_w: usize,
) -> Result<TriSurface, CaseError> {
    if geom.turn().abs() < 1e-12 {
        return Err(CaseError::DegenerateArc);
    }
    if n_s < 2 || n_w < 2 {
        return Err(CaseError::InvalidSetting {
            name: "surface samples",
            reason: format!("need at least 2x2, got {n_s}x{n_w}"),
        });
    }
    let mut vertices = Vec::with_capacity(n_s * n_w);
    for i in 0..n_s {
        let s = i as f64 / (n_s - 1) as f64;
        for j in 0..n_w {
            let w = -0.5 * geom.width + geom.width * (j as f64 / (n_w - 1) as f64);
            vertices.push(geom.point(disk_center, s, w));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (n_s - 1) * (n_w - 1));
    let id = |i: usize, j: usize| (i * n_w + j) as u32;
    for i in 0..n_s - 1 {
        for j in 0..n_w - 1 {
            triangles.push([id(i, j), id(i, j + 1), id(i + 1, j)]);
            triangles.push([id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)]);
        }
    }
    Ok(TriSurface {
        vertices,
        triangles,
        n_s,
        n_w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidProps {
    pub density: f64,
    pub viscosity: f64,
    /// Constant eddy viscosity (m^2/s); `None` selects `0.02 * v_disk * D`.
    pub eddy_viscosity: Option<f64>,
}

impl FluidProps {
    /// Air at 15 degC.
    pub fn air() -> Self {
        FluidProps {
            density: 1.225,
            viscosity: 1.802e-5,
            eddy_viscosity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSettings {
    /// Base cells per domain edge.
    pub base_cells: usize,
    /// Halving levels in the box around the disk zone.
    pub disk_refine_level: u8,
    /// Halving levels in the box around the deflector.
    pub deflector_refine_level: u8,
    /// Box inflation around disk and deflector, in disk diameters.
    pub refine_margin: f64,
}

impl Default for MeshSettings {
    fn default() -> Self {
        MeshSettings {
            base_cells: 48,
            disk_refine_level: 1,
            deflector_refine_level: 1,
            refine_margin: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub frame: FrameConvention,
    pub disk: ActuatorDiskSpec,
    pub deflector: Option<DeflectorGeometry>,
    pub fluid: FluidProps,
    pub domain_edge: f64,
    pub mesh: MeshSettings,
    pub solver: SolverSettings,
}

impl CaseConfig {
    /// The desk-scale propeller: 228 mm disk, 12 N, 2 m domain, air.
    pub fn benchtop(tilt_deg: f64, exit_deg: Option<f64>) -> Self {
        let d = 0.228;
        CaseConfig {
            frame: FrameConvention::default(),
            disk: ActuatorDiskSpec {
                diameter: d,
                zone_height: 0.01,
                center: None,
                tilt_deg,
                thrust: 12.0,
            },
            deflector: exit_deg.map(|t| DeflectorGeometry::benchtop(d, t)),
            fluid: FluidProps::air(),
            domain_edge: 2.0,
            mesh: MeshSettings::default(),
            solver: SolverSettings::default(),
        }
    }
}

/// Deflector with everything derived from the case resolved.
#[derive(Debug, Clone)]
pub struct PlacedDeflector {
    pub geometry: DeflectorGeometry,
    pub exit_angle: Angle,
    pub thickness: f64,
    pub surface: TriSurface,
    /// Surface bounding box inflated by half the thickness.
    pub solid_box: Aabb,
    pub inlet_lip: Vec3,
    pub exit_edge: Vec3,
    pub exit_tangent: Vec3,
}

/// Arc and span samples used for the classification surface.
pub const SURFACE_SAMPLES: (usize, usize) = (97, 25);

/// A case that passed validation, with angles in radians and derived geometry.
#[derive(Debug, Clone)]
pub struct ValidatedCase {
    pub config: CaseConfig,
    pub tilt: Angle,
    pub axis: Vec3,
    pub disk_center: Vec3,
    pub deflector: Option<PlacedDeflector>,
    /// Constant eddy viscosity actually used.
    pub eddy_viscosity: f64,
}

impl ValidatedCase {
    pub fn base_spacing(&self) -> f64 {
        self.config.domain_edge / self.config.mesh.base_cells as f64
    }

    pub fn disk_spacing(&self) -> f64 {
        self.base_spacing() / f64::from(1u32 << self.config.mesh.disk_refine_level)
    }

    /// Ideal induced velocity `sqrt(T / (2 rho A))`.
    pub fn induced_velocity(&self) -> f64 {
        ideal_induced_velocity(&self.config)
    }

    /// Axial height of the disk zone before the one-cell floor is applied.
    pub fn zone_height(&self) -> f64 {
        self.config.disk.zone_height
    }
}

pub fn ideal_induced_velocity(cfg: &CaseConfig) -> f64 {
    (cfg.disk.thrust / (2.0 * cfg.fluid.density * cfg.disk.area())).sqrt()
}

fn positive(name: &'static str, value: f64) -> Result<(), CaseError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CaseError::NegativePhysicalQuantity { name, value })
    }
}

/// Checks every invariant of `cfg` and precomputes derived geometry.
pub fn validate_case(cfg: CaseConfig) -> Result<ValidatedCase, CaseError> {
    let vertical = Vec3::from(cfg.frame.vertical);
    if (vertical.norm() - 1.0).abs() > 1e-12 {
        return Err(CaseError::InvalidSetting {
            name: "frame.vertical",
            reason: "must be a unit vector".into(),
        });
    }
    let disk = &cfg.disk;
    positive("disk_diameter", disk.diameter)?;
    positive("disk_zone_height", disk.zone_height)?;
    positive("domain_edge", cfg.domain_edge)?;
    positive("density", cfg.fluid.density)?;
    positive("viscosity", cfg.fluid.viscosity)?;
    if !(disk.thrust >= 0.0 && disk.thrust.is_finite()) {
        return Err(CaseError::NegativePhysicalQuantity {
            name: "thrust",
            value: disk.thrust,
        });
    }
    if let Some(nu_t) = cfg.fluid.eddy_viscosity {
        if !(nu_t >= 0.0 && nu_t.is_finite()) {
            return Err(CaseError::NegativePhysicalQuantity {
                name: "eddy_viscosity",
                value: nu_t,
            });
        }
    }
    if !(0.0..=90.0).contains(&disk.tilt_deg) {
        return Err(CaseError::AngleOutOfRange(disk.tilt_deg));
    }
    let min_edge = 8.0 * disk.diameter;
    if cfg.domain_edge < min_edge {
        return Err(CaseError::DomainTooSmall {
            edge: cfg.domain_edge,
            min: min_edge,
        });
    }
    if cfg.mesh.base_cells < 2 {
        return Err(CaseError::InvalidSetting {
            name: "base_cells",
            reason: "need at least 2".into(),
        });
    }
    if !(cfg.mesh.refine_margin >= 0.0) {
        return Err(CaseError::InvalidSetting {
            name: "refine_margin",
            reason: "must be non-negative".into(),
        });
    }
    cfg.solver.validate()?;

    let tilt = Angle::from_degrees(disk.tilt_deg);
    let axis = disk_axis(tilt)?;
    let half = 0.5 * cfg.domain_edge;
    let base_h = cfg.domain_edge / cfg.mesh.base_cells as f64;
    let disk_h = base_h / f64::from(1u32 << cfg.mesh.disk_refine_level);
    let disk_center = match disk.center {
        Some(c) => Vec3::from(c),
        None => Vec3::new(half, half + 0.5 * disk_h, half),
    };
    let domain = Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0) * cfg.domain_edge);
    let disk_reach = 0.5 * disk.diameter + disk.zone_height.max(disk_h);
    if !domain
        .inflated(-disk_reach)
        .contains(disk_center)
    {
        return Err(CaseError::GeometryOutOfDomain { what: "actuator disk" });
    }

    let deflector = match &cfg.deflector {
        None => None,
        Some(g) => Some(place_deflector(g, &cfg, disk_center, &domain)?),
    };

    let eddy_viscosity = cfg
        .fluid
        .eddy_viscosity
        .unwrap_or_else(|| 0.02 * ideal_induced_velocity(&cfg) * disk.diameter);

    Ok(ValidatedCase {
        tilt,
        axis,
        disk_center,
        deflector,
        eddy_viscosity,
        config: cfg,
    })
}

fn place_deflector(
    g: &DeflectorGeometry,
    cfg: &CaseConfig,
    disk_center: Vec3,
    domain: &Aabb,
) -> Result<PlacedDeflector, CaseError> {
    positive("deflector width", g.width)?;
    positive("arc_radius", g.arc_radius)?;
    if !(0.0..=60.0).contains(&g.exit_angle_deg) {
        return Err(CaseError::ExitAngleOutOfRange(g.exit_angle_deg));
    }
    if !(g.inlet_angle_deg.is_finite() && g.inlet_angle_deg < 90.0 + 1e-12) {
        return Err(CaseError::InvalidSetting {
            name: "inlet_angle_deg",
            reason: "must be below 90".into(),
        });
    }
    if !g.cross_curvature.is_finite() || g.cross_curvature < 0.0 {
        return Err(CaseError::InvalidSetting {
            name: "cross_curvature",
            reason: "must be finite and non-negative".into(),
        });
    }
    let base_h = cfg.domain_edge / cfg.mesh.base_cells as f64;
    let thickness = match g.thickness {
        Some(t) => t,
        None => 2.0 * base_h / f64::from(1u32 << cfg.mesh.deflector_refine_level),
    };
    positive("deflector thickness", thickness)?;

    let (n_s, n_w) = SURFACE_SAMPLES;
    let surface = deflector_surface(g, disk_center, n_s, n_w)?;
    let solid_box = surface.bounding_box().inflated(0.5 * thickness);
    if !domain.inflated(-1e-9 * cfg.domain_edge).contains(solid_box.lo)
        || !domain.inflated(-1e-9 * cfg.domain_edge).contains(solid_box.hi)
    {
        return Err(CaseError::GeometryOutOfDomain { what: "deflector" });
    }
    if g.require_full_capture {
        let capture = g.capture_area(disk_center);
        if capture < cfg.disk.area() {
            return Err(CaseError::InsufficientCapture {
                capture,
                disk: cfg.disk.area(),
            });
        }
    }
    Ok(PlacedDeflector {
        exit_angle: Angle::from_degrees(g.exit_angle_deg),
        thickness,
        inlet_lip: g.point(disk_center, 0.0, 0.0),
        exit_edge: g.point(disk_center, 1.0, 0.0),
        exit_tangent: g.tangent(1.0),
        surface,
        solid_box,
        geometry: g.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rotate2d_examples() {
        let v = rotate2d(Angle::from_degrees(0.0), [1.0, 0.0]);
        assert_eq!(v, [1.0, 0.0]);
        let v = rotate2d(Angle::from_degrees(90.0), [1.0, 0.0]);
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn disk_axis_examples() {
        let a = disk_axis(Angle::from_degrees(0.0)).unwrap();
        assert_eq!(a, Vec3::EY);
        let a = disk_axis(Angle::from_degrees(90.0)).unwrap();
        assert_abs_diff_eq!(a.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.y, 0.0, epsilon = 1e-15);
        let a = disk_axis(Angle::from_degrees(60.0)).unwrap();
        assert_abs_diff_eq!(a.x, 0.8660254037844386, epsilon = 1e-12);
        assert_abs_diff_eq!(a.y, 0.5, epsilon = 1e-12);
        assert!(matches!(
            disk_axis(Angle::from_degrees(91.0)),
            Err(CaseError::AngleOutOfRange(_))
        ));
    }

    #[test]
    fn validate_examples() {
        let ok = validate_case(CaseConfig::benchtop(0.0, None)).unwrap();
        assert_eq!(ok.axis, Vec3::EY);
        assert!(ok.deflector.is_none());

        let mut small = CaseConfig::benchtop(0.0, None);
        small.domain_edge = 1.0;
        assert!(matches!(
            validate_case(small),
            Err(CaseError::DomainTooSmall { .. })
        ));

        let mut neg = CaseConfig::benchtop(0.0, None);
        neg.disk.thrust = -1.0;
        assert!(matches!(
            validate_case(neg),
            Err(CaseError::NegativePhysicalQuantity { .. })
        ));

        let bad_exit = CaseConfig::benchtop(30.0, Some(75.0));
        assert!(matches!(
            validate_case(bad_exit),
            Err(CaseError::ExitAngleOutOfRange(_))
        ));

        let mut off = CaseConfig::benchtop(30.0, Some(0.0));
        off.deflector.as_mut().unwrap().mount_offset = Vec3::new(-0.95, -0.75, 0.0).into();
        assert!(matches!(
            validate_case(off),
            Err(CaseError::GeometryOutOfDomain { .. })
        ));
    }

    #[test]
    fn exit_tangent_matches_exit_angle() {
        for theta in [0.0, 10.0, 20.0, 40.0, 60.0] {
            let g = DeflectorGeometry::benchtop(0.228, theta);
            let t = g.tangent(1.0);
            let cos_t = f64::cos(f64::to_radians(theta));
            assert_abs_diff_eq!(t.dot(-Vec3::EY), cos_t, epsilon = 1e-12);
            // exit leans away from the propeller (toward -x)
            assert!(t.x <= 1e-15);
        }
    }

    #[test]
    fn degenerate_arc_rejected() {
        let mut g = DeflectorGeometry::benchtop(0.228, 0.0);
        g.inlet_angle_deg = 90.0;
        assert!(matches!(
            deflector_surface(&g, Vec3::ZERO, 4, 2),
            Err(CaseError::DegenerateArc)
        ));
    }

    #[test]
    fn normals_point_into_the_jet() {
        let g = DeflectorGeometry::benchtop(0.228, 10.0);
        let s = deflector_surface(&g, Vec3::ZERO, 12, 3).unwrap();
        let center = Vec3::from(g.mount_offset);
        for t in 0..s.triangles.len() {
            let [a, b, c] = s.triangles[t].map(|k| s.vertices[k as usize]);
            let mid = (a + b + c) / 3.0;
            assert!(s.area_vector(t).dot(center - mid) > 0.0);
        }
    }

    #[test]
    fn distance_to_flat_strip() {
        let g = DeflectorGeometry::benchtop(0.228, 0.0);
        let s = deflector_surface(&g, Vec3::ZERO, 97, 5).unwrap();
        let c = Vec3::from(g.mount_offset);
        // a point on the center of curvature is one radius away, up to chord sag
        let d = s.distance(c);
        assert!((d - g.arc_radius).abs() < 1e-4 * g.arc_radius);
    }
}
