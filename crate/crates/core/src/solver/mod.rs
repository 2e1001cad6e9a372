//! Steady incompressible SIMPLE solver with an actuator-disk body force.
//!
//! Collocated finite volumes on the box-refined mesh: first-order upwind
//! convection (optional deferred-correction blend toward central), central
//! diffusion with a constant effective viscosity, Gauss pressure gradients
//! and Rhie–Chow momentum interpolation for the face fluxes. Stair-step
//! walls are no-slip; the six domain faces hold gauge pressure zero and
//! switch between outflow (zero-gradient velocity) and inflow (velocity
//! normal to the face, taken from the flux) with the local flux sign.
//!
//! Normalization: momentum residuals are `sum |b - A u| / (sum a_P * U_ref)`
//! over the unrelaxed system; continuity is `sum |div F| / Q_ref`, with
//! `U_ref` the ideal induced velocity `sqrt(T / (2 rho A))` and
//! `Q_ref = U_ref * A_disk`. Zero-thrust cases use `U_ref = 1 m/s`.

pub mod linear;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{CaseError, ValidatedCase};
use crate::geom::Vec3;
use crate::mesh::{self, CellKind, Mesh, MeshError};
use crate::par;
use linear::{AggregationAmg, CsrMatrix, LinearError, Tolerance};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("actuator-disk zone contains no cells")]
    EmptyDiskZone,
    #[error("linear solve for {system} failed: {source}")]
    LinearSolverDiverged {
        system: &'static str,
        source: LinearError,
    },
    #[error("non-finite {what} at cell {cell} after iteration {iteration}")]
    NonFiniteField {
        iteration: usize,
        what: &'static str,
        cell: usize,
        snapshot: Box<FlowField>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub relax_u: f64,
    pub relax_p: f64,
    pub max_iterations: usize,
    /// Normalized residual target for all four equations.
    pub residual_tol: f64,
    /// Per-cell net flux bound on converged fields, as a fraction of `Q_ref`.
    pub continuity_tol: f64,
    /// Residual reduction demanded of each inner linear solve.
    pub inner_reduction: f64,
    pub inner_max_iterations: usize,
    /// Deferred-correction weight of central differencing (0 = pure upwind).
    pub convection_blend: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            relax_u: 0.7,
            relax_p: 0.3,
            max_iterations: 2000,
            residual_tol: 1e-4,
            continuity_tol: 1e-6,
            inner_reduction: 1e-2,
            inner_max_iterations: 500,
            convection_blend: 0.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), CaseError> {
        let bad = |name: &'static str, reason: &str| {
            Err(CaseError::InvalidSetting {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.relax_u > 0.0 && self.relax_u <= 1.0) {
            return bad("relax_u", "must lie in (0, 1]");
        }
        if !(self.relax_p > 0.0 && self.relax_p <= 1.0) {
            return bad("relax_p", "must lie in (0, 1]");
        }
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol", "must be positive");
        }
        if !(self.continuity_tol > 0.0) {
            return bad("continuity_tol", "must be positive");
        }
        if !(self.inner_reduction > 0.0 && self.inner_reduction < 1.0) {
            return bad("inner_reduction", "must lie in (0, 1)");
        }
        if self.inner_max_iterations == 0 {
            return bad("inner_max_iterations", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.convection_blend) {
            return bad("convection_blend", "must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Cell-centered solution plus face volume fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub velocity: Vec<Vec3>,
    /// Gauge pressure (Pa).
    pub pressure: Vec<f64>,
    /// Volume flux through each face along its owner-outward normal (m^3/s).
    pub flux: Vec<f64>,
    /// Effective kinematic viscosity `mu / rho + nu_t` (m^2/s).
    pub nu_eff: Vec<f64>,
    pub density: f64,
}

impl FlowField {
    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Body acceleration per cell, nonzero only in the disk zone.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField {
    pub accel: Vec<Vec3>,
    pub zone_volume: f64,
    pub density: f64,
}

impl SourceField {
    /// Total force on the fluid, `sum rho a V`.
    pub fn total_force(&self, mesh: &Mesh) -> Vec3 {
        par::sum(mesh.n_cells(), |c| self.accel[c] * (self.density * mesh.volumes[c]))
    }
}

/// Uniform force density `T / V_zone` over the disk cells, pushing the fluid
/// along `-axis`.
pub fn momentum_source_field(mesh: &Mesh, case: &ValidatedCase) -> Result<SourceField, SolverError> {
    let zone_volume: f64 = (0..mesh.n_cells())
        .filter(|&c| mesh.kinds[c] == CellKind::Disk)
        .map(|c| mesh.volumes[c])
        .sum();
    if zone_volume <= 0.0 {
        return Err(SolverError::EmptyDiskZone);
    }
    let rho = case.config.fluid.density;
    let a = case.axis * (-case.config.disk.thrust / (zone_volume * rho));
    let accel = mesh
        .kinds
        .iter()
        .map(|&k| if k == CellKind::Disk { a } else { Vec3::ZERO })
        .collect();
    Ok(SourceField {
        accel,
        zone_volume,
        density: rho,
    })
}

/// Quiescent start.
pub fn initialize(mesh: &Mesh, case: &ValidatedCase) -> FlowField {
    let nu = case.config.fluid.viscosity / case.config.fluid.density + case.eddy_viscosity;
    FlowField {
        velocity: vec![Vec3::ZERO; mesh.n_cells()],
        pressure: vec![0.0; mesh.n_cells()],
        flux: vec![0.0; mesh.faces.len()],
        nu_eff: vec![nu; mesh.n_cells()],
        density: case.config.fluid.density,
    }
}

/// Normalized residuals of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub ux: f64,
    pub uy: f64,
    pub uz: f64,
    pub continuity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.ux.max(self.uy).max(self.uz).max(self.continuity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub history: Vec<Residuals>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
    /// Largest per-cell net face flux of the final field, relative to `Q_ref`.
    pub max_cell_imbalance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FaceRole {
    /// Both sides carry flow.
    Interior,
    /// Flow cell (owner or neighbor) against a solid cell.
    Wall,
    /// Domain boundary of a flow cell.
    Boundary,
    Inactive,
}

/// Solver state for one mesh; exclusive use during iteration.
pub struct FlowSolver<'m> {
    mesh: &'m Mesh,
    settings: SolverSettings,
    density: f64,
    roles: Vec<FaceRole>,
    /// Compact unknown index for each cell (`u32::MAX` for solids).
    unknown: Vec<u32>,
    /// Cell for each compact unknown.
    cells: Vec<u32>,
    /// Face of each off-diagonal entry of the shared matrix pattern.
    entry_face: Vec<u32>,
    mom: CsrMatrix,
    press: CsrMatrix,
    amg: AggregationAmg,
    /// `V / a_P` per unknown from the latest momentum assembly.
    d_coef: Vec<f64>,
    u_ref: f64,
    q_ref: f64,
    iteration: usize,
}

impl<'m> FlowSolver<'m> {
    pub fn new(mesh: &'m Mesh, case: &ValidatedCase) -> Self {
        let settings = case.config.solver.clone();
        let roles: Vec<FaceRole> = mesh
            .faces
            .iter()
            .map(|f| {
                let o = mesh.kinds[f.owner as usize].is_flow();
                if f.is_boundary() {
                    return if o { FaceRole::Boundary } else { FaceRole::Inactive };
                }
                let n = mesh.kinds[f.neighbor as usize].is_flow();
                match (o, n) {
                    (true, true) => FaceRole::Interior,
                    (false, false) => FaceRole::Inactive,
                    _ => FaceRole::Wall,
                }
            })
            .collect();
        let mut unknown = vec![u32::MAX; mesh.n_cells()];
        let mut cells = Vec::new();
        for c in 0..mesh.n_cells() {
            if mesh.kinds[c].is_flow() {
                unknown[c] = cells.len() as u32;
                cells.push(c as u32);
            }
        }
        let mut offsets = vec![0u32];
        let mut cols = Vec::new();
        let mut entry_face = Vec::new();
        for &c in &cells {
            let c = c as usize;
            for &fi in mesh.cell_faces(c) {
                if roles[fi as usize] == FaceRole::Interior {
                    let other = mesh.other(&mesh.faces[fi as usize], c).expect("interior face");
                    cols.push(unknown[other]);
                    entry_face.push(fi);
                }
            }
            offsets.push(cols.len() as u32);
        }
        let mom = CsrMatrix::with_pattern(offsets.clone(), cols.clone());
        let press = CsrMatrix::with_pattern(offsets, cols);
        let amg = AggregationAmg::new(&press, aggregation_levels(mesh, &cells));
        let u_ref = if case.config.disk.thrust > 0.0 {
            case.induced_velocity()
        } else {
            1.0
        };
        let q_ref = u_ref * case.config.disk.area();
        FlowSolver {
            mesh,
            density: case.config.fluid.density,
            roles,
            d_coef: vec![0.0; cells.len()],
            unknown,
            cells,
            entry_face,
            mom,
            press,
            amg,
            u_ref,
            q_ref,
            settings,
            iteration: 0,
        }
    }

    /// Reference volume flux `Q_ref` used to normalize continuity.
    pub fn reference_flux(&self) -> f64 {
        self.q_ref
    }

    fn n_unknowns(&self) -> usize {
        self.cells.len()
    }

    /// Interpolation weight of cell `c`'s side on an interior face.
    fn side_weight(&self, fi: usize, c: usize) -> f64 {
        let f = &self.mesh.faces[fi];
        let w = self.mesh.owner_weight(f);
        if f.owner as usize == c {
            w
        } else {
            1.0 - w
        }
    }

    /// Gauss gradient of a cell field; wall faces take the cell value and
    /// boundary faces `boundary_value`.
    fn gradient(&self, phi: &[f64], boundary_value: f64) -> Vec<Vec3> {
        let mesh = self.mesh;
        par::map(self.n_unknowns(), |i| {
            let c = self.cells[i] as usize;
            let mut g = Vec3::ZERO;
            for &fi in mesh.cell_faces(c) {
                let fi = fi as usize;
                let f = &mesh.faces[fi];
                let val = match self.roles[fi] {
                    FaceRole::Interior => {
                        let o = mesh.other(f, c).expect("interior");
                        let w = self.side_weight(fi, c);
                        w * phi[c] + (1.0 - w) * phi[o]
                    }
                    FaceRole::Wall => phi[c],
                    FaceRole::Boundary => boundary_value,
                    FaceRole::Inactive => continue,
                };
                g += f.normal() * (mesh.outward_sign(f, c) * f.sign * val * f.area);
            }
            g / mesh.volumes[c]
        })
    }

    /// One SIMPLE outer iteration. `tight` additionally drives every cell's
    /// net flux below half the continuity tolerance.
    pub fn step(
        &mut self,
        field: &mut FlowField,
        src: &SourceField,
        tight: bool,
    ) -> Result<Residuals, SolverError> {
        self.iteration += 1;
        let mesh = self.mesh;
        let rho = self.density;
        let nu = &field.nu_eff;
        let blend = self.settings.convection_blend;
        let alpha_u = self.settings.relax_u;
        let n = self.n_unknowns();

        // Momentum coefficients. Row entries: (diag, wall diag per component, rhs).
        let rows: Vec<(f64, Vec3, Vec3)> = {
            let vel = &field.velocity;
            let p = &field.pressure;
            let flux = &field.flux;
            par::map(n, |i| {
                let c = self.cells[i] as usize;
                let mut diag = 0.0;
                let mut wall = Vec3::ZERO;
                let mut b = src.accel[c] * (rho * mesh.volumes[c]);
                for &fi in mesh.cell_faces(c) {
                    let fi = fi as usize;
                    let f = &mesh.faces[fi];
                    let s = mesh.outward_sign(f, c);
                    let n_out = Vec3::axis(f.axis as usize) * s;
                    let out = flux_orientation(f, c);
                    let mass = rho * out * flux[fi];
                    match self.roles[fi] {
                        FaceRole::Interior => {
                            let o = mesh.other(f, c).expect("interior");
                            let mu = rho * 0.5 * (nu[c] + nu[o]);
                            let d = mesh.normal_distance(f);
                            diag += mu * f.area / d + mass.max(0.0);
                            let w = self.side_weight(fi, c);
                            if blend > 0.0 {
                                let central = vel[c] * w + vel[o] * (1.0 - w);
                                let upwind = if mass >= 0.0 { vel[c] } else { vel[o] };
                                b -= (central - upwind) * (blend * mass);
                            }
                            let pf = w * p[c] + (1.0 - w) * p[o];
                            b -= n_out * (pf * f.area);
                        }
                        FaceRole::Wall => {
                            let coef = rho * nu[c] * f.area / (0.5 * mesh.spacing[c]);
                            for comp in 0..3 {
                                if comp != f.axis as usize {
                                    wall[comp] += coef;
                                }
                            }
                            b -= n_out * (p[c] * f.area);
                        }
                        FaceRole::Boundary => {
                            if mass >= 0.0 {
                                diag += mass;
                            } else {
                                let u_in = n_out * (out * flux[fi] / f.area);
                                b -= u_in * mass;
                            }
                        }
                        FaceRole::Inactive => {}
                    }
                }
                (diag, wall, b)
            })
        };
        {
            let vel = &field.velocity;
            let flux = &field.flux;
            let cells = &self.cells;
            let entry_face = &self.entry_face;
            let offsets = &self.mom.offsets;
            let vals: Vec<f64> = par::map(self.entry_face.len(), |k| {
                let fi = entry_face[k] as usize;
                let f = &mesh.faces[fi];
                // row of entry k
                let row = offsets.partition_point(|&o| o as usize <= k) - 1;
                let c = cells[row] as usize;
                let o = mesh.other(f, c).expect("interior");
                let mass = rho * flux_orientation(f, c) * flux[fi];
                let mu = rho * 0.5 * (nu[c] + nu[o]);
                -(mu * f.area / mesh.normal_distance(f) + (-mass).max(0.0))
            });
            let _ = vel;
            self.mom.vals = vals;
        }

        // Unrelaxed residuals, then relaxed solves per component.
        let mut res = Residuals::default();
        let mut a_sum = [0.0f64; 3];
        let mut diag_mean = vec![0.0; n];
        let tol = Tolerance {
            reduction: self.settings.inner_reduction,
            absolute_inf: None,
            max_iterations: self.settings.inner_max_iterations,
        };
        let mut new_vel = vec![Vec3::ZERO; n];
        for comp in 0..3 {
            let u: Vec<f64> = (0..n)
                .map(|i| field.velocity[self.cells[i] as usize][comp])
                .collect();
            for i in 0..n {
                self.mom.diag[i] = rows[i].0 + rows[i].1[comp];
            }
            let b: Vec<f64> = (0..n).map(|i| rows[i].2[comp]).collect();
            let r1 = self.mom.residual_l1(&u, &b);
            a_sum[comp] = par::sum(n, |i| self.mom.diag[i]);
            let norm = a_sum[comp] * self.u_ref;
            let r = if r1 == 0.0 { 0.0 } else { r1 / norm };
            match comp {
                0 => res.ux = r,
                1 => res.uy = r,
                _ => res.uz = r,
            }
            let mut rhs = b;
            for i in 0..n {
                let a = self.mom.diag[i];
                rhs[i] += (1.0 - alpha_u) / alpha_u * a * u[i];
                self.mom.diag[i] = a / alpha_u;
                diag_mean[i] += self.mom.diag[i] / 3.0;
            }
            let mut x = u;
            linear::bicgstab(&self.mom, &rhs, &mut x, tol).map_err(|e| {
                SolverError::LinearSolverDiverged {
                    system: "momentum",
                    source: e,
                }
            })?;
            for i in 0..n {
                new_vel[i][comp] = x[i];
            }
        }
        for i in 0..n {
            self.d_coef[i] = mesh.volumes[self.cells[i] as usize] / diag_mean[i];
        }
        for (i, &c) in self.cells.iter().enumerate() {
            field.velocity[c as usize] = new_vel[i];
        }

        // Rhie–Chow face fluxes from the predicted velocity.
        let grad_p = self.gradient(&field.pressure, 0.0);
        let predicted = self.face_fluxes(field, &grad_p);
        let div = self.divergence(&predicted);
        let div_l1 = par::sum(n, |i| div[i].abs());
        res.continuity = if div_l1 == 0.0 { 0.0 } else { div_l1 / self.q_ref };

        // Pressure correction.
        let coef = self.correction_coefficients();
        {
            let press = &mut self.press;
            for v in press.diag.iter_mut() {
                *v = 0.0;
            }
            for (k, &fi) in self.entry_face.iter().enumerate() {
                press.vals[k] = -coef[fi as usize];
            }
            let diag: Vec<f64> = par::map(n, |i| {
                let c = self.cells[i] as usize;
                mesh.cell_faces(c)
                    .iter()
                    .filter(|&&fi| {
                        matches!(self.roles[fi as usize], FaceRole::Interior | FaceRole::Boundary)
                    })
                    .map(|&fi| coef[fi as usize])
                    .sum()
            });
            press.diag = diag;
        }
        let rhs: Vec<f64> = div.iter().map(|d| -d).collect();
        let mut pc = vec![0.0; n];
        if div_l1 > 0.0 {
            self.amg.update(&self.press);
            let ptol = Tolerance {
                reduction: self.settings.inner_reduction,
                absolute_inf: tight.then(|| 0.5 * self.settings.continuity_tol * self.q_ref),
                max_iterations: if tight { 20 * self.settings.inner_max_iterations } else { self.settings.inner_max_iterations },
            };
            linear::pcg(&self.press, &rhs, &mut pc, &self.amg, ptol).map_err(|e| {
                SolverError::LinearSolverDiverged {
                    system: "pressure correction",
                    source: e,
                }
            })?;
        }

        // Corrections.
        let mut pc_full = vec![0.0; mesh.n_cells()];
        for (i, &c) in self.cells.iter().enumerate() {
            pc_full[c as usize] = pc[i];
        }
        let grad_pc = self.gradient(&pc_full, 0.0);
        field.flux = par::map(mesh.faces.len(), |fi| {
            let f = &mesh.faces[fi];
            match self.roles[fi] {
                FaceRole::Interior => {
                    predicted[fi]
                        - coef[fi] * (pc_full[f.neighbor as usize] - pc_full[f.owner as usize])
                }
                FaceRole::Boundary => predicted[fi] + coef[fi] * pc_full[f.owner as usize],
                _ => 0.0,
            }
        });
        let alpha_p = self.settings.relax_p;
        for (i, &c) in self.cells.iter().enumerate() {
            let c = c as usize;
            field.velocity[c] -= grad_pc[i] * self.d_coef[i];
            field.pressure[c] += alpha_p * pc[i];
        }
        self.check_finite(field)?;
        Ok(res)
    }

    fn check_finite(&self, field: &FlowField) -> Result<(), SolverError> {
        let bad_v = field.velocity.iter().position(|v| !v.is_finite());
        let bad_p = field.pressure.iter().position(|p| !p.is_finite());
        let (what, cell) = match (bad_v, bad_p) {
            (Some(c), _) => ("velocity", c),
            (None, Some(c)) => ("pressure", c),
            (None, None) => return Ok(()),
        };
        Err(SolverError::NonFiniteField {
            iteration: self.iteration,
            what,
            cell,
            snapshot: Box::new(field.clone()),
        })
    }

    /// Rhie–Chow interpolated fluxes for the current velocity and pressure.
    fn face_fluxes(&self, field: &FlowField, grad_p: &[Vec3]) -> Vec<f64> {
        let mesh = self.mesh;
        let vel = &field.velocity;
        let p = &field.pressure;
        par::map(mesh.faces.len(), |fi| {
            let f = &mesh.faces[fi];
            let a = f.axis as usize;
            match self.roles[fi] {
                FaceRole::Interior => {
                    let (o, nb) = (f.owner as usize, f.neighbor as usize);
                    let (io, inb) = (self.unknown[o] as usize, self.unknown[nb] as usize);
                    let w = mesh.owner_weight(f);
                    let uf = (vel[o][a] * w + vel[nb][a] * (1.0 - w)) * f.sign;
                    let df = w * self.d_coef[io] + (1.0 - w) * self.d_coef[inb];
                    let gpf = (grad_p[io][a] * w + grad_p[inb][a] * (1.0 - w)) * f.sign;
                    let dpdn = (p[nb] - p[o]) / mesh.normal_distance(f);
                    f.area * (uf - df * (dpdn - gpf))
                }
                FaceRole::Boundary => {
                    let o = f.owner as usize;
                    let io = self.unknown[o] as usize;
                    let un = vel[o][a] * f.sign;
                    let gpn = grad_p[io][a] * f.sign;
                    let dpdn = (0.0 - p[o]) / mesh.normal_distance(f);
                    f.area * (un - self.d_coef[io] * (dpdn - gpn))
                }
                _ => 0.0,
            }
        })
    }

    /// Net outward flux of every unknown's cell.
    fn divergence(&self, flux: &[f64]) -> Vec<f64> {
        let mesh = self.mesh;
        par::map(self.n_unknowns(), |i| {
            let c = self.cells[i] as usize;
            mesh.cell_faces(c)
                .iter()
                .map(|&fi| {
                    let f = &mesh.faces[fi as usize];
                    flux_orientation(f, c) * flux[fi as usize]
                })
                .sum()
        })
    }

    /// Pressure-correction face coefficients `D_f A / d`.
    fn correction_coefficients(&self) -> Vec<f64> {
        let mesh = self.mesh;
        par::map(mesh.faces.len(), |fi| {
            let f = &mesh.faces[fi];
            match self.roles[fi] {
                FaceRole::Interior => {
                    let w = mesh.owner_weight(f);
                    let df = w * self.d_coef[self.unknown[f.owner as usize] as usize]
                        + (1.0 - w) * self.d_coef[self.unknown[f.neighbor as usize] as usize];
                    df * f.area / mesh.normal_distance(f)
                }
                FaceRole::Boundary => {
                    self.d_coef[self.unknown[f.owner as usize] as usize] * f.area
                        / mesh.normal_distance(f)
                }
                _ => 0.0,
            }
        })
    }

    /// Largest per-cell net flux relative to `Q_ref`.
    pub fn max_cell_imbalance(&self, field: &FlowField) -> f64 {
        let div = self.divergence(&field.flux);
        div.iter().fold(0.0f64, |m, d| m.max(d.abs())) / self.q_ref
    }

    /// Iterates to convergence or the iteration cap, then tightens continuity
    /// with one extra projection step.
    pub fn run(
        &mut self,
        field: &mut FlowField,
        src: &SourceField,
        mut observe: impl FnMut(usize, &Residuals),
    ) -> Result<ConvergenceReport, SolverError> {
        let start = Instant::now();
        let tol = self.settings.residual_tol;
        let mut history = Vec::new();
        let mut converged = false;
        for it in 1..=self.settings.max_iterations {
            let res = self.step(field, src, false)?;
            observe(it, &res);
            history.push(res);
            if res.max() <= tol {
                converged = true;
                break;
            }
        }
        let iterations = history.len();
        let mut imbalance = self.max_cell_imbalance(field);
        if imbalance > self.settings.continuity_tol {
            self.step(field, src, true)?;
            imbalance = self.max_cell_imbalance(field);
        }
        Ok(ConvergenceReport {
            history,
            iterations,
            converged,
            wall_time: start.elapsed(),
            max_cell_imbalance: imbalance,
        })
    }
}

/// `+1` when `c` owns `f` (stored flux leaves `c`), `-1` otherwise.
#[inline]
fn flux_orientation(f: &crate::mesh::Face, c: usize) -> f64 {
    if f.owner as usize == c {
        1.0
    } else {
        -1.0
    }
}

/// Geometric aggregates: at step `s` every cell joins the aligned block of
/// `2^s` cells of its own level, so the hierarchy respects the mesh's mirror
/// symmetries.
fn aggregation_levels(mesh: &Mesh, cells: &[u32]) -> Vec<Vec<u32>> {
    use std::collections::HashMap;
    let max_level = mesh.max_level as u32;
    let mut prev: Vec<u32> = (0..cells.len() as u32).collect();
    let mut prev_count = cells.len();
    let mut out = Vec::new();
    for step in 1..=12u32 {
        let mut ids: HashMap<(u32, [u32; 3]), u32> = HashMap::new();
        let mut cur = Vec::with_capacity(cells.len());
        for &c in cells {
            let c = c as usize;
            let lvl = mesh.levels[c] as u32;
            let shift = max_level - lvl + step;
            let fine = mesh.coords[c].map(|v| v << (max_level - lvl));
            let key = (shift, fine.map(|v| v >> shift));
            let next = ids.len() as u32;
            cur.push(*ids.entry(key).or_insert(next));
        }
        let count = ids.len();
        if count >= prev_count {
            break;
        }
        let mut map = vec![0u32; prev_count];
        for (i, &p) in prev.iter().enumerate() {
            map[p as usize] = cur[i];
        }
        out.push(map);
        prev = cur;
        prev_count = count;
        if count <= 1 {
            break;
        }
    }
    out
}

/// Converged (or flagged) solution of a case.
#[derive(Debug, Clone)]
pub struct Solution {
    pub mesh: Mesh,
    pub source: SourceField,
    pub field: FlowField,
    pub report: ConvergenceReport,
}

/// Builds the mesh, runs SIMPLE to convergence and returns everything.
pub fn solve_steady(case: &ValidatedCase) -> Result<Solution, SolverError> {
    solve_steady_with(case, |_, _| {})
}

pub fn solve_steady_with(
    case: &ValidatedCase,
    observe: impl FnMut(usize, &Residuals),
) -> Result<Solution, SolverError> {
    let mesh = mesh::mesh_for_case(case)?;
    let source = momentum_source_field(&mesh, case)?;
    let mut field = initialize(&mesh, case);
    let report = {
        let mut solver = FlowSolver::new(&mesh, case);
        solver.run(&mut field, &source, observe)?
    };
    Ok(Solution {
        mesh,
        source,
        field,
        report,
    })
}
