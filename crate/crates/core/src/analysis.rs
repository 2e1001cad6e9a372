//! Thrust-recovery curves, the control-volume oracle and hover analysis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{validate_case, Angle, CaseConfig, CaseError, ValidatedCase};
use crate::forces::{self, BalanceReport, ForceResult};
use crate::geom::Vec3;
use crate::mesh::{self, FacePatch, Mesh};
use crate::par;
use crate::solver::{self, ConvergenceReport, FlowField, Residuals, Solution, SolverError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("tilt angles must be strictly increasing within [0, 90] deg")]
    InvalidTiltList,
    #[error("a simulated curve needs a row at 0 deg for normalization")]
    MissingZeroTilt,
    #[error("exit angle {exit} deg exceeds tilt {tilt} deg; the momentum model does not apply")]
    ExitExceedsTilt { tilt: f64, exit: f64 },
    #[error("capture efficiency {0} outside [0, 1]")]
    InvalidEfficiency(f64),
    #[error("model is insensitive to efficiency at this point (cos theta = cos phi)")]
    DegenerateFit,
    #[error("lambda must be positive (got {0})")]
    InvalidLambda(f64),
    #[error("row phi = {phi} deg: {source}")]
    Case { phi: f64, source: CaseError },
    #[error("row phi = {phi} deg: {source}")]
    Solver { phi: f64, source: SolverError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSource {
    Simulated,
    ExternalFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub phi_deg: f64,
    /// Total vertical thrust (N); for external curves this may be a scaled value.
    pub thrust: f64,
    pub t_over_t0: f64,
    pub delta_recovery: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCurve {
    pub rows: Vec<CurveRow>,
    pub exit_angle_deg: Option<f64>,
    pub geometry: String,
    pub source: CurveSource,
}

fn cos_deg(deg: f64) -> f64 {
    deg.to_radians().cos()
}

fn check_tilts(phis: &[f64]) -> Result<(), AnalysisError> {
    let in_range = phis.iter().all(|p| (0.0..=90.0).contains(p));
    let increasing = phis.windows(2).all(|w| w[0] < w[1]);
    if phis.is_empty() || !in_range || !increasing {
        return Err(AnalysisError::InvalidTiltList);
    }
    Ok(())
}

impl RecoveryCurve {
    /// Normalizes simulated thrusts by the 0 deg row.
    pub fn from_thrusts(
        phis: &[f64],
        thrusts: &[f64],
        converged: &[bool],
        exit_angle_deg: Option<f64>,
        geometry: impl Into<String>,
    ) -> Result<Self, AnalysisError> {
        check_tilts(phis)?;
        if phis[0] != 0.0 {
            return Err(AnalysisError::MissingZeroTilt);
        }
        let t0 = thrusts[0];
        let rows = phis
            .iter()
            .zip(thrusts)
            .zip(converged)
            .map(|((&phi, &t), &ok)| {
                let r = t / t0;
                CurveRow {
                    phi_deg: phi,
                    thrust: t,
                    t_over_t0: r,
                    delta_recovery: r - cos_deg(phi),
                    converged: ok,
                }
            })
            .collect();
        Ok(RecoveryCurve {
            rows,
            exit_angle_deg,
            geometry: geometry.into(),
            source: CurveSource::Simulated,
        })
    }

    /// Curve from given `(φ, T/T0)` pairs (e.g. digitized measurements).
    pub fn from_ratios(points: &[(f64, f64)], geometry: impl Into<String>) -> Result<Self, AnalysisError> {
        let phis: Vec<f64> = points.iter().map(|p| p.0).collect();
        check_tilts(&phis)?;
        let rows = points
            .iter()
            .map(|&(phi, r)| CurveRow {
                phi_deg: phi,
                thrust: r,
                t_over_t0: r,
                delta_recovery: r - cos_deg(phi),
                converged: true,
            })
            .collect();
        Ok(RecoveryCurve {
            rows,
            exit_angle_deg: None,
            geometry: geometry.into(),
            source: CurveSource::ExternalFile,
        })
    }

    /// Checks ordering and the definitional columns.
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let phis: Vec<f64> = self.rows.iter().map(|r| r.phi_deg).collect();
        check_tilts(&phis)
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// Piecewise-linear interpolant of `T/T0`; `None` outside the sampled range.
    pub fn interpolate(&self, phi_deg: f64) -> Option<f64> {
        let rows = &self.rows;
        if rows.is_empty() || phi_deg < rows[0].phi_deg || phi_deg > rows[rows.len() - 1].phi_deg {
            return None;
        }
        for w in rows.windows(2) {
            if phi_deg <= w[1].phi_deg {
                let t = (phi_deg - w[0].phi_deg) / (w[1].phi_deg - w[0].phi_deg);
                return Some(w[0].t_over_t0 + t * (w[1].t_over_t0 - w[0].t_over_t0));
            }
        }
        Some(rows[rows.len() - 1].t_over_t0)
    }
}

/// `ΔT/T0 = T/T0 - cos φ` per row.
pub fn delta_recovery(curve: &RecoveryCurve) -> Vec<f64> {
    curve
        .rows
        .iter()
        .map(|r| r.t_over_t0 - cos_deg(r.phi_deg))
        .collect()
}

/// Capture-turning efficiency of the control-volume model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumTheoryParams {
    pub eta: f64,
}

impl MomentumTheoryParams {
    pub fn new(eta: f64) -> Result<Self, AnalysisError> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(AnalysisError::InvalidEfficiency(eta));
        }
        Ok(MomentumTheoryParams { eta })
    }
}

/// Far-wake control volume: a fraction η of the jet momentum flux `T_p` is
/// turned from the jet direction to the exit direction, so
/// `T/T_p = cos φ + η (cos θ - cos φ)`.
pub fn ideal_thrust_fraction(
    tilt: Angle,
    exit: Angle,
    params: MomentumTheoryParams,
) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&params.eta) {
        return Err(AnalysisError::InvalidEfficiency(params.eta));
    }
    if exit.radians() > tilt.radians() {
        return Err(AnalysisError::ExitExceedsTilt {
            tilt: tilt.degrees(),
            exit: exit.degrees(),
        });
    }
    let (cp, ct) = (tilt.radians().cos(), exit.radians().cos());
    Ok(cp + params.eta * (ct - cp))
}

/// Inverts the model at one measured point. The result is not clamped to
/// `[0, 1]`; callers compare it against the bound themselves.
pub fn fit_efficiency(tilt: Angle, exit: Angle, t_over_t0: f64) -> Result<f64, AnalysisError> {
    if exit.radians() > tilt.radians() {
        return Err(AnalysisError::ExitExceedsTilt {
            tilt: tilt.degrees(),
            exit: exit.degrees(),
        });
    }
    let (cp, ct) = (tilt.radians().cos(), exit.radians().cos());
    if ct == cp {
        return Err(AnalysisError::DegenerateFit);
    }
    Ok((t_over_t0 - cp) / (ct - cp))
}

/// `λ = m g / T_max` with the maximum thrust given in kilogram-force.
pub fn lambda_from_mass(mass_kg: f64, max_thrust_kgf: f64) -> f64 {
    mass_kg / max_thrust_kgf
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriticalAngle {
    pub phi_c_deg: Option<f64>,
    /// The curve is already below λ at its first (0 deg) row.
    pub takeoff_infeasible: bool,
}

/// Largest tilt at which the piecewise-linear `T/T0` still reaches `λ`.
pub fn critical_hover_angle(curve: &RecoveryCurve, lambda: f64) -> Result<CriticalAngle, AnalysisError> {
    if !(lambda > 0.0) {
        return Err(AnalysisError::InvalidLambda(lambda));
    }
    let rows = &curve.rows;
    if rows.is_empty() {
        return Ok(CriticalAngle::default());
    }
    if rows[0].t_over_t0 < lambda {
        return Ok(CriticalAngle {
            phi_c_deg: None,
            takeoff_infeasible: true,
        });
    }
    let j = rows
        .iter()
        .rposition(|r| r.t_over_t0 >= lambda)
        .expect("first row reaches lambda");
    let phi = if j + 1 == rows.len() {
        rows[j].phi_deg
    } else {
        let (a, b) = (&rows[j], &rows[j + 1]);
        let t = (a.t_over_t0 - lambda) / (a.t_over_t0 - b.t_over_t0);
        a.phi_deg + t * (b.phi_deg - a.phi_deg)
    };
    Ok(CriticalAngle {
        phi_c_deg: Some(phi),
        takeoff_infeasible: false,
    })
}

/// `T/T0 - λ` per row; non-negative rows can hover.
pub fn excess_hover_thrust(curve: &RecoveryCurve, lambda: f64) -> Vec<f64> {
    curve.rows.iter().map(|r| r.t_over_t0 - lambda).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoverEnvelope {
    pub curve: RecoveryCurve,
    pub lambda: f64,
    pub critical: CriticalAngle,
    pub excess: Vec<f64>,
}

pub fn hover_envelope(curve: RecoveryCurve, lambda: f64) -> Result<HoverEnvelope, AnalysisError> {
    let critical = critical_hover_angle(&curve, lambda)?;
    let excess = excess_hover_thrust(&curve, lambda);
    Ok(HoverEnvelope {
        curve,
        lambda,
        critical,
        excess,
    })
}

/// Everything computed for one case.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub case: ValidatedCase,
    pub solution: Solution,
    pub patch: FacePatch,
    pub forces: ForceResult,
    pub balance: BalanceReport,
}

impl CaseOutcome {
    pub fn report(&self) -> &ConvergenceReport {
        &self.solution.report
    }
}

/// Solves `case` and integrates forces and the momentum budget.
pub fn evaluate_case(
    case: &ValidatedCase,
    observe: impl FnMut(usize, &Residuals),
) -> Result<CaseOutcome, SolverError> {
    let solution = solver::solve_steady_with(case, observe)?;
    let patch = mesh::exposed_solid_faces(&solution.mesh);
    let surface = forces::surface_stress_integral(&solution.mesh, &solution.field, &patch);
    let thrust = case.config.disk.thrust;
    let forces = forces::total_vertical_thrust(surface, thrust, case.tilt);
    let balance =
        forces::momentum_flux_balance(&solution.mesh, &solution.field, &solution.source, &patch, thrust);
    Ok(CaseOutcome {
        case: case.clone(),
        solution,
        patch,
        forces,
        balance,
    })
}

/// `template` with tilt `phi_deg` and, when a deflector is present, exit
/// angle `exit_deg`.
pub fn configure(template: &CaseConfig, phi_deg: f64, exit_deg: Option<f64>) -> CaseConfig {
    let mut cfg = template.clone();
    cfg.disk.tilt_deg = phi_deg;
    if let (Some(d), Some(e)) = (cfg.deflector.as_mut(), exit_deg) {
        d.exit_angle_deg = e;
    }
    cfg
}

#[derive(Debug)]
pub struct Sweep {
    pub curve: RecoveryCurve,
    pub rows: Vec<CaseOutcome>,
}

/// Runs every tilt in `phis` (rows concurrently), normalizing by the 0 deg row.
pub fn sweep_recovery(
    template: &CaseConfig,
    phis: &[f64],
    exit_deg: Option<f64>,
) -> Result<Sweep, AnalysisError> {
    check_tilts(phis)?;
    if phis[0] != 0.0 {
        return Err(AnalysisError::MissingZeroTilt);
    }
    let cases = phis
        .iter()
        .map(|&phi| {
            validate_case(configure(template, phi, exit_deg))
                .map_err(|source| AnalysisError::Case { phi, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = par::map_jobs(cases, |case| {
        let phi = case.config.disk.tilt_deg;
        evaluate_case(&case, |_, _| {}).map_err(|source| AnalysisError::Solver { phi, source })
    });
    let rows = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let thrusts: Vec<f64> = rows.iter().map(|r| r.forces.thrust).collect();
    let converged: Vec<bool> = rows.iter().map(|r| r.report().converged).collect();
    let geometry = if template.deflector.is_some() {
        "scoop"
    } else {
        "none"
    };
    let effective_exit = template.deflector.as_ref().map(|d| exit_deg.unwrap_or(d.exit_angle_deg));
    let curve = RecoveryCurve::from_thrusts(phis, &thrusts, &converged, effective_exit, geometry)?;
    Ok(Sweep { curve, rows })
}

/// Largest `|u(c) - M u(mirror(c))|` over all cells, relative to the largest
/// speed, for reflection through the mid-plane normal to `axis`.
pub fn mirror_asymmetry(mesh: &Mesh, field: &FlowField, axis: usize) -> f64 {
    let umax = field.max_speed();
    if umax == 0.0 {
        return 0.0;
    }
    let worst = par::max(mesh.n_cells(), |c| match mesh.mirror_cell(c, axis) {
        Some(m) => {
            let mut um = field.velocity[m];
            um[axis] = -um[axis];
            (field.velocity[c] - um).max_abs()
        }
        None => f64::INFINITY,
    });
    worst / umax
}

/// Lowest gauge pressure among fluid cells touching the deflector within
/// `radius` (in the tilt plane) of its inlet lip.
pub fn entrance_pressure_minimum(
    mesh: &Mesh,
    field: &FlowField,
    patch: &FacePatch,
    lip: Vec3,
    radius: f64,
) -> Option<f64> {
    patch
        .faces
        .iter()
        .map(|f| f.fluid_cell as usize)
        .filter(|&c| {
            let d = mesh.centers[c] - lip;
            (d.x * d.x + d.y * d.y).sqrt() <= radius
        })
        .map(|c| field.pressure[c])
        .reduce(f64::min)
}

/// Default entrance region: within 0.3 D of the inlet lip.
pub const ENTRANCE_RADIUS_DIAMETERS: f64 = 0.3;

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine_curve(step: f64) -> RecoveryCurve {
        let pts: Vec<(f64, f64)> = (0..)
            .map(|i| i as f64 * step)
            .take_while(|&p| p <= 90.0)
            .map(|p| (p, cos_deg(p)))
            .collect();
        RecoveryCurve::from_ratios(&pts, "cos").unwrap()
    }

    #[test]
    fn lambda_values() {
        assert_eq!(format!("{:.2}", lambda_from_mass(5.0, 11.2)), "0.45");
        assert_eq!(format!("{:.2}", lambda_from_mass(5.5, 11.2)), "0.49");
    }

    #[test]
    fn cosine_curve_critical_angle() {
        let c = critical_hover_angle(&cosine_curve(10.0), 0.45).unwrap();
        let phi = c.phi_c_deg.unwrap();
        assert!((phi - 63.26).abs() < 0.3, "{phi}");
    }

    #[test]
    fn infeasible_cases() {
        let c = critical_hover_angle(&cosine_curve(10.0), 2.0).unwrap();
        assert_eq!(c.phi_c_deg, None);
        assert!(c.takeoff_infeasible);
        assert!(critical_hover_angle(&cosine_curve(10.0), 0.0).is_err());
    }

    #[test]
    fn oracle_limits() {
        let p0 = MomentumTheoryParams::new(0.0).unwrap();
        let p1 = MomentumTheoryParams::new(1.0).unwrap();
        let phi = Angle::from_degrees(70.0);
        let zero = Angle::from_degrees(0.0);
        assert_eq!(ideal_thrust_fraction(phi, zero, p0).unwrap(), phi.radians().cos());
        assert!((ideal_thrust_fraction(phi, zero, p1).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            ideal_thrust_fraction(Angle::from_degrees(10.0), Angle::from_degrees(20.0), p1),
            Err(AnalysisError::ExitExceedsTilt { .. })
        ));
        assert!(MomentumTheoryParams::new(1.5).is_err());
    }

    #[test]
    fn simulated_normalization() {
        let c = RecoveryCurve::from_thrusts(&[0.0, 45.0, 90.0], &[10.4, 8.0, 2.6], &[true; 3], Some(0.0), "scoop")
            .unwrap();
        assert_eq!(c.rows[0].t_over_t0, 1.0);
        assert!((c.rows[2].delta_recovery - 0.25).abs() < 1e-12);
        assert!(RecoveryCurve::from_thrusts(&[10.0, 20.0], &[1.0, 1.0], &[true; 2], None, "x").is_err());
        assert!(RecoveryCurve::from_thrusts(&[0.0, 0.0], &[1.0, 1.0], &[true; 2], None, "x").is_err());
    }
}
