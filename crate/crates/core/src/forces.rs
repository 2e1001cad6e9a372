//! Deflector surface forces, vertical thrust composition and momentum audit.

use std::fmt;

use crate::case::{rotate_tilt_plane, Angle};
use crate::geom::Vec3;
use crate::mesh::{FacePatch, Mesh};
use crate::par;
use crate::solver::{FlowField, SourceField};

/// Force exerted by the fluid on the solid patch, split by origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceForce {
    pub pressure: Vec3,
    pub viscous: Vec3,
    /// Set when the patch had no faces; both parts are then zero.
    pub empty_patch: bool,
}

impl SurfaceForce {
    pub fn total(&self) -> Vec3 {
        self.pressure + self.viscous
    }
}

/// Pressure from the adjacent fluid cell on each face, plus a one-sided wall
/// shear `mu_eff * u_t / (h / 2)` along the tangential velocity.
pub fn surface_stress_integral(mesh: &Mesh, field: &FlowField, patch: &FacePatch) -> SurfaceForce {
    if patch.is_empty() {
        return SurfaceForce {
            empty_patch: true,
            ..SurfaceForce::default()
        };
    }
    let rho = field.density;
    let pressure = par::sum(patch.faces.len(), |k| {
        let pf = &patch.faces[k];
        pf.area_vector * field.pressure[pf.fluid_cell as usize]
    });
    let viscous = par::sum(patch.faces.len(), |k| {
        let pf = &patch.faces[k];
        let c = pf.fluid_cell as usize;
        let axis = mesh.faces[pf.face as usize].axis as usize;
        let mut ut = field.velocity[c];
        ut[axis] = 0.0;
        let area = pf.area_vector.norm();
        ut * (rho * field.nu_eff[c] * area / (0.5 * mesh.spacing[c]))
    });
    SurfaceForce {
        pressure,
        viscous,
        empty_patch: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceResult {
    /// Deflector force `R` (N), lab frame.
    pub deflector: Vec3,
    pub pressure: Vec3,
    pub viscous: Vec3,
    /// Total vertical thrust `T` (N).
    pub thrust: f64,
    /// Disk contribution `T_p cos φ`.
    pub disk_vertical: f64,
    /// Deflector contribution `R · e_y`.
    pub deflector_vertical: f64,
    pub empty_patch: bool,
}

impl ForceResult {
    pub const CSV_HEADER: &'static str =
        "T_newton,disk_vertical,deflector_vertical,R_x,R_y,R_z,Rp_x,Rp_y,Rp_z,Rv_x,Rv_y,Rv_z";

    pub fn csv_row(&self) -> String {
        let v = [
            self.thrust,
            self.disk_vertical,
            self.deflector_vertical,
            self.deflector.x,
            self.deflector.y,
            self.deflector.z,
            self.pressure.x,
            self.pressure.y,
            self.pressure.z,
            self.viscous.x,
            self.viscous.y,
            self.viscous.z,
        ];
        v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for ForceResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vertical thrust T     {:.6} N", self.thrust)?;
        writeln!(f, "  disk  T_p cos(phi)  {:.6} N", self.disk_vertical)?;
        writeln!(f, "  deflector R.e_y     {:.6} N", self.deflector_vertical)?;
        let v = |v: Vec3| format!("({:.6}, {:.6}, {:.6})", v.x, v.y, v.z);
        writeln!(f, "deflector force R      {} N", v(self.deflector))?;
        writeln!(f, "  pressure part        {} N", v(self.pressure))?;
        write!(f, "  viscous part         {} N", v(self.viscous))?;
        if self.empty_patch {
            write!(f, "\nwarning: deflector patch is empty")?;
        }
        Ok(())
    }
}

/// `T = T_p cos φ + R · e_y`.
pub fn total_vertical_thrust(force: SurfaceForce, thrust: f64, tilt: Angle) -> ForceResult {
    let r = force.total();
    let disk_vertical = thrust * tilt.radians().cos();
    ForceResult {
        deflector: r,
        pressure: force.pressure,
        viscous: force.viscous,
        thrust: disk_vertical + r.y,
        disk_vertical,
        deflector_vertical: r.y,
        empty_patch: force.empty_patch,
    }
}

/// Vertical thrust from a deflector force expressed in the deflector's own
/// (unrotated) frame: `T = T_p cos φ + (Q_z(θ) R_local) · e_y`.
pub fn deflector_frame_thrust(r_local: Vec3, thrust: f64, tilt: Angle, exit: Angle) -> f64 {
    thrust * tilt.radians().cos() + rotate_tilt_plane(exit, r_local).y
}

/// Inverse of the frame change used by [`deflector_frame_thrust`].
pub fn to_deflector_frame(r_lab: Vec3, exit: Angle) -> Vec3 {
    rotate_tilt_plane(-exit, r_lab)
}

/// Componentwise discrete momentum budget of the flow region. Forces are
/// those acting on the fluid; `closure` should vanish at convergence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BalanceReport {
    /// Net momentum outflow `sum rho F u_f` through the domain boundary.
    pub advective_outflow: Vec3,
    /// Pressure force of the domain boundary on the fluid.
    pub boundary_pressure: Vec3,
    /// Force of the solid patch on the fluid (`-R`).
    pub solid_patch: Vec3,
    /// Actuator-disk body force on the fluid.
    pub source: Vec3,
    /// `source + solid_patch + boundary_pressure - advective_outflow`.
    pub closure: Vec3,
    /// `|closure| / T_p` (or `|closure|` when T_p is zero).
    pub closure_fraction: f64,
}

impl BalanceReport {
    pub const CSV_HEADER: &'static str = "term,x,y,z";

    pub fn csv_rows(&self) -> Vec<String> {
        let row = |name: &str, v: Vec3| format!("{name},{:e},{:e},{:e}", v.x, v.y, v.z);
        vec![
            row("advective_outflow", self.advective_outflow),
            row("boundary_pressure", self.boundary_pressure),
            row("solid_patch", self.solid_patch),
            row("source", self.source),
            row("closure", self.closure),
        ]
    }
}

impl fmt::Display for BalanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = |v: Vec3| format!("({:.6}, {:.6}, {:.6})", v.x, v.y, v.z);
        writeln!(f, "momentum outflow       {} N", v(self.advective_outflow))?;
        writeln!(f, "boundary pressure      {} N", v(self.boundary_pressure))?;
        writeln!(f, "solid patch on fluid   {} N", v(self.solid_patch))?;
        writeln!(f, "disk source            {} N", v(self.source))?;
        write!(
            f,
            "closure                {} N ({:.3}% of T_p)",
            v(self.closure),
            100.0 * self.closure_fraction
        )
    }
}

/// Audits the steady momentum theorem over all flow cells. Boundary faces
/// carry gauge pressure zero; inflow faces advect `(F/A) n` as the solver does.
pub fn momentum_flux_balance(
    mesh: &Mesh,
    field: &FlowField,
    src: &SourceField,
    patch: &FacePatch,
    thrust: f64,
) -> BalanceReport {
    let rho = field.density;
    let boundary: Vec<usize> = (0..mesh.faces.len())
        .filter(|&fi| {
            let f = &mesh.faces[fi];
            f.is_boundary() && mesh.kinds[f.owner as usize].is_flow()
        })
        .collect();
    let advective_outflow = par::sum(boundary.len(), |k| {
        let fi = boundary[k];
        let f = &mesh.faces[fi];
        let flux = field.flux[fi];
        let uf = if flux >= 0.0 {
            field.velocity[f.owner as usize]
        } else {
            f.normal() * (flux / f.area)
        };
        uf * (rho * flux)
    });
    let boundary_pressure = Vec3::ZERO;
    let wall = surface_stress_integral(mesh, field, patch);
    let solid_patch = -wall.total();
    let source = src.total_force(mesh);
    let closure = source + solid_patch + boundary_pressure - advective_outflow;
    let closure_fraction = if thrust > 0.0 {
        closure.norm() / thrust
    } else {
        closure.norm()
    };
    BalanceReport {
        advective_outflow,
        boundary_pressure,
        solid_patch,
        source,
        closure,
        closure_fraction,
    }
}

/// Downward momentum flux `sum (rho F u_y + p A)` through the horizontal
/// face plane nearest `y_target`, with `F` the upward face flux. For a free
/// jet this equals the disk thrust.
pub fn plane_momentum_flux(mesh: &Mesh, field: &FlowField, y_target: f64) -> f64 {
    let h0 = mesh.edge / mesh.base_cells as f64;
    let k = (y_target / h0).round().clamp(1.0, mesh.base_cells as f64 - 1.0);
    let y_plane = k * h0;
    let tol = 1e-9 * mesh.edge;
    let faces: Vec<usize> = (0..mesh.faces.len())
        .filter(|&fi| {
            let f = &mesh.faces[fi];
            f.axis == 1 && !f.is_boundary() && (f.center.y - y_plane).abs() < tol
        })
        .collect();
    let rho = field.density;
    par::sum(faces.len(), |k| {
        let f = &mesh.faces[faces[k]];
        let (o, n) = (f.owner as usize, f.neighbor as usize);
        let w = mesh.owner_weight(f);
        let uy = w * field.velocity[o].y + (1.0 - w) * field.velocity[n].y;
        let p = w * field.pressure[o] + (1.0 - w) * field.pressure[n];
        let f_up = field.flux[faces[k]] * f.sign;
        rho * f_up * uy + p * f.area
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thrust_without_deflector_is_cosine() {
        for deg in [0.0, 30.0, 60.0, 90.0] {
            let t = Angle::from_degrees(deg);
            let r = total_vertical_thrust(SurfaceForce::default(), 12.0, t);
            assert_eq!(r.thrust, 12.0 * t.radians().cos());
        }
    }

    #[test]
    fn quarter_recovery_at_ninety_degrees() {
        let force = SurfaceForce {
            pressure: Vec3::new(-3.0, 0.25 * 12.0, 0.0),
            ..SurfaceForce::default()
        };
        let r = total_vertical_thrust(force, 12.0, Angle::from_degrees(90.0));
        assert!((r.thrust - 3.0).abs() < 1e-12);
        assert_eq!(r.deflector, r.pressure + r.viscous);
    }

    #[test]
    fn deflector_frame_single_vector() {
        let t = deflector_frame_thrust(Vec3::EY, 0.0, Angle::from_degrees(0.0), Angle::from_degrees(10.0));
        assert!((t - 10f64.to_radians().cos()).abs() < 1e-12);
        let r = Vec3::new(0.3, -1.2, 0.1);
        let same = deflector_frame_thrust(r, 5.0, Angle::from_degrees(40.0), Angle::from_degrees(0.0));
        let lab = total_vertical_thrust(
            SurfaceForce {
                pressure: r,
                ..SurfaceForce::default()
            },
            5.0,
            Angle::from_degrees(40.0),
        );
        assert_eq!(same, lab.thrust);
    }
}
