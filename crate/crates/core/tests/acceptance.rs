//! Acceptance criteria 1-10, one PASS/FAIL line each.
//!
//! The CFD criteria solve eleven benchtop cases, which takes a few minutes
//! per case on one core. The process exits 0 after reporting unless
//! `WAKEVEC_ACCEPTANCE_STRICT=1` is set, in which case any FAIL exits 1.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use wakevec::analysis::{
    critical_hover_angle, entrance_pressure_minimum, evaluate_case, fit_efficiency, ideal_thrust_fraction,
    lambda_from_mass, mirror_asymmetry, CaseOutcome, MomentumTheoryParams, RecoveryCurve,
    ENTRANCE_RADIUS_DIAMETERS,
};
use wakevec::case::{disk_axis, rotate2d, validate_case, Angle, CaseConfig};
use wakevec::forces::{deflector_frame_thrust, plane_momentum_flux, to_deflector_frame, total_vertical_thrust, SurfaceForce};
use wakevec::geom::Vec3;
use wakevec::io::tables;
use wakevec::io::vtk::field_vtk_bytes;
use wakevec::mesh::CellKind;

struct Report {
    results: Vec<(u32, bool)>,
}

impl Report {
    fn record(&mut self, n: u32, pass: bool, detail: String) {
        println!("criterion {n:2}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((n, pass));
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn frames(report: &mut Report) {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let trials = 1000;
    let mut worst_rot = 0.0f64;
    let mut worst_axis = 0.0f64;
    let mut worst_frame = 0.0f64;
    for _ in 0..trials {
        let a = Angle::from_degrees(rng.gen_range(-360.0..360.0));
        let v = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let back = rotate2d(-a, rotate2d(a, v));
        worst_rot = worst_rot.max((back[0] - v[0]).abs()).max((back[1] - v[1]).abs());

        let phi = Angle::from_degrees(rng.gen_range(0.0..=90.0));
        let axis = disk_axis(phi).unwrap();
        let (s, c) = (phi.radians().sin(), phi.radians().cos());
        worst_axis = worst_axis
            .max((axis.x - s).abs())
            .max((axis.y - c).abs())
            .max(axis.z.abs())
            .max((axis.norm() - 1.0).abs());

        let exit = Angle::from_degrees(rng.gen_range(0.0..60.0));
        let r = Vec3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-1.0..1.0));
        let tp = rng.gen_range(0.0..20.0);
        let force = SurfaceForce {
            pressure: r,
            ..SurfaceForce::default()
        };
        let lab = total_vertical_thrust(force, tp, phi).thrust;
        let local = deflector_frame_thrust(to_deflector_frame(r, exit), tp, phi, exit);
        worst_frame = worst_frame.max((lab - local).abs());
    }
    let elapsed = secs(start.elapsed());
    let pass = worst_rot <= 1e-12 && worst_axis <= 1e-12 && worst_frame <= 1e-12 && elapsed < 1.0;
    report.record(
        1,
        pass,
        format!(
            "{trials} trials: rotation {worst_rot:.1e}, axis {worst_axis:.1e}, frames {worst_frame:.1e} (<= 1e-12), {elapsed:.3} s"
        ),
    );
}

fn cosine_curve(step: f64) -> RecoveryCurve {
    let n = (90.0 / step).round() as usize;
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let phi = i as f64 * step;
            (phi, phi.to_radians().cos())
        })
        .collect();
    RecoveryCurve::from_ratios(&pts, "cosine").unwrap()
}

fn hover(report: &mut Report) {
    let start = Instant::now();
    let l1 = lambda_from_mass(5.0, 11.2);
    let l2 = lambda_from_mass(5.5, 11.2);
    let lambdas_ok = format!("{l1:.2}") == "0.45" && format!("{l2:.2}") == "0.49";
    let cos_phi = critical_hover_angle(&cosine_curve(1.0), 0.45).unwrap().phi_c_deg.unwrap_or(f64::NAN);
    let cos_ok = (cos_phi - 0.45f64.acos().to_degrees()).abs() <= 0.3 && (cos_phi - 63.3).abs() <= 0.3;

    // random descending curves through (83, 0.49)
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mut pts = vec![(0.0, 1.0)];
        let mut phi = 0.0;
        let mut ratio = 1.0f64;
        let before = rng.gen_range(1..6);
        for k in 1..=before {
            phi = 83.0 * k as f64 / (before + 1) as f64;
            ratio = rng.gen_range(0.495..ratio);
            pts.push((phi, ratio));
        }
        assert!(phi < 83.0);
        pts.push((83.0, 0.49));
        pts.push((rng.gen_range(83.5..=90.0), rng.gen_range(0.0..0.49)));
        let curve = RecoveryCurve::from_ratios(&pts, "anchor").unwrap();
        let phi_c = critical_hover_angle(&curve, 0.49).unwrap().phi_c_deg.unwrap_or(f64::NAN);
        worst = worst.max((phi_c - 83.0).abs());
    }
    let anchor_ok = worst <= 0.1;
    let gain = 83.0 - cos_phi;
    let elapsed = secs(start.elapsed());
    report.record(
        2,
        lambdas_ok && cos_ok && anchor_ok && (gain - 20.0).abs() <= 0.5 && elapsed < 1.0,
        format!(
            "lambda {l1:.2}/{l2:.2}, cosine phi_c {cos_phi:.2} deg, anchor error {worst:.1e} deg over 200 curves, gain {gain:.1} deg, {elapsed:.3} s"
        ),
    );
}

fn oracle(report: &mut Report) {
    let start = Instant::now();
    let zero = MomentumTheoryParams::new(0.0).unwrap();
    let one = MomentumTheoryParams::new(1.0).unwrap();
    let mut worst_cos = 0.0f64;
    let mut worst_one = 0.0f64;
    for i in 0..=90 {
        let phi = Angle::from_degrees(i as f64);
        for j in 0..=i {
            let exit = Angle::from_degrees(j as f64);
            let v = ideal_thrust_fraction(phi, exit, zero).unwrap();
            worst_cos = worst_cos.max((v - phi.radians().cos()).abs());
        }
        let v = ideal_thrust_fraction(phi, Angle::from_degrees(0.0), one).unwrap();
        worst_one = worst_one.max((v - 1.0).abs());
    }
    let eta = fit_efficiency(Angle::from_degrees(90.0), Angle::from_degrees(0.0), 0.25).unwrap();
    let elapsed = secs(start.elapsed());
    report.record(
        3,
        worst_cos == 0.0 && worst_one <= 1e-15 && (eta - 0.25).abs() <= 1e-12 && elapsed < 1.0,
        format!("eta=0 error {worst_cos:.1e}, eta=1 error {worst_one:.1e}, fitted eta {eta:.15}, {elapsed:.3} s"),
    );
}

/// What the criteria need from one solved case; fields are dropped early.
struct Run {
    converged: bool,
    elapsed: Duration,
    thrust: f64,
    tilt: f64,
    closure: f64,
    imbalance: f64,
    reaction: f64,
    solid_speed: f64,
    entrance_min: Option<f64>,
    far_wake_flux: f64,
    asymmetry: f64,
    outputs: Vec<Vec<u8>>,
}

fn output_bytes(o: &CaseOutcome) -> Vec<Vec<u8>> {
    let sol = &o.solution;
    let mut forces = Vec::new();
    tables::write_forces(&o.forces, &mut forces).unwrap();
    let mut balance = Vec::new();
    tables::write_balance(&o.balance, &mut balance).unwrap();
    let mut residuals = Vec::new();
    tables::write_residuals(&sol.report.history, &mut residuals).unwrap();
    vec![forces, balance, residuals, field_vtk_bytes(&sol.mesh, &sol.field)]
}

fn run(label: &str, tilt: f64, exit: Option<f64>, keep_outputs: bool) -> Run {
    let case = validate_case(CaseConfig::benchtop(tilt, exit)).expect("benchtop case is valid");
    let start = Instant::now();
    let o = evaluate_case(&case, |_, _| {}).expect("solver failed");
    let elapsed = start.elapsed();
    let sol = &o.solution;
    let r = o.report();
    println!(
        "  [{label}] {} in {} iterations, {:.0} s, T = {:.4} N, closure {:.3}%",
        if r.converged { "converged" } else { "NOT converged" },
        r.iterations,
        secs(elapsed),
        o.forces.thrust,
        100.0 * o.balance.closure_fraction
    );
    let solid_speed = (0..sol.mesh.n_cells())
        .filter(|&c| sol.mesh.kinds[c] == CellKind::Solid)
        .map(|c| sol.field.velocity[c].max_abs())
        .fold(0.0, f64::max);
    let entrance_min = case.deflector.as_ref().and_then(|d| {
        let radius = ENTRANCE_RADIUS_DIAMETERS * case.config.disk.diameter;
        entrance_pressure_minimum(&sol.mesh, &sol.field, &o.patch, d.inlet_lip, radius)
    });
    if case.deflector.is_some() {
        println!(
            "  [{label}] viscous/pressure force ratio {:.3}",
            o.forces.viscous.norm() / o.forces.pressure.norm()
        );
    }
    let d = case.config.disk.diameter;
    Run {
        converged: r.converged,
        elapsed,
        thrust: o.forces.thrust,
        tilt: case.tilt.radians(),
        closure: o.balance.closure_fraction,
        imbalance: r.max_cell_imbalance,
        reaction: (o.balance.solid_patch + o.forces.deflector).max_abs(),
        solid_speed,
        entrance_min,
        far_wake_flux: plane_momentum_flux(&sol.mesh, &sol.field, case.disk_center.y - 2.0 * d),
        asymmetry: mirror_asymmetry(&sol.mesh, &sol.field, 0).max(mirror_asymmetry(&sol.mesh, &sol.field, 2)),
        outputs: if keep_outputs { output_bytes(&o) } else { Vec::new() },
    }
}

fn recovery(run: &Run, base: &Run) -> f64 {
    run.thrust / base.thrust - run.tilt.cos()
}

fn main() {
    let mut report = Report { results: Vec::new() };
    frames(&mut report);
    hover(&mut report);
    oracle(&mut report);

    let tp = CaseConfig::benchtop(0.0, None).disk.thrust;
    let disk = run("disk only, phi 0", 0.0, None, true);
    let flux_err = (disk.far_wake_flux - tp).abs() / tp;
    report.record(
        4,
        disk.converged
            && disk.elapsed < Duration::from_secs(600)
            && flux_err <= 0.10
            && disk.closure <= 0.05
            && disk.asymmetry <= 1e-6,
        format!(
            "far-wake flux {:.3} N ({:.1}% off T_p), closure {:.3}%, asymmetry {:.1e}, {:.0} s",
            disk.far_wake_flux,
            100.0 * flux_err,
            100.0 * disk.closure,
            disk.asymmetry,
            secs(disk.elapsed)
        ),
    );

    let base0 = run("theta 0, phi 0", 0.0, Some(0.0), false);
    let t0_p90 = run("theta 0, phi 90", 90.0, Some(0.0), false);
    let d0_90 = recovery(&t0_p90, &base0);
    let c5_time = base0.elapsed + t0_p90.elapsed;
    report.record(
        5,
        base0.converged && t0_p90.converged && (0.10..=0.45).contains(&d0_90) && c5_time < Duration::from_secs(900),
        format!("dT/T0 = {d0_90:.4} (band [0.10, 0.45]), T0 = {:.4} N, {:.0} s", base0.thrust, secs(c5_time)),
    );

    let base10 = run("theta 10, phi 0", 0.0, Some(10.0), false);
    let t10_p90 = run("theta 10, phi 90", 90.0, Some(10.0), false);
    let d10_90 = recovery(&t10_p90, &base10);
    report.record(
        6,
        base10.converged && t10_p90.converged && d10_90 > d0_90,
        format!("dT/T0 at phi 90: theta 10 {d10_90:.4} vs theta 0 {d0_90:.4}"),
    );

    let t0_p60 = run("theta 0, phi 60", 60.0, Some(0.0), false);
    let base20 = run("theta 20, phi 0", 0.0, Some(20.0), false);
    let t20_p60 = run("theta 20, phi 60", 60.0, Some(20.0), false);
    let base40 = run("theta 40, phi 0", 0.0, Some(40.0), false);
    let t40_p60 = run("theta 40, phi 60", 60.0, Some(40.0), false);
    let (r0, r20, r40) = (
        recovery(&t0_p60, &base0),
        recovery(&t20_p60, &base20),
        recovery(&t40_p60, &base40),
    );
    let probe = [&t0_p60, &base20, &t20_p60, &base40, &t40_p60];
    report.record(
        7,
        probe.iter().all(|r| r.converged) && r20 >= r0 && r40 < r20,
        format!("dT/T0 at phi 60: theta 0 {r0:.4}, theta 20 {r20:.4}, theta 40 {r40:.4}"),
    );

    let m0 = t0_p60.entrance_min.unwrap_or(f64::NAN);
    let m20 = t20_p60.entrance_min.unwrap_or(f64::NAN);
    report.record(
        8,
        m0 < 0.0 && m20 >= 0.5 * m0,
        format!("entrance minimum gauge pressure: theta 0 {m0:.3} Pa, theta 20 {m20:.3} Pa (needs < 0 and >= 50% shallower)"),
    );

    let all = [&disk, &base0, &t0_p90, &base10, &t10_p90, &t0_p60, &base20, &t20_p60, &base40, &t40_p60];
    let eps_c = CaseConfig::benchtop(0.0, None).solver.continuity_tol;
    let imbalance = all.iter().map(|r| r.imbalance).fold(0.0, f64::max);
    let reaction = all.iter().map(|r| r.reaction).fold(0.0, f64::max);
    let slip = all.iter().map(|r| r.solid_speed).fold(0.0, f64::max);
    report.record(
        9,
        all.iter().all(|r| r.converged) && imbalance <= eps_c && reaction <= 1e-10 && slip == 0.0,
        format!(
            "{} fields: cell imbalance {imbalance:.1e} (<= {eps_c:.0e}), action-reaction {reaction:.1e}, solid speed {slip:e}",
            all.len()
        ),
    );

    let repeat = run("disk only, phi 0, repeat", 0.0, None, true);
    let identical = disk.outputs == repeat.outputs;
    let total: usize = disk.outputs.iter().map(Vec::len).sum();
    report.record(10, identical, format!("forces/balance/residual CSV and VTK, {total} bytes, identical: {identical}"));

    let passed = report.results.iter().filter(|r| r.1).count();
    println!("acceptance: {passed}/{} criteria passed", report.results.len());
    let strict = std::env::var("WAKEVEC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < report.results.len() {
        std::process::exit(1);
    }
}
