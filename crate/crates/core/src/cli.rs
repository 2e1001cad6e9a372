//! Command-line front end.
//!
//! Exit codes: 0 success, 2 parse or configuration error, 3 solver or I/O
//! failure, 4 a mandatory row did not converge.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::analysis::{self, AnalysisError, CaseOutcome, MomentumTheoryParams, RecoveryCurve};
use crate::case::{validate_case, Angle, CaseConfig, CaseError};
use crate::io::case_file::{self, CaseFileError};
use crate::io::manifest::{unix_now, OutputDir, RowSummary, RunManifest};
use crate::io::tables;
use crate::io::vtk;
use crate::mesh;
use crate::par;
use crate::solver::SolverError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "wakevec", version, about = "Actuator-disk wake vectoring solver")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "WAKEVEC_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    /// Case file.
    pub case: PathBuf,
    /// Override a case-file key (repeatable), e.g. `--set tilt_deg=60`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Solve one case; writes field.vtk, forces.csv, balance.csv, residuals.csv.
    Solve {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Tilt sweep; writes curve.csv and one directory per tilt.
    Sweep {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        /// Tilt angles: `start:stop:step` or a comma list (deg).
        #[arg(long, default_value = "0:90:10")]
        phi: String,
        /// Deflector exit angle (deg); default from the case file.
        #[arg(long)]
        exit_angle: Option<f64>,
    },
    /// Hover envelope from a curve CSV (or a fresh sweep of CASE).
    Hover {
        /// Recovery curve CSV.
        #[arg(long, conflicts_with = "case")]
        curve: Option<PathBuf>,
        /// Case file to sweep instead of reading a curve.
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "0:90:10")]
        phi: String,
        /// Reciprocal thrust-to-weight ratio.
        #[arg(long, required_unless_present = "mass")]
        lambda: Option<f64>,
        /// Vehicle mass (kg); with --max-thrust gives lambda.
        #[arg(long, requires = "max_thrust")]
        mass: Option<f64>,
        /// Maximum thrust (kgf).
        #[arg(long)]
        max_thrust: Option<f64>,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Evaluate the control-volume momentum model on a grid.
    Oracle {
        /// Capture-turning efficiency in [0, 1].
        #[arg(long)]
        eta: f64,
        /// Exit angles (deg), `start:stop:step` or comma list.
        #[arg(long, default_value = "0")]
        exit: String,
        #[arg(long, default_value = "0:90:10")]
        phi: String,
    },
    /// Solve and print the force decomposition and momentum budget.
    Forces {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print mesh statistics for a case.
    MeshInfo {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Run the built-in property checks.
    Check,
}

/// Error with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn solver(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_SOLVER,
            message: e.to_string(),
        }
    }
}

impl From<CaseFileError> for Failure {
    fn from(e: CaseFileError) -> Self {
        Failure::config(e)
    }
}

impl From<CaseError> for Failure {
    fn from(e: CaseError) -> Self {
        Failure::config(e)
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Mesh(_) => Failure::config(e),
            _ => Failure::solver(e),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solver {
                source: SolverError::Mesh(_),
                ..
            } => Failure::config(e),
            AnalysisError::Solver { .. } => Failure::solver(e),
            _ => Failure::config(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::solver(e)
    }
}

impl From<tables::TableError> for Failure {
    fn from(e: tables::TableError) -> Self {
        Failure::config(e)
    }
}

/// Parses `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_angle_list(s: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("bad angle list `{s}`");
    if s.contains(':') {
        let p: Vec<f64> = s
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [a, b, step] = p[..] else { return Err(bad()) };
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + i as f64 * step).collect())
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

fn load_case(args: &CaseArgs) -> Result<CaseConfig, Failure> {
    Ok(case_file::parse_case_file_with(&args.case, &args.overrides)?)
}

fn manifest(verb: &str, cfg: Option<&CaseConfig>, started: u64) -> RunManifest {
    RunManifest {
        tool: "wakevec".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        verb: verb.into(),
        threads: par::current_threads(),
        started_unix: started,
        finished_unix: 0,
        config: cfg.map(case_file::serialize_case),
        rows: Vec::new(),
        files: Vec::new(),
    }
}

fn row_summary(o: &CaseOutcome) -> RowSummary {
    let r = o.report();
    RowSummary {
        phi_deg: o.case.config.disk.tilt_deg,
        exit_angle_deg: o.case.config.deflector.as_ref().map(|d| d.exit_angle_deg),
        converged: r.converged,
        iterations: r.iterations,
        final_residual: r.history.last().map_or(0.0, |h| h.max()),
        max_cell_imbalance: r.max_cell_imbalance,
    }
}

/// Writes the per-case files of `o` under `prefix`.
fn write_case_files(out: &mut OutputDir, prefix: &str, o: &CaseOutcome) -> Result<(), Failure> {
    let sol = &o.solution;
    out.write(&format!("{prefix}field.vtk"), &vtk::field_vtk_bytes(&sol.mesh, &sol.field))?;
    let mut buf = Vec::new();
    tables::write_forces(&o.forces, &mut buf)?;
    out.write(&format!("{prefix}forces.csv"), &buf)?;
    buf.clear();
    tables::write_balance(&o.balance, &mut buf)?;
    out.write(&format!("{prefix}balance.csv"), &buf)?;
    buf.clear();
    tables::write_residuals(&sol.report.history, &mut buf)?;
    out.write(&format!("{prefix}residuals.csv"), &buf)?;
    Ok(())
}

fn progress(it: usize, r: &crate::solver::Residuals) {
    if it % 100 == 0 {
        eprintln!(
            "iter {it:5}  ru=({:.2e}, {:.2e}, {:.2e})  rc={:.2e}",
            r.ux, r.uy, r.uz, r.continuity
        );
    }
}

fn cmd_solve(args: &CaseArgs, output: &Path) -> Result<i32, Failure> {
    let started = unix_now();
    let cfg = load_case(args)?;
    let case = validate_case(cfg.clone())?;
    let mut out = OutputDir::create(output)?;
    let outcome = match analysis::evaluate_case(&case, progress) {
        Ok(o) => o,
        Err(e) => {
            out.discard_outputs();
            out.finish(manifest("solve", Some(&cfg), started))?;
            return Err(e.into());
        }
    };
    write_case_files(&mut out, "", &outcome)?;
    let mut m = manifest("solve", Some(&cfg), started);
    m.rows.push(row_summary(&outcome));
    out.finish(m)?;
    println!("{}", outcome.forces);
    let r = outcome.report();
    println!(
        "converged {} after {} iterations ({:.1} s)",
        r.converged,
        r.iterations,
        r.wall_time.as_secs_f64()
    );
    Ok(if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_sweep(
    cfg: &CaseConfig,
    phis: &[f64],
    exit: Option<f64>,
    out: &mut OutputDir,
    m: &mut RunManifest,
) -> Result<RecoveryCurve, Failure> {
    let sweep = match analysis::sweep_recovery(cfg, phis, exit) {
        Ok(s) => s,
        Err(e) => {
            out.discard_outputs();
            out.finish(m.clone())?;
            return Err(e.into());
        }
    };
    for o in &sweep.rows {
        let phi = o.case.config.disk.tilt_deg;
        let dir = format!("phi_{phi:06.2}/");
        write_case_files(out, &dir, o)?;
        let mut rm = manifest("sweep-row", Some(&o.case.config), m.started_unix);
        rm.rows.push(row_summary(o));
        rm.files = out
            .files()
            .iter()
            .filter(|f| f.path.starts_with(&dir))
            .map(|f| crate::io::manifest::FileEntry {
                path: f.path[dir.len()..].to_string(),
                ..f.clone()
            })
            .collect();
        rm.finished_unix = unix_now();
        let json = serde_json::to_vec_pretty(&rm).map_err(Failure::solver)?;
        std::fs::write(out.path(&format!("{dir}manifest.json")), json)?;
        m.rows.push(row_summary(o));
    }
    let mut buf = Vec::new();
    tables::write_curve(&sweep.curve, &mut buf)?;
    out.write("curve.csv", &buf)?;
    Ok(sweep.curve)
}

fn cmd_sweep(args: &CaseArgs, output: &Path, phi: &str, exit: Option<f64>) -> Result<i32, Failure> {
    let started = unix_now();
    let cfg = load_case(args)?;
    let phis = parse_angle_list(phi).map_err(Failure::config)?;
    let mut out = OutputDir::create(output)?;
    let mut m = manifest("sweep", Some(&cfg), started);
    let curve = run_sweep(&cfg, &phis, exit, &mut out, &mut m)?;
    out.finish(m)?;
    for r in &curve.rows {
        println!(
            "phi = {:5.1} deg  T = {:9.5} N  T/T0 = {:.5}  dT/T0 = {:+.5}{}",
            r.phi_deg,
            r.thrust,
            r.t_over_t0,
            r.delta_recovery,
            if r.converged { "" } else { "  (not converged)" }
        );
    }
    Ok(if curve.all_converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[allow(clippy::too_many_arguments)]
fn cmd_hover(
    curve_path: Option<&Path>,
    case: Option<&Path>,
    overrides: &[String],
    phi: &str,
    lambda: Option<f64>,
    mass: Option<f64>,
    max_thrust: Option<f64>,
    output: &Path,
) -> Result<i32, Failure> {
    let started = unix_now();
    let lambda = match (lambda, mass, max_thrust) {
        (Some(l), _, _) => l,
        (None, Some(m), Some(t)) => analysis::lambda_from_mass(m, t),
        _ => return Err(Failure::config("give --lambda or --mass with --max-thrust")),
    };
    let mut out = OutputDir::create(output)?;
    let mut m = manifest("hover", None, started);
    let curve = match (curve_path, case) {
        (Some(p), _) => {
            let f = std::fs::File::open(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            tables::read_curve(f, &p.display().to_string())?
        }
        (None, Some(c)) => {
            let cfg = case_file::parse_case_file_with(c, overrides)?;
            m.config = Some(case_file::serialize_case(&cfg));
            let phis = parse_angle_list(phi).map_err(Failure::config)?;
            run_sweep(&cfg, &phis, None, &mut out, &mut m)?
        }
        (None, None) => return Err(Failure::config("give --curve or --case")),
    };
    let converged = curve.all_converged();
    let env = analysis::hover_envelope(curve, lambda)?;
    let mut buf = Vec::new();
    tables::write_hover(&env, &mut buf)?;
    out.write("hover.csv", &buf)?;
    out.finish(m)?;
    println!("lambda = {:.2}", env.lambda);
    match env.critical.phi_c_deg {
        Some(p) => println!("phi_c = {p:.1} deg"),
        None if env.critical.takeoff_infeasible => println!("phi_c = none (takeoff infeasible)"),
        None => println!("phi_c = none"),
    }
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_oracle(eta: f64, exit: &str, phi: &str) -> Result<i32, Failure> {
    let params = MomentumTheoryParams::new(eta)?;
    let exits = parse_angle_list(exit).map_err(Failure::config)?;
    let phis = parse_angle_list(phi).map_err(Failure::config)?;
    println!("phi_deg,theta_deg,eta,T_over_Tp");
    for &t in &exits {
        for &p in &phis {
            match analysis::ideal_thrust_fraction(Angle::from_degrees(p), Angle::from_degrees(t), params) {
                Ok(v) => println!("{p},{t},{eta},{v}"),
                Err(AnalysisError::ExitExceedsTilt { .. }) => println!("{p},{t},{eta},"),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_forces(args: &CaseArgs, output: Option<&Path>) -> Result<i32, Failure> {
    let started = unix_now();
    let cfg = load_case(args)?;
    let case = validate_case(cfg.clone())?;
    let o = analysis::evaluate_case(&case, progress)?;
    println!("{}", o.forces);
    println!("{}", o.balance);
    println!("{}", crate::forces::ForceResult::CSV_HEADER);
    println!("{}", o.forces.csv_row());
    if let Some(dir) = output {
        let mut out = OutputDir::create(dir)?;
        write_case_files(&mut out, "", &o)?;
        let mut m = manifest("forces", Some(&cfg), started);
        m.rows.push(row_summary(&o));
        out.finish(m)?;
    }
    Ok(if o.report().converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_mesh_info(args: &CaseArgs) -> Result<i32, Failure> {
    let case = validate_case(load_case(args)?)?;
    let mesh = mesh::mesh_for_case(&case).map_err(Failure::config)?;
    println!("{}", mesh.stats());
    Ok(EXIT_OK)
}

/// Built-in property checks; returns `(name, passed)` per check.
pub fn property_checks() -> Vec<(&'static str, bool)> {
    use crate::case::{disk_axis, rotate2d};
    use crate::forces::{deflector_frame_thrust, to_deflector_frame, total_vertical_thrust, SurfaceForce};
    use crate::geom::Vec3;
    let mut checks = Vec::new();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut next = move || rng.gen::<f64>();
    let mut round_trip = true;
    let mut frames = true;
    for _ in 0..1000 {
        let th = Angle::from_degrees(360.0 * next() - 180.0);
        let v = [4.0 * next() - 2.0, 4.0 * next() - 2.0];
        let w = rotate2d(-th, rotate2d(th, v));
        round_trip &= (w[0] - v[0]).abs() <= 1e-12 && (w[1] - v[1]).abs() <= 1e-12;
        let phi = Angle::from_degrees(90.0 * next());
        let exit = Angle::from_degrees(60.0 * next());
        let r = Vec3::new(20.0 * next() - 10.0, 20.0 * next() - 10.0, next() - 0.5);
        let lab = total_vertical_thrust(
            SurfaceForce {
                pressure: r,
                ..SurfaceForce::default()
            },
            12.0,
            phi,
        );
        let local = deflector_frame_thrust(to_deflector_frame(r, exit), 12.0, phi, exit);
        frames &= (local - lab.thrust).abs() <= 1e-12;
    }
    checks.push(("rotation round trip", round_trip));
    checks.push(("lab/deflector frame thrust", frames));
    let axis_ok = [0.0, 60.0, 90.0].iter().all(|&d| {
        let a = disk_axis(Angle::from_degrees(d)).unwrap();
        (a.norm() - 1.0).abs() < 1e-15 && a.y == d.to_radians().cos()
    });
    checks.push(("disk axis", axis_ok));
    let cos_pts: Vec<(f64, f64)> = (0..10).map(|i| (10.0 * i as f64, (10.0 * i as f64).to_radians().cos())).collect();
    let cos_curve = RecoveryCurve::from_ratios(&cos_pts, "cos").unwrap();
    let phi_c = analysis::critical_hover_angle(&cos_curve, 0.45).ok().and_then(|c| c.phi_c_deg);
    checks.push(("cosine hover angle", phi_c.is_some_and(|p| (p - 63.26).abs() <= 0.3)));
    let anchor = RecoveryCurve::from_ratios(&[(0.0, 1.0), (70.0, 0.6), (83.0, 0.49), (90.0, 0.4)], "a").unwrap();
    let phi_c = analysis::critical_hover_angle(&anchor, 0.49).ok().and_then(|c| c.phi_c_deg);
    checks.push(("anchor hover angle", phi_c.is_some_and(|p| (p - 83.0).abs() <= 0.1)));
    let eta = analysis::fit_efficiency(Angle::from_degrees(90.0), Angle::from_degrees(0.0), 0.25);
    checks.push(("oracle fit", eta.is_ok_and(|e| (e - 0.25).abs() <= 1e-12)));
    checks
}

fn cmd_check() -> Result<i32, Failure> {
    let checks = property_checks();
    let mut ok = true;
    for (name, pass) in &checks {
        println!("{} {name}", if *pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    Ok(if ok { EXIT_OK } else { EXIT_SOLVER })
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    match &cli.verb {
        Verb::Solve { case, output } => cmd_solve(case, output),
        Verb::Sweep {
            case,
            output,
            phi,
            exit_angle,
        } => cmd_sweep(case, output, phi, *exit_angle),
        Verb::Hover {
            curve,
            case,
            overrides,
            phi,
            lambda,
            mass,
            max_thrust,
            output,
        } => cmd_hover(
            curve.as_deref(),
            case.as_deref(),
            overrides,
            phi,
            *lambda,
            *mass,
            *max_thrust,
            output,
        ),
        Verb::Oracle { eta, exit, phi } => cmd_oracle(*eta, exit, phi),
        Verb::Forces { case, output } => cmd_forces(case, output.as_deref()),
        Verb::MeshInfo { case } => cmd_mesh_info(case),
        Verb::Check => cmd_check(),
    }
}

/// Runs a parsed invocation on a pool of the requested size.
pub fn run(cli: Cli) -> i32 {
    let threads = cli.threads.unwrap_or(0);
    let job = || match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    if threads > 0 {
        par::with_threads(threads, job)
    } else {
        job()
    }
}
