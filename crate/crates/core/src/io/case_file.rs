//! Flat `key = value` case files.
//!
//! One assignment per line, `#` starts a comment, SI units, angles in
//! degrees. Vectors are three whitespace-separated numbers. Unknown and
//! repeated keys are errors. See [`KEYS`] for the full key list.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::case::{
    ActuatorDiskSpec, CaseConfig, CaseError, DeflectorGeometry, FluidProps, FrameConvention,
    MeshSettings, Vec3Ser,
};
use crate::solver::SolverSettings;

#[derive(Debug, Error)]
pub enum CaseFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}: unknown key `{key}`", place(*.line))]
    UnknownKey { line: usize, key: String },
    #[error("{}: key `{key}` given twice", place(*.line))]
    DuplicateKey { line: usize, key: String },
    #[error("{}: bad value for `{key}`: {message}", place(*.line))]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing required key `{0}`")]
    MissingRequiredKey(&'static str),
    #[error(transparent)]
    Invalid(#[from] CaseError),
}

fn place(line: usize) -> String {
    if line == 0 {
        "override".to_string()
    } else {
        format!("line {line}")
    }
}

/// `(key, description)` for every accepted key.
pub const KEYS: &[(&str, &str)] = &[
    ("disk_diameter", "actuator disk diameter D (m), required"),
    ("disk_thrust", "total disk thrust T_p (N), required"),
    ("tilt_deg", "disk tilt phi from vertical (deg), required"),
    ("domain_edge", "cubic domain edge L (m), required"),
    ("disk_zone_height", "axial height of the source zone (m), default 0.01"),
    ("disk_center", "disk center x y z (m), default domain center"),
    ("density", "fluid density (kg/m^3), default 1.225"),
    ("viscosity", "dynamic viscosity (Pa s), default 1.802e-5"),
    ("eddy_viscosity", "constant eddy viscosity (m^2/s) or `auto` for 0.02 v_disk D"),
    ("deflector", "`scoop` or `none`; any other deflector key implies `scoop`"),
    ("exit_angle_deg", "deflector exit angle theta from vertical (deg), default 0"),
    ("deflector_width", "span W (m), default 1.2 D"),
    ("arc_radius", "arc radius (m), default 0.6 D"),
    ("inlet_angle_deg", "inlet tangent below horizontal (deg), default 20"),
    ("cross_curvature", "transverse bow curvature (1/m), default 0"),
    ("deflector_thickness", "solid thickness (m) or `auto` for two refined cells"),
    ("mount_offset", "arc center of curvature relative to the disk center x y z (m)"),
    ("require_full_capture", "reject scoops whose capture area is below the disk area"),
    ("base_cells", "base cells per edge, default 48"),
    ("disk_refine_level", "halving levels around the disk, default 1"),
    ("deflector_refine_level", "halving levels around the deflector, default 1"),
    ("refine_margin", "refinement box margin in diameters, default 0.25"),
    ("relax_u", "momentum under-relaxation, default 0.7"),
    ("relax_p", "pressure under-relaxation, default 0.3"),
    ("max_iterations", "outer iteration cap, default 2000"),
    ("residual_tol", "normalized residual target, default 1e-4"),
    ("continuity_tol", "per-cell continuity bound, default 1e-6"),
    ("inner_reduction", "linear-solve residual reduction, default 1e-2"),
    ("inner_max_iterations", "linear-solve iteration cap, default 500"),
    ("convection_blend", "central-difference blend in [0, 1], default 0"),
];

const REQUIRED: [&str; 4] = ["disk_diameter", "disk_thrust", "tilt_deg", "domain_edge"];

const DEFLECTOR_KEYS: [&str; 8] = [
    "exit_angle_deg",
    "deflector_width",
    "arc_radius",
    "inlet_angle_deg",
    "cross_curvature",
    "deflector_thickness",
    "mount_offset",
    "require_full_capture",
];

/// Raw assignments with their line numbers (0 for overrides).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignments {
    entries: BTreeMap<String, (usize, String)>,
}

impl Assignments {
    pub fn parse(text: &str) -> Result<Self, CaseFileError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = split_assignment(content).ok_or_else(|| CaseFileError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            check_known(key, line)?;
            if entries.contains_key(key) {
                return Err(CaseFileError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            entries.insert(key.to_string(), (line, value.to_string()));
        }
        Ok(Assignments { entries })
    }

    /// Applies a `key=value` override, replacing any file value.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CaseFileError> {
        let (key, value) = split_assignment(spec.trim()).ok_or_else(|| CaseFileError::Syntax {
            line: 0,
            message: format!("override `{spec}` is not `key=value`"),
        })?;
        check_known(key, 0)?;
        self.entries.insert(key.to_string(), (0, value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn number(&self, key: &str) -> Result<Option<f64>, CaseFileError> {
        self.get(key)
            .map(|(line, v)| {
                v.parse::<f64>().map_err(|_| invalid(line, key, "expected a number"))
            })
            .transpose()
    }

    fn number_or_auto(&self, key: &str) -> Result<Option<f64>, CaseFileError> {
        match self.get(key) {
            Some((_, "auto")) | None => Ok(None),
            Some(_) => self.number(key),
        }
    }

    fn integer(&self, key: &str) -> Result<Option<u64>, CaseFileError> {
        self.get(key)
            .map(|(line, v)| {
                v.parse::<u64>()
                    .map_err(|_| invalid(line, key, "expected a non-negative integer"))
            })
            .transpose()
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, CaseFileError> {
        self.get(key)
            .map(|(line, v)| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(invalid(line, key, "expected true or false")),
            })
            .transpose()
    }

    fn vector(&self, key: &str) -> Result<Option<Vec3Ser>, CaseFileError> {
        self.get(key)
            .map(|(line, v)| {
                let parts: Vec<f64> = v
                    .split_whitespace()
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| invalid(line, key, "expected three numbers"))?;
                match parts[..] {
                    [x, y, z] => Ok(Vec3Ser([x, y, z])),
                    _ => Err(invalid(line, key, "expected three numbers")),
                }
            })
            .transpose()
    }

    fn required(&self, key: &'static str) -> Result<f64, CaseFileError> {
        self.number(key)?.ok_or(CaseFileError::MissingRequiredKey(key))
    }

    /// Builds the configuration; physical validation happens separately.
    pub fn to_config(&self) -> Result<CaseConfig, CaseFileError> {
        for key in REQUIRED {
            if self.get(key).is_none() {
                return Err(CaseFileError::MissingRequiredKey(key));
            }
        }
        let d = self.required("disk_diameter")?;
        let disk = ActuatorDiskSpec {
            diameter: d,
            zone_height: self.number("disk_zone_height")?.unwrap_or(0.01),
            center: self.vector("disk_center")?,
            tilt_deg: self.required("tilt_deg")?,
            thrust: self.required("disk_thrust")?,
        };
        let air = FluidProps::air();
        let fluid = FluidProps {
            density: self.number("density")?.unwrap_or(air.density),
            viscosity: self.number("viscosity")?.unwrap_or(air.viscosity),
            eddy_viscosity: self.number_or_auto("eddy_viscosity")?,
        };
        let wants_deflector = match self.get("deflector") {
            Some((_, "scoop")) => true,
            Some((line, "none")) => {
                if let Some(k) = DEFLECTOR_KEYS.iter().find(|k| self.get(k).is_some()) {
                    return Err(invalid(line, "deflector", &format!("`none` conflicts with `{k}`")));
                }
                false
            }
            Some((line, _)) => return Err(invalid(line, "deflector", "expected `scoop` or `none`")),
            None => DEFLECTOR_KEYS.iter().any(|k| self.get(k).is_some()),
        };
        let deflector = if wants_deflector {
            let exit = self.number("exit_angle_deg")?.unwrap_or(0.0);
            let base = DeflectorGeometry::benchtop(d, exit);
            Some(DeflectorGeometry {
                width: self.number("deflector_width")?.unwrap_or(base.width),
                arc_radius: self.number("arc_radius")?.unwrap_or(base.arc_radius),
                inlet_angle_deg: self.number("inlet_angle_deg")?.unwrap_or(base.inlet_angle_deg),
                exit_angle_deg: exit,
                cross_curvature: self.number("cross_curvature")?.unwrap_or(base.cross_curvature),
                thickness: self.number_or_auto("deflector_thickness")?,
                mount_offset: self.vector("mount_offset")?.unwrap_or(base.mount_offset),
                require_full_capture: self.boolean("require_full_capture")?.unwrap_or(false),
            })
        } else {
            None
        };
        let md = MeshSettings::default();
        let level = |key: &str, default: u8| -> Result<u8, CaseFileError> {
            match self.integer(key)? {
                None => Ok(default),
                Some(v) => u8::try_from(v)
                    .ok()
                    .filter(|&l| l <= 6)
                    .ok_or_else(|| invalid(self.get(key).map_or(0, |g| g.0), key, "at most 6")),
            }
        };
        let mesh = MeshSettings {
            base_cells: self.integer("base_cells")?.map_or(md.base_cells, |v| v as usize),
            disk_refine_level: level("disk_refine_level", md.disk_refine_level)?,
            deflector_refine_level: level("deflector_refine_level", md.deflector_refine_level)?,
            refine_margin: self.number("refine_margin")?.unwrap_or(md.refine_margin),
        };
        let sd = SolverSettings::default();
        let solver = SolverSettings {
            relax_u: self.number("relax_u")?.unwrap_or(sd.relax_u),
            relax_p: self.number("relax_p")?.unwrap_or(sd.relax_p),
            max_iterations: self.integer("max_iterations")?.map_or(sd.max_iterations, |v| v as usize),
            residual_tol: self.number("residual_tol")?.unwrap_or(sd.residual_tol),
            continuity_tol: self.number("continuity_tol")?.unwrap_or(sd.continuity_tol),
            inner_reduction: self.number("inner_reduction")?.unwrap_or(sd.inner_reduction),
            inner_max_iterations: self
                .integer("inner_max_iterations")?
                .map_or(sd.inner_max_iterations, |v| v as usize),
            convection_blend: self.number("convection_blend")?.unwrap_or(sd.convection_blend),
        };
        Ok(CaseConfig {
            frame: FrameConvention::default(),
            disk,
            deflector,
            fluid,
            domain_edge: self.required("domain_edge")?,
            mesh,
            solver,
        })
    }
}

fn split_assignment(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() || k.contains(char::is_whitespace) {
        return None;
    }
    Some((k, v))
}

fn check_known(key: &str, line: usize) -> Result<(), CaseFileError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CaseFileError::UnknownKey {
            line,
            key: key.to_string(),
        })
    }
}

fn invalid(line: usize, key: &str, message: &str) -> CaseFileError {
    CaseFileError::InvalidValue {
        line,
        key: key.to_string(),
        message: message.to_string(),
    }
}

pub fn parse_case_str(text: &str) -> Result<CaseConfig, CaseFileError> {
    Assignments::parse(text)?.to_config()
}

pub fn parse_case_file(path: &Path) -> Result<CaseConfig, CaseFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| CaseFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case_str(&text)
}

/// Parses `path` and then applies `key=value` overrides in order.
pub fn parse_case_file_with(path: &Path, overrides: &[String]) -> Result<CaseConfig, CaseFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| CaseFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut a = Assignments::parse(&text)?;
    for o in overrides {
        a.apply_override(o)?;
    }
    a.to_config()
}

fn vec3(v: Vec3Ser) -> String {
    format!("{} {} {}", v.0[0], v.0[1], v.0[2])
}

/// Writes every key explicitly; parsing the output reproduces `cfg` exactly.
pub fn serialize_case(cfg: &CaseConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("disk_diameter", cfg.disk.diameter.to_string());
    kv("disk_thrust", cfg.disk.thrust.to_string());
    kv("tilt_deg", cfg.disk.tilt_deg.to_string());
    kv("domain_edge", cfg.domain_edge.to_string());
    kv("disk_zone_height", cfg.disk.zone_height.to_string());
    if let Some(c) = cfg.disk.center {
        kv("disk_center", vec3(c));
    }
    kv("density", cfg.fluid.density.to_string());
    kv("viscosity", cfg.fluid.viscosity.to_string());
    kv(
        "eddy_viscosity",
        cfg.fluid.eddy_viscosity.map_or("auto".into(), |v| v.to_string()),
    );
    match &cfg.deflector {
        None => kv("deflector", "none".into()),
        Some(g) => {
            kv("deflector", "scoop".into());
            kv("exit_angle_deg", g.exit_angle_deg.to_string());
            kv("deflector_width", g.width.to_string());
            kv("arc_radius", g.arc_radius.to_string());
            kv("inlet_angle_deg", g.inlet_angle_deg.to_string());
            kv("cross_curvature", g.cross_curvature.to_string());
            kv(
                "deflector_thickness",
                g.thickness.map_or("auto".into(), |v| v.to_string()),
            );
            kv("mount_offset", vec3(g.mount_offset));
            kv("require_full_capture", g.require_full_capture.to_string());
        }
    }
    kv("base_cells", cfg.mesh.base_cells.to_string());
    kv("disk_refine_level", cfg.mesh.disk_refine_level.to_string());
    kv("deflector_refine_level", cfg.mesh.deflector_refine_level.to_string());
    kv("refine_margin", cfg.mesh.refine_margin.to_string());
    let so = &cfg.solver;
    kv("relax_u", so.relax_u.to_string());
    kv("relax_p", so.relax_p.to_string());
    kv("max_iterations", so.max_iterations.to_string());
    kv("residual_tol", so.residual_tol.to_string());
    kv("continuity_tol", so.continuity_tol.to_string());
    kv("inner_reduction", so.inner_reduction.to_string());
    kv("inner_max_iterations", so.inner_max_iterations.to_string());
    kv("convection_blend", so.convection_blend.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# disk only
disk_diameter = 0.228
disk_thrust = 12   # N
tilt_deg = 0
domain_edge = 2
density = 1.225
viscosity = 1.802e-5
base_cells = 48
";

    #[test]
    fn minimal_disk_only() {
        let cfg = parse_case_str(MINIMAL).unwrap();
        assert!(cfg.deflector.is_none());
        assert_eq!(cfg.disk.thrust, 12.0);
        assert_eq!(cfg.mesh.base_cells, 48);
    }

    #[test]
    fn exit_angle_creates_deflector() {
        let cfg = parse_case_str(&format!("{MINIMAL}exit_angle_deg = 10\n")).unwrap();
        assert_eq!(cfg.deflector.unwrap().exit_angle_deg, 10.0);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_case_str(&format!("{MINIMAL}exitangle = 10\n")).unwrap_err();
        match err {
            CaseFileError::UnknownKey { line, key } => {
                assert_eq!(line, 9);
                assert_eq!(key, "exitangle");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_and_malformed() {
        assert!(matches!(
            parse_case_str("disk_diameter = 1\n"),
            Err(CaseFileError::MissingRequiredKey(_))
        ));
        assert!(matches!(
            parse_case_str("disk_diameter 1\n"),
            Err(CaseFileError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_case_str(&format!("{MINIMAL}tilt_deg = 3\n")),
            Err(CaseFileError::DuplicateKey { line: 9, .. })
        ));
        assert!(matches!(
            parse_case_str(&format!("{MINIMAL}relax_u = fast\n")),
            Err(CaseFileError::InvalidValue { .. })
        ));
    }

    #[test]
    fn serialize_round_trip() {
        let mut cfg = CaseConfig::benchtop(37.5, Some(12.25));
        cfg.disk.center = Some(Vec3Ser([1.0, 1.0 + 1.0 / 3.0, 0.999]));
        cfg.fluid.eddy_viscosity = Some(0.1 / 3.0);
        let back = parse_case_str(&serialize_case(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }
}
