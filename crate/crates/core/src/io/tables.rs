//! CSV tables: recovery curves, hover envelopes, residual histories, forces.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::io::{Read, Write};

use thiserror::Error;

use crate::analysis::{CurveRow, CurveSource, HoverEnvelope, RecoveryCurve};
use crate::forces::{BalanceReport, ForceResult};
use crate::solver::Residuals;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: bad value `{value}` in column `{column}`")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("{0}")]
    Curve(String),
}

pub const CURVE_HEADER: [&str; 5] = ["phi_deg", "T_newton", "T_over_T0", "delta_recovery", "converged"];
pub const HOVER_EXTRA: [&str; 2] = ["lambda", "excess"];
pub const RESIDUAL_HEADER: [&str; 5] = ["iter", "ru_x", "ru_y", "ru_z", "rc"];

fn f(v: f64) -> String {
    v.to_string()
}

fn curve_record(r: &CurveRow) -> Vec<String> {
    vec![
        f(r.phi_deg),
        f(r.thrust),
        f(r.t_over_t0),
        f(r.delta_recovery),
        r.converged.to_string(),
    ]
}

pub fn write_curve<W: Write>(curve: &RecoveryCurve, out: W) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for r in &curve.rows {
        w.write_record(curve_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hover<W: Write>(env: &HoverEnvelope, out: W) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER.iter().chain(HOVER_EXTRA.iter()))?;
    for (r, e) in env.curve.rows.iter().zip(&env.excess) {
        let mut rec = curve_record(r);
        rec.push(f(env.lambda));
        rec.push(f(*e));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve. Only `phi_deg` and `T_over_T0` are required; a missing
/// `T_newton` defaults to the ratio and `converged` to true. The recovery
/// column is recomputed from its definition.
pub fn read_curve<R: Read>(input: R, geometry: &str) -> Result<RecoveryCurve, TableError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let headers = rd.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name);
    let phi_i = col("phi_deg").ok_or(TableError::MissingColumn("phi_deg"))?;
    let ratio_i = col("T_over_T0").ok_or(TableError::MissingColumn("T_over_T0"))?;
    let thrust_i = col("T_newton");
    let conv_i = col("converged");
    let mut rows = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, TableError> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>().map_err(|_| TableError::BadValue {
                row: n + 1,
                column: headers.get(i).unwrap_or("").to_string(),
                value: s.to_string(),
            })
        };
        let phi = num(phi_i)?;
        let ratio = num(ratio_i)?;
        let thrust = match thrust_i {
            Some(i) => num(i)?,
            None => ratio,
        };
        let converged = match conv_i.and_then(|i| rec.get(i)) {
            None | Some("true") | Some("1") => true,
            Some("false") | Some("0") => false,
            Some(other) => {
                return Err(TableError::BadValue {
                    row: n + 1,
                    column: "converged".into(),
                    value: other.to_string(),
                })
            }
        };
        rows.push(CurveRow {
            phi_deg: phi,
            thrust,
            t_over_t0: ratio,
            delta_recovery: ratio - phi.to_radians().cos(),
            converged,
        });
    }
    let curve = RecoveryCurve {
        rows,
        exit_angle_deg: None,
        geometry: geometry.to_string(),
        source: CurveSource::ExternalFile,
    };
    curve.validate().map_err(|e| TableError::Curve(e.to_string()))?;
    Ok(curve)
}

pub fn write_residuals<W: Write>(history: &[Residuals], out: W) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESIDUAL_HEADER)?;
    for (i, r) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), f(r.ux), f(r.uy), f(r.uz), f(r.continuity)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_forces<W: Write>(forces: &ForceResult, mut out: W) -> Result<(), TableError> {
    writeln!(out, "{}", ForceResult::CSV_HEADER)?;
    writeln!(out, "{}", forces.csv_row())?;
    Ok(())
}

pub fn write_balance<W: Write>(balance: &BalanceReport, mut out: W) -> Result<(), TableError> {
    writeln!(out, "{}", BalanceReport::CSV_HEADER)?;
    for row in balance.csv_rows() {
        writeln!(out, "{row}")?;
    }
    writeln!(out, "closure_fraction,{:e},,", balance.closure_fraction)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trip_is_exact() {
        let pts = [(0.0, 1.0), (10.0, 0.1 + 0.2), (83.0, 0.49), (90.0, 1.0 / 3.0)];
        let curve = RecoveryCurve::from_ratios(&pts, "ext").unwrap();
        let mut buf = Vec::new();
        write_curve(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("phi_deg,T_newton,T_over_T0,delta_recovery,converged\n"));
        let back = read_curve(&buf[..], "ext").unwrap();
        assert_eq!(back, curve);
    }

    #[test]
    fn minimal_columns_and_errors() {
        let c = read_curve("phi_deg,T_over_T0\n0,1\n90,0.25\n".as_bytes(), "x").unwrap();
        assert_eq!(c.rows[1].thrust, 0.25);
        assert!(read_curve("phi,T\n0,1\n".as_bytes(), "x").is_err());
        assert!(read_curve("phi_deg,T_over_T0\n10,1\n5,0.5\n".as_bytes(), "x").is_err());
    }
}
