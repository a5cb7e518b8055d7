//! CSV dumps. Every float is written with 17 significant digits so that
//! parsing it back gives the same `f64`.

use std::io::Write;

use crate::ou::ModeState;
use crate::pde::{Profile1D, TriangleField};
use crate::stats::{Comparison, FieldSample};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `j, k, estimate, se, analytic, z`.
pub fn write_covariance_report<W: Write>(out: W, cmp: &Comparison) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "k", "estimate", "se", "analytic", "z"])?;
    for e in &cmp.entries {
        w.write_record([
            e.j.to_string(),
            e.k.to_string(),
            fmt_f64(e.estimate),
            fmt_f64(e.se),
            fmt_f64(e.analytic),
            fmt_f64(e.z),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `j, k, value` for a row-major `J x J` matrix.
pub fn write_covariance_matrix<W: Write>(out: W, modes: usize, values: &[f64]) -> csv::Result<()> {
    assert_eq!(values.len(), modes * modes);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "k", "value"])?;
    for j in 1..=modes {
        for k in 1..=modes {
            w.write_record([j.to_string(), k.to_string(), fmt_f64(values[(j - 1) * modes + k - 1])])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `replica, time, j, value`; `fields[time][replica]`.
pub fn write_field_samples<W: Write>(out: W, fields: &[Vec<FieldSample>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replica", "time", "j", "value"])?;
    for per_time in fields {
        for (r, s) in per_time.iter().enumerate() {
            for (j, v) in s.y.iter().enumerate() {
                w.write_record([r.to_string(), fmt_f64(s.time), (j + 1).to_string(), fmt_f64(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `x, y, value` over `0 < x < y < N`.
pub fn write_triangle<W: Write>(out: W, field: &TriangleField) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "value"])?;
    for (x, y, v) in field.iter() {
        w.write_record([x.to_string(), y.to_string(), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x, value` over `0..=N`.
pub fn write_profile<W: Write>(out: W, p: &Profile1D) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "value"])?;
    for (x, v) in p.values().iter().enumerate() {
        w.write_record([x.to_string(), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, j, value`.
pub fn write_trajectory<W: Write>(out: W, path: &[ModeState]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "j", "value"])?;
    for s in path {
        for (j, v) in s.y.iter().enumerate() {
            w.write_record([fmt_f64(s.time), (j + 1).to_string(), fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}
