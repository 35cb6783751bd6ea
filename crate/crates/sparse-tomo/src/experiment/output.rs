use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::sweep::{best_window, ScalingFit, SweepRecord};
use crate::error::{Error, Result};
use crate::image::Image;

/// `records.csv`: a header line and one record per row.
pub fn write_records(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-cell wall times, kept apart from the deterministic records.
pub fn write_timings(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "beta,m,seed,wall_time")?;
    for r in records {
        writeln!(out, "{},{},{},{:.3}", r.beta, r.m, r.seed, r.wall_time)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    use crate::solver::SolveStatus;
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("records lack column {name}")))
    };
    let cols = [
        "beta", "m", "j0", "s", "seed", "err_l2", "err_img", "err_rel", "residual", "eta", "status", "iterations",
    ]
    .map(col);
    let mut idx = [0usize; 12];
    for (slot, c) in idx.iter_mut().zip(cols) {
        *slot = c?;
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let f = |k: usize| -> Result<f64> { row[idx[k]].parse().map_err(|_| Error::Parse(format!("bad number {:?}", &row[idx[k]]))) };
        let u = |k: usize| -> Result<u64> { row[idx[k]].parse().map_err(|_| Error::Parse(format!("bad integer {:?}", &row[idx[k]]))) };
        let status = match &row[idx[10]] {
            "optimal" => SolveStatus::Optimal,
            "max_iters" => SolveStatus::MaxIters,
            "infeasible" => SolveStatus::Infeasible,
            other => return Err(Error::Parse(format!("unknown status {other:?}"))),
        };
        out.push(SweepRecord {
            beta: f(0)?,
            m: u(1)? as usize,
            j0: u(2)? as u32,
            s: u(3)? as usize,
            seed: u(4)?,
            err_l2: f(5)?,
            err_img: f(6)?,
            err_rel: f(7)?,
            residual: f(8)?,
            eta: f(9)?,
            status,
            iterations: u(11)? as usize,
            wall_time: 0.0,
        });
    }
    Ok(out)
}

/// `fit.txt`: the full fit, its points and the widest window with `r² ≥ 0.9`.
pub fn write_fit(path: &Path, fit: &ScalingFit) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let axis = match fit.axis {
        super::sweep::FitAxis::Beta => "beta",
        super::sweep::FitAxis::M => "m",
    };
    writeln!(out, "axis = {axis}")?;
    writeln!(out, "exponent = {:.6}", fit.exponent)?;
    writeln!(out, "intercept = {:.6}", fit.intercept)?;
    writeln!(out, "r_squared = {:.6}", fit.r_squared)?;
    for (v, e) in &fit.points {
        writeln!(out, "point = {v:e} {e:e}")?;
    }
    match best_window(fit, 0.9) {
        Some(w) => {
            let (lo, hi) = (w.points[0].0, w.points[w.points.len() - 1].0);
            writeln!(out, "window = {lo:e} {hi:e}")?;
            writeln!(out, "window_exponent = {:.6}", w.exponent)?;
            writeln!(out, "window_r_squared = {:.6}", w.r_squared)?;
        }
        None => writeln!(out, "window = none")?,
    }
    out.flush()?;
    Ok(())
}

/// 8-bit binary PGM scaled from the image's minimum to its maximum; row 0 is the top (largest `x₂`).
pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    let n = img.grid.n;
    let (lo, hi) = img.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{n} {n}\n255\n")?;
    for row in (0..n).rev() {
        let bytes: Vec<u8> = (0..n).map(|c| ((img.at(c, row) - lo) / range * 255.0).round() as u8).collect();
        out.write_all(&bytes)?;
    }
    out.flush()?;
    Ok(())
}

/// Little-endian `f64` values in storage order.
pub fn write_f64(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// One row per sample: the parameter followed by the measurement vector.
pub fn write_sinogram(path: &Path, samples: &[f64], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (t, row) in samples.iter().zip(rows) {
        write!(out, "{t:e}")?;
        for v in row {
            write!(out, ",{v:e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
