use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use super::config::{exact_rule, ExperimentConfig, PhantomSpec, SampleRule};
use super::phantom::{Phantom, Setup};
use crate::error::{Error, Result};
use crate::forward::{assemble_normal_form, draw_samples, q_weights};
use crate::solver::{solve_normal_form, SolveResult, SolveStatus};
use crate::stats::{linear_fit, LinearFit};

/// Relative ℓ² error counted as exact recovery.
pub const EXACT_TOLERANCE: f64 = 1e-5;

/// Share of seeds that must recover exactly during calibration.
pub const CALIBRATION_SUCCESS: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub m: usize,
    pub j0: u32,
    /// Nonzeros of `x†` inside `Λ_{j0}`.
    pub s: usize,
    pub seed: u64,
    /// `‖x† − ι_Λx̂‖₂` over the whole dictionary.
    pub err_l2: f64,
    /// `‖u† − Φ*ι_Λx̂‖_{L²}` on the atlas grid; equal to `err_l2` without an image dictionary.
    pub err_img: f64,
    /// `err_l2 / ‖x†‖₂`.
    pub err_rel: f64,
    pub residual: f64,
    pub eta: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Seconds; excluded from `records.csv` so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
}

/// One `(β, m, seed)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub beta: f64,
    pub m: usize,
    pub j0: u32,
    pub seed: u64,
}

/// The cells of a sweep in output order: noise levels, then sample counts, then seeds.
pub fn sweep_cells(cfg: &ExperimentConfig, setup: &Setup, phantom: &Phantom) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &beta in &cfg.betas {
        let j0 = cfg.j0_for(beta);
        let s = window_nonzeros(phantom, setup.window_len(j0));
        for m in cfg.sample_counts(beta, j0, s) {
            for &seed in &cfg.seeds {
                cells.push(Cell { beta, m, j0, seed });
            }
        }
    }
    cells
}

fn window_nonzeros(phantom: &Phantom, window: usize) -> usize {
    phantom.coefficients.iter().take(window).filter(|&&v| v != 0.0).count()
}

/// Independent seeds for the angles and the noise of a cell.
fn cell_seeds(cell: &Cell) -> (u64, u64) {
    let base = cell.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (cell.beta.to_bits().rotate_left(17));
    (base, base ^ 0xD1B5_4A32_D192_ED03)
}

/// Draws the samples, assembles the data, solves with `η = ‖Qε‖ bound + ‖QAP_Λ^⊥x†‖` and
/// measures the error.
pub fn run_cell(cfg: &ExperimentConfig, setup: &Setup, phantom: &Phantom, cell: &Cell) -> Result<(SweepRecord, SolveResult)> {
    let start = Instant::now();
    let model = setup.model.as_ref();
    let window = setup.window_len(cell.j0);
    let (angle_seed, noise_seed) = cell_seeds(cell);
    let samples = draw_samples(model, cell.m, angle_seed);
    let system = assemble_normal_form(model, window, &samples, &phantom.coefficients, cell.beta, noise_seed)?;
    let q = q_weights(model, &samples);
    let q_rms = (q.iter().map(|v| v * v).sum::<f64>() / q.len() as f64).sqrt();
    let eta = cell.beta * q_rms + system.truncation_residual;
    let result = solve_normal_form(&system.form, &setup.weights_on(window), &cfg.solve_config(eta))?;

    let mut diff = phantom.coefficients.clone();
    diff.resize(diff.len().max(window), 0.0);
    for (d, x) in diff.iter_mut().zip(&result.x_hat) {
        *d -= x;
    }
    let err_l2 = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err_img = match &setup.atlas {
        Some(atlas) => atlas.synthesis(&diff)?.norm(),
        None => err_l2,
    };
    let norm = phantom.norm();
    let record = SweepRecord {
        beta: cell.beta,
        m: cell.m,
        j0: cell.j0,
        s: window_nonzeros(phantom, window),
        seed: cell.seed,
        err_l2,
        err_img,
        err_rel: if norm > 0.0 { err_l2 / norm } else { err_l2 },
        residual: result.residual,
        eta,
        status: result.status,
        iterations: result.iterations,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((record, result))
}

/// Runs every cell on `cfg.workers` threads; records come back in cell order.
pub fn run_recovery_sweep(cfg: &ExperimentConfig, setup: &Setup, phantom: &Phantom) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let cells = sweep_cells(cfg, setup, phantom);
    run_cells(cfg, setup, phantom, &cells)
}

pub fn run_cells(cfg: &ExperimentConfig, setup: &Setup, phantom: &Phantom, cells: &[Cell]) -> Result<Vec<SweepRecord>> {
    let workers = match cfg.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(cells.len())
    .max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SweepRecord>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= cells.len() {
                    break;
                }
                let out = run_cell(cfg, setup, phantom, &cells[k]).map(|(r, _)| r);
                slots.lock().expect("no worker panicked")[k] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub c0: f64,
    /// Smallest `m` reaching the success rate at the pilot scale.
    pub m_min: usize,
    pub j0: u32,
    pub s: usize,
    pub success_rate: f64,
}

/// Share of seeds recovering `x†` to [`EXACT_TOLERANCE`] from `m` noiseless samples at `j0`.
pub fn exact_success_rate(cfg: &ExperimentConfig, setup: &Setup, j0: u32, m: usize) -> Result<f64> {
    let PhantomSpec::Sparse { s, .. } = cfg.phantom else {
        return Err(Error::Config("exact recovery needs a sparse phantom".into()));
    };
    let mut hits = 0;
    for &seed in &cfg.seeds {
        let pilot = ExperimentConfig { j0, phantom: PhantomSpec::Sparse { s, seed }, ..cfg.clone() };
        let phantom = super::phantom::make_phantom(&pilot, setup)?;
        let cell = Cell { beta: 0.0, m, j0, seed };
        let (record, _) = run_cell(&pilot, setup, &phantom, &cell)?;
        hits += (record.err_rel <= EXACT_TOLERANCE) as usize;
    }
    Ok(hits as f64 / cfg.seeds.len() as f64)
}

/// Searches for the smallest `m ≤ m_cap` with at least [`CALIBRATION_SUCCESS`] exact recoveries
/// over `cfg.seeds` at scale `j0`, then solves `m = C₀ s j₀ log³s` for `C₀`.
pub fn calibrate_c0(cfg: &ExperimentConfig, setup: &Setup, j0: u32) -> Result<Calibration> {
    let PhantomSpec::Sparse { s, .. } = cfg.phantom else {
        return Err(Error::Config("calibration needs a sparse phantom".into()));
    };
    if s < 2 || j0 == 0 {
        return Err(Error::Config("calibration needs s ≥ 2 and j0 ≥ 1".into()));
    }
    let passes = |m: usize| exact_success_rate(cfg, setup, j0, m).map(|r| (r >= CALIBRATION_SUCCESS, r));
    // Doubling bracket, then bisection.
    let (mut lo, mut hi) = (0usize, 1usize);
    let mut rate = loop {
        let (ok, r) = passes(hi)?;
        if ok {
            break r;
        }
        if hi >= cfg.m_cap {
            return Err(Error::Numerical(format!("exact recovery rate {r} at m_cap = {}", cfg.m_cap)));
        }
        lo = hi;
        hi = (2 * hi).min(cfg.m_cap);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let (ok, r) = passes(mid)?;
        if ok {
            hi = mid;
            rate = r;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration { c0: hi as f64 / exact_rule(1.0, s, j0), m_min: hi, j0, s, success_rate: rate })
}

/// Config with the rule constant replaced by a calibrated one.
pub fn with_c0(cfg: &ExperimentConfig, c0: f64) -> ExperimentConfig {
    let m_rule = match &cfg.m_rule {
        SampleRule::Exact { .. } => SampleRule::Exact { c0 },
        SampleRule::Rate { p, .. } => SampleRule::Rate { c0, p: *p },
        SampleRule::Cartoon { .. } => SampleRule::Cartoon { c0 },
        fixed => fixed.clone(),
    };
    ExperimentConfig { m_rule, ..cfg.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitAxis {
    Beta,
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub axis: FitAxis,
    /// Slope of `log err` against `log axis`, so `err ∝ axis^{exponent}`.
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(axis value, median error)` per cell.
    pub points: Vec<(f64, f64)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Median `err_img` per distinct axis value, in increasing axis order.
pub fn median_errors(records: &[SweepRecord], axis: FitAxis) -> Vec<(f64, f64)> {
    let key = |r: &SweepRecord| match axis {
        FitAxis::Beta => r.beta,
        FitAxis::M => r.m as f64,
    };
    let mut values: Vec<f64> = records.iter().map(key).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .map(|v| (v, median(records.iter().filter(|r| key(r) == v).map(|r| r.err_img).collect())))
        .collect()
}

/// Least squares on `(ln axis, ln median error)`.
pub fn fit_scaling(records: &[SweepRecord], axis: FitAxis) -> Result<ScalingFit> {
    let points = median_errors(records, axis);
    if points.len() < 4 {
        return Err(Error::Domain(format!("{} distinct axis values; at least 4 are needed", points.len())));
    }
    if points.iter().any(|&(v, e)| !(v > 0.0) || !(e > 0.0)) {
        return Err(Error::Domain("axis values and errors must be positive".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().map(|&(v, e)| (v.ln(), e.ln())).unzip();
    let LinearFit { slope, intercept, r_squared } = linear_fit(&x, &y)?;
    Ok(ScalingFit { axis, exponent: slope, intercept, r_squared, points })
}

/// The widest run of consecutive axis values (at least four) whose fit has `r² ≥ min_r2`,
/// preferring the larger span in log-axis on ties.
pub fn best_window(fit: &ScalingFit, min_r2: f64) -> Option<ScalingFit> {
    let n = fit.points.len();
    let mut best: Option<(usize, f64, ScalingFit)> = None;
    for lo in 0..n {
        for hi in lo + 4..=n {
            let pts = &fit.points[lo..hi];
            let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(v, e)| (v.ln(), e.ln())).unzip();
            let Ok(f) = linear_fit(&x, &y) else { continue };
            if f.r_squared < min_r2 {
                continue;
            }
            let span = x[x.len() - 1] - x[0];
            let better = match &best {
                None => true,
                Some((len, s, _)) => hi - lo > *len || (hi - lo == *len && span > *s),
            };
            if better {
                let window = ScalingFit {
                    axis: fit.axis,
                    exponent: f.slope,
                    intercept: f.intercept,
                    r_squared: f.r_squared,
                    points: pts.to_vec(),
                };
                best = Some((hi - lo, span, window));
            }
        }
    }
    best.map(|(_, _, f)| f)
}
