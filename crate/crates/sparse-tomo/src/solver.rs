//! Weighted ℓ¹ minimization `min Σ ω_i 2^{−ζ b j_i}|x_i|` subject to `‖QAx − Qy‖ ≤ η`, and the
//! penalized path `min λ Σ ω_i 2^{−ζ b j_i}|x_i| + ½‖QAx − Qy‖²`.
//!
//! Both work on the normal form of the data fit. The constrained problem is compressed to
//! `‖Kx − z‖² + ρ²` with `KᵀK = AᵀA`, its columns are equilibrated, and it is solved by a
//! primal–dual splitting whose dual step is the projection onto the `η'`-ball, `η'² = η² − ρ²`.

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{NormalForm, SampledSystem};
use crate::image::Image;
use crate::sparsity::Weights;
use crate::wavelet::DictionaryAtlas;

/// Residuals below this fraction of `‖Qy‖` count as zero; `‖Qy‖² − ‖z‖²` loses about half the
/// significant digits.
const ABSOLUTE_SLACK: f64 = 1e-7;

/// Iterations between convergence checks.
const CHECK_EVERY: usize = 10;

/// Iterations between updates of the primal/dual step ratio.
const REWEIGHT_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveConfig {
    pub zeta: f64,
    pub eta: f64,
    pub max_iters: usize,
    /// Relative primal–dual gap.
    pub tol_gap: f64,
    /// Relative excess of the residual over `η`.
    pub tol_feas: f64,
    /// `τ/σ` of the primal and dual steps, `τσ‖K‖² < 1`.
    pub step_ratio: f64,
    /// `b` in `W = diag(2^{b j})`.
    pub scale_exponent: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            zeta: 0.0,
            eta: 0.0,
            max_iters: 50_000,
            tol_gap: 1e-8,
            tol_feas: 1e-6,
            step_ratio: 1.0,
            scale_exponent: 0.5,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::Config(format!("ζ = {} outside [0, 1]", self.zeta)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("constraint radius {} must be finite and non-negative", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least one".into()));
        }
        if !(self.tol_gap > 0.0) || !(self.tol_feas > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.step_ratio > 0.0) || !self.step_ratio.is_finite() {
            return Err(Error::Config(format!("step ratio {} must be positive", self.step_ratio)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub objective: f64,
    /// Smallest relative gap certified so far.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub x_hat: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub gap: f64,
    pub status: SolveStatus,
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    /// Writes the trace as CSV.
    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "iteration,residual,objective,gap")?;
        for r in &self.trace {
            writeln!(out, "{},{:e},{:e},{:e}", r.iteration, r.residual, r.objective, r.gap)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `ω_i 2^{−ζ b j_i}`.
pub fn l1_weights(weights: &Weights, scales: &[u32], zeta: f64, b: f64) -> Result<Vec<f64>> {
    if weights.len() != scales.len() {
        return Err(Error::Dimension(format!("{} weights for {} atoms", weights.len(), scales.len())));
    }
    Ok(weights
        .as_slice()
        .iter()
        .zip(scales)
        .map(|(w, &j)| w * 2f64.powf(-zeta * b * j as f64))
        .collect())
}

fn objective(c: &[f64], x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(c, x)| c * x.abs()).sum()
}

/// `N = KᵀK`, `z` the projection of the data onto the range, `ρ` the distance to it.
struct Compressed {
    k: DMatrix<f64>,
    z: DVector<f64>,
    rho: f64,
    /// `K` is square and well conditioned, so `Kx = z` has exactly one solution.
    injective: bool,
}

impl Compressed {
    fn new(form: &NormalForm) -> Self {
        let n = form.len();
        let max_diag = (0..n).map(|i| form.normal[(i, i)]).fold(0.0, f64::max);
        if let Some(chol) = Cholesky::new(form.normal.clone()) {
            let l = chol.l();
            let min_pivot = l.diagonal().min();
            if min_pivot > 1e-7 * max_diag.sqrt() {
                let z = l.solve_lower_triangular(&form.rhs).expect("pivots are positive");
                let rho = (form.data_norm_sq - z.norm_squared()).max(0.0).sqrt();
                return Self { k: l.transpose(), z, rho, injective: true };
            }
        }
        let eig = SymmetricEigen::new(form.normal.clone());
        let top = eig.eigenvalues.max().max(0.0);
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 1e-12 * top).collect();
        let mut k = DMatrix::zeros(keep.len(), n);
        let mut z = DVector::zeros(keep.len());
        for (row, &i) in keep.iter().enumerate() {
            let root = eig.eigenvalues[i].sqrt();
            let v = eig.eigenvectors.column(i);
            for c in 0..n {
                k[(row, c)] = root * v[c];
            }
            z[row] = v.dot(&form.rhs) / root;
        }
        let rho = (form.data_norm_sq - z.norm_squared()).max(0.0).sqrt();
        let injective = keep.len() == n;
        Self { k, z, rho, injective }
    }

    /// A minimizer of `‖Kx − z‖`.
    fn least_squares(&self) -> DVector<f64> {
        let svd = self.k.clone().svd(true, true);
        svd.solve(&self.z, 1e-12 * svd.singular_values.max()).expect("both factors were computed")
    }
}

fn spectral_norm_sq(k: &DMatrix<f64>) -> f64 {
    let n = k.ncols();
    if n == 0 || k.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * (i % 7) as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = k.tr_mul(&(k * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let done = (norm - lambda).abs() <= 1e-9 * norm;
        lambda = norm;
        v = w / norm;
        if done {
            break;
        }
    }
    lambda
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Solves the constrained problem for a stored system; the reported residual is evaluated on
/// the stored blocks rather than through the normal form.
pub fn solve_constrained_l1(system: &SampledSystem, weights: &Weights, cfg: &SolveConfig) -> Result<SolveResult> {
    let mut result = solve_normal_form(&system.normal_form(), weights, cfg)?;
    let ax = system.apply(&result.x_hat);
    result.residual = ax.iter().zip(system.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(result)
}

/// Solves `min Σ ω_i 2^{−ζ b j_i}|x_i|` subject to `xᵀNx − 2rᵀx + ‖Qy‖² ≤ η²`.
pub fn solve_normal_form(form: &NormalForm, weights: &Weights, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let n = form.len();
    let c = l1_weights(weights, &form.scales, cfg.zeta, cfg.scale_exponent)?;
    let y_norm = form.data_norm_sq.max(0.0).sqrt();
    let threshold = (cfg.eta * (1.0 + cfg.tol_feas)).max(ABSOLUTE_SLACK * y_norm);
    let done = |x: Vec<f64>, residual, iterations, gap, status, trace| SolveResult {
        objective: objective(&c, &x),
        x_hat: x,
        residual,
        iterations,
        gap,
        status,
        trace,
    };
    if y_norm <= cfg.eta {
        return Ok(done(vec![0.0; n], y_norm, 0, 0.0, SolveStatus::Optimal, Vec::new()));
    }
    let comp = Compressed::new(form);
    if comp.rho > threshold {
        let x = comp.least_squares();
        return Ok(done(x.as_slice().to_vec(), comp.rho, 0, f64::INFINITY, SolveStatus::Infeasible, Vec::new()));
    }
    let radius = (cfg.eta * cfg.eta - comp.rho * comp.rho).max(0.0).sqrt();
    if radius <= ABSOLUTE_SLACK * y_norm && comp.injective {
        // The feasible set is the single least-squares point.
        let x = comp.least_squares();
        return Ok(done(x.as_slice().to_vec(), comp.rho, 0, 0.0, SolveStatus::Optimal, Vec::new()));
    }

    // Equilibrate: x = D u with unit columns of K D; the weights become c_i d_i.
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let norm = comp.k.column(i).norm();
            if norm > 0.0 { 1.0 / norm } else { 1.0 }
        })
        .collect();
    let mut k = comp.k.clone();
    for (i, &di) in d.iter().enumerate() {
        k.column_mut(i).scale_mut(di);
    }
    let cu: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a * b).collect();
    let z = &comp.z;

    let lip = spectral_norm_sq(&k).sqrt() * 1.01;
    let mut tau = cfg.step_ratio / lip;
    let mut sigma = 1.0 / (cfg.step_ratio * lip);
    let mut ratio = cfg.step_ratio;
    let mut anchor: Option<(DVector<f64>, DVector<f64>)> = None;

    let mut u = DVector::<f64>::zeros(n);
    let mut ku = DVector::<f64>::zeros(k.nrows());
    let mut p = DVector::<f64>::zeros(k.nrows());
    let mut kt_p = DVector::<f64>::zeros(n);
    let mut best_gap = f64::INFINITY;
    let mut trace = Vec::new();
    let residual_of = |ku: &DVector<f64>| ((ku - z).norm_squared() + comp.rho * comp.rho).sqrt();
    let mut status = SolveStatus::MaxIters;
    let mut iterations = cfg.max_iters;
    for it in 1..=cfg.max_iters {
        let u_new = DVector::from_fn(n, |i, _| soft_threshold(u[i] - tau * kt_p[i], tau * cu[i]));
        let ku_new = &k * &u_new;
        let mut q = &p + sigma * (2.0 * &ku_new - &ku - z);
        let qn = q.norm();
        let shrink = sigma * radius;
        q *= if qn > shrink { 1.0 - shrink / qn } else { 0.0 };
        let kt_q = k.tr_mul(&q);
        u = u_new;
        ku = ku_new;
        p = q;
        kt_p = kt_q;

        // Primal weight: the ratio follows the primal over the dual movement, smoothed geometrically.
        if it % REWEIGHT_EVERY == 0 {
            if let Some((u0, p0)) = &anchor {
                let (du, dp) = ((&u - u0).norm(), (&p - p0).norm());
                if du > 0.0 && dp > 0.0 {
                    ratio = (0.5 * (du / dp).ln() + 0.5 * ratio.ln()).exp();
                    tau = ratio / lip;
                    sigma = 1.0 / (ratio * lip);
                }
            }
            anchor = Some((u.clone(), p.clone()));
        }

        if it % CHECK_EVERY == 0 || it == cfg.max_iters {
            let residual = residual_of(&ku);
            let primal = objective(&cu, u.as_slice());
            // Rescale p into the dual feasible set |Kᵀp|_i ≤ c_i.
            let scale = kt_p
                .iter()
                .zip(&cu)
                .map(|(v, ci)| if v.abs() > *ci { ci / v.abs() } else { 1.0 })
                .fold(1.0, f64::min);
            let dual = -scale * p.dot(z) - radius * scale * p.norm();
            let gap = (primal - dual).abs() / primal.abs().max(dual.abs()).max(f64::MIN_POSITIVE);
            let feasible = residual <= threshold;
            let infeasibility = if feasible { 0.0 } else { (residual - threshold) / threshold.max(f64::MIN_POSITIVE) };
            best_gap = best_gap.min(gap.max(infeasibility));
            trace.push(TraceRow { iteration: it, residual, objective: primal, gap: best_gap });
            if feasible && gap <= cfg.tol_gap {
                status = SolveStatus::Optimal;
                iterations = it;
                break;
            }
        }
    }
    let x: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a * b).collect();
    let residual = residual_of(&(&k * &u));
    let last_gap = trace.last().map_or(f64::INFINITY, |r| r.gap);
    Ok(done(x, residual, iterations, last_gap, status, trace))
}

/// FISTA for `min λ Σ ω_i 2^{−ζ b j_i}|x_i| + ½‖QAx − Qy‖²`, warm-started from `start`.
pub fn solve_penalized(
    form: &NormalForm,
    weights: &Weights,
    zeta: f64,
    scale_exponent: f64,
    penalty: f64,
    start: Option<&[f64]>,
    max_iters: usize,
    tol_gap: f64,
) -> Result<SolveResult> {
    if !(penalty > 0.0) {
        return Err(Error::Config(format!("penalty {penalty} must be positive")));
    }
    let n = form.len();
    let c = l1_weights(weights, &form.scales, zeta, scale_exponent)?;
    let lip = SymmetricEigen::new(form.normal.clone()).eigenvalues.max().max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;
    let mut x = match start {
        Some(s) if s.len() == n => DVector::from_column_slice(s),
        Some(s) => return Err(Error::Dimension(format!("warm start of length {} for {n} atoms", s.len()))),
        None => DVector::zeros(n),
    };
    let mut v = x.clone();
    let mut t = 1.0f64;
    let yy = form.data_norm_sq;
    let value = |x: &DVector<f64>| {
        let fit = ((&form.normal * x).dot(x) - 2.0 * form.rhs.dot(x) + yy).max(0.0);
        penalty * objective(&c, x.as_slice()) + 0.5 * fit
    };
    let mut prev_value = value(&x);
    let mut status = SolveStatus::MaxIters;
    let mut iterations = max_iters;
    let mut gap = f64::INFINITY;
    let mut trace = Vec::new();
    for it in 1..=max_iters {
        let grad = &form.normal * &v - &form.rhs;
        let x_new = DVector::from_fn(n, |i, _| soft_threshold(v[i] - step * grad[i], step * penalty * c[i]));
        let new_value = value(&x_new);
        // Adaptive restart keeps the objective monotone.
        if new_value > prev_value {
            t = 1.0;
            v = x.clone();
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &x_new + ((t - 1.0) / t_new) * (&x_new - &x);
        x = x_new;
        t = t_new;
        prev_value = new_value;
        if it % CHECK_EVERY == 0 {
            gap = lasso_gap(form, &c, penalty, &x) / new_value.max(f64::MIN_POSITIVE);
            trace.push(TraceRow { iteration: it, residual: form.residual(&x), objective: new_value, gap });
            if gap <= tol_gap {
                status = SolveStatus::Optimal;
                iterations = it;
                break;
            }
        }
    }
    Ok(SolveResult {
        objective: objective(&c, x.as_slice()),
        residual: form.residual(&x),
        x_hat: x.as_slice().to_vec(),
        iterations,
        gap,
        status,
        trace,
    })
}

/// Duality gap of the penalized problem with the dual point `s(y − Ax)`.
fn lasso_gap(form: &NormalForm, c: &[f64], penalty: f64, x: &DVector<f64>) -> f64 {
    let nx = &form.normal * x;
    let xnx = nx.dot(x);
    let rx = form.rhs.dot(x);
    let yy = form.data_norm_sq;
    let corr = &form.rhs - &nx;
    let s = corr
        .iter()
        .zip(c)
        .map(|(g, ci)| if g.abs() > penalty * ci { penalty * ci / g.abs() } else { 1.0 })
        .fold(1.0, f64::min);
    let primal = penalty * objective(c, x.as_slice()) + 0.5 * (xnx - 2.0 * rx + yy).max(0.0);
    // ‖y − θ‖² with θ = s(y − Ax).
    let dist = (1.0 - s).powi(2) * yy + 2.0 * s * (1.0 - s) * rx + s * s * xnx;
    let dual = 0.5 * yy - 0.5 * dist;
    (primal - dual).max(0.0)
}

/// Warm-started penalized solves along a strictly decreasing positive penalty grid.
pub fn solve_unconstrained_path(
    form: &NormalForm,
    weights: &Weights,
    zeta: f64,
    scale_exponent: f64,
    penalties: &[f64],
) -> Result<Vec<SolveResult>> {
    if penalties.is_empty() || penalties.iter().any(|&p| !(p > 0.0)) || penalties.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("penalties must be positive and strictly decreasing".into()));
    }
    let mut out: Vec<SolveResult> = Vec::with_capacity(penalties.len());
    for &pen in penalties {
        let start = out.last().map(|r| r.x_hat.as_slice());
        out.push(solve_penalized(form, weights, zeta, scale_exponent, pen, start, 200_000, 1e-12)?);
    }
    Ok(out)
}

/// `Φ*ι_Λ x̂` on the atlas grid.
pub fn reconstruct_image(result: &SolveResult, atlas: &DictionaryAtlas) -> Result<Image> {
    atlas.synthesis(&result.x_hat)
}
