//! The Gram matrix `GᵀG = P_Λ Φ F*F Φ* ι_Λ`, its square root and derived constants.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{accumulate_normal, ForwardModel, SampledSystem};
use crate::stats::linear_fit;

/// Eigenvalues of `GᵀG` below this are quadrature noise if not materially negative.
const EIGEN_FLOOR: f64 = 1e-10;

/// Probe count for the quasi-diagonalization ratios besides the singletons.
const RANDOM_PROBES: usize = 200;

/// Two-sided constants of `c Σ 2^{−2bj}|x|² ≤ ‖FΦ*x‖² ≤ C Σ 2^{−2bj}|x|²` over the probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiDiag {
    pub b: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `sup_t ‖F_tφ_i‖/√f_ν(t) ≤ B·2^{−e·j_i}`, with `e` fitted over scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coherence {
    /// `(j, max_n sup_t ‖F_tφ_{j,n}‖/√f_ν(t))`.
    pub per_scale: Vec<(u32, f64)>,
    pub bound: f64,
    /// `e` with `d_{j,n} = 2^{e j}`.
    pub decay_exponent: f64,
}

#[derive(Debug, Clone)]
pub struct GramCertificate {
    /// `GᵀG` from the quadrature rule.
    pub gram: DMatrix<f64>,
    /// `G`, the symmetric square root.
    pub root: DMatrix<f64>,
    /// `G^{-1}`, absent when the finite-basis injectivity check fails.
    pub root_inv: Option<DMatrix<f64>>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub inv_norm: f64,
    pub fbi_violation: bool,
    pub scales: Vec<u32>,
    pub quasi_diag: QuasiDiag,
    pub coherence: Coherence,
    pub relative_coherence: f64,
    pub quadrature_nodes: usize,
}

/// `max(64, 8·2^{j_max})` angular nodes.
pub fn default_gram_resolution(j_max: u32) -> usize {
    64.max(8usize << j_max)
}

/// Gram matrix of the first `lambda_len` atoms over the model's quadrature rule.
pub fn compute_gram(model: &dyn ForwardModel, lambda_len: usize, resolution: usize) -> Result<GramCertificate> {
    if lambda_len == 0 || lambda_len > model.num_atoms() {
        return Err(Error::Index(format!("Λ of size {lambda_len} for {} atoms", model.num_atoms())));
    }
    let weight = model.measurement_weight();
    let nodes = model.quadrature(resolution);
    let mut gram = DMatrix::zeros(lambda_len, lambda_len);
    let mut atom_coherence = vec![0.0f64; lambda_len];
    for &(t, w) in &nodes {
        let block = model.responses(lambda_len, t);
        accumulate_normal(&block, w * weight, &mut gram);
        let inv_sqrt_density = model.density(t).powf(-0.5);
        for (c, seg) in atom_coherence.iter_mut().zip(&block) {
            *c = c.max((weight * seg.norm_sq()).sqrt() * inv_sqrt_density);
        }
    }
    gram.fill_upper_triangle_with_lower_triangle();
    let scales: Vec<u32> = (0..lambda_len).map(|i| model.atom_scale(i)).collect();
    let mut cert = GramCertificate::from_gram(gram, scales, &atom_coherence)?;
    cert.quadrature_nodes = nodes.len();
    Ok(cert)
}

fn scale_fit(scales: &[u32], values: &[f64]) -> Option<f64> {
    let mut distinct: Vec<u32> = scales.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return None;
    }
    let x: Vec<f64> = scales.iter().map(|&j| j as f64).collect();
    let y: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    linear_fit(&x, &y).ok().map(|f| f.slope)
}

impl GramCertificate {
    /// Builds `G` from a symmetric `GᵀG` and per-atom coherences `sup_t ‖F_tφ_i‖/√f_ν(t)`.
    pub fn from_gram(gram: DMatrix<f64>, scales: Vec<u32>, atom_coherence: &[f64]) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n || scales.len() != n || atom_coherence.len() != n {
            return Err(Error::Dimension("Gram matrix, scales and coherences disagree in size".into()));
        }
        let asym = (&gram - gram.transpose()).abs().max();
        if asym > 1e-10 * gram.abs().max().max(1.0) {
            return Err(Error::Numerical(format!("Gram matrix asymmetric by {asym:e}")));
        }
        let eig = SymmetricEigen::new(gram.clone());
        let lambda_min = eig.eigenvalues.min();
        if lambda_min < -EIGEN_FLOOR {
            return Err(Error::Numerical(format!("Gram matrix has eigenvalue {lambda_min:e}")));
        }
        let fbi_violation = lambda_min <= EIGEN_FLOOR;
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        let v = &eig.eigenvectors;
        let root = v * DMatrix::from_diagonal(&clamped.map(f64::sqrt)) * v.transpose();
        let root_inv = (!fbi_violation)
            .then(|| v * DMatrix::from_diagonal(&clamped.map(|l| 1.0 / l.sqrt())) * v.transpose());
        let sigma_min = clamped.min().sqrt();
        let sigma_max = clamped.max().sqrt();
        let inv_norm = if fbi_violation { f64::INFINITY } else { 1.0 / sigma_min };

        let diag: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();
        let b = scale_fit(&scales, &diag).map_or(0.0, |slope| -0.5 * slope);
        let quasi_diag = estimate_quasi_diag(&gram, &scales, Some(b), RANDOM_PROBES, 0)?;

        let mut per_scale: Vec<(u32, f64)> = Vec::new();
        for (&j, &c) in scales.iter().zip(atom_coherence) {
            match per_scale.iter_mut().find(|e| e.0 == j) {
                Some(e) => e.1 = e.1.max(c),
                None => per_scale.push((j, c)),
            }
        }
        per_scale.sort_by_key(|e| e.0);
        let js: Vec<u32> = per_scale.iter().map(|e| e.0).collect();
        let maxima: Vec<f64> = per_scale.iter().map(|e| e.1).collect();
        let decay_exponent = scale_fit(&js, &maxima).map_or(0.0, |slope| -slope);
        let bound = per_scale
            .iter()
            .map(|&(j, c)| c * 2f64.powf(decay_exponent * j as f64))
            .fold(0.0, f64::max);
        let relative_coherence = per_scale
            .iter()
            .map(|&(j, _)| bound * 2f64.powf((b - decay_exponent) * j as f64))
            .fold(0.0, f64::max);
        Ok(Self {
            gram,
            root,
            root_inv,
            sigma_min,
            sigma_max,
            inv_norm,
            fbi_violation,
            scales,
            quasi_diag,
            coherence: Coherence { per_scale, bound, decay_exponent },
            relative_coherence,
            quadrature_nodes: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Key-value summary in a fixed order.
    pub fn summary(&self) -> Vec<(&'static str, String)> {
        vec![
            ("atoms", self.len().to_string()),
            ("quadrature_nodes", self.quadrature_nodes.to_string()),
            ("sigma_min", format!("{:.12e}", self.sigma_min)),
            ("sigma_max", format!("{:.12e}", self.sigma_max)),
            ("inv_norm", format!("{:.12e}", self.inv_norm)),
            ("fbi_violation", self.fbi_violation.to_string()),
            ("b_fit", format!("{:.12e}", self.quasi_diag.b)),
            ("c_hat", format!("{:.12e}", self.quasi_diag.lower)),
            ("C_hat", format!("{:.12e}", self.quasi_diag.upper)),
            ("B", format!("{:.12e}", self.coherence.bound)),
            ("d_exponent", format!("{:.12e}", self.coherence.decay_exponent)),
            ("relative_coherence", format!("{:.12e}", self.relative_coherence)),
        ]
    }
}

/// Ratios `xᵀ(GᵀG)x / Σ 2^{−2bj}x²` over all singletons and `probes` Gaussian vectors.
///
/// `b = None` fits `b` from the diagonal.
pub fn estimate_quasi_diag(
    gram: &DMatrix<f64>,
    scales: &[u32],
    b: Option<f64>,
    probes: usize,
    seed: u64,
) -> Result<QuasiDiag> {
    let n = gram.nrows();
    if scales.len() != n {
        return Err(Error::Dimension(format!("{} scales for {n} atoms", scales.len())));
    }
    let b = match b {
        Some(b) => b,
        None => {
            let diag: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();
            scale_fit(scales, &diag).map_or(0.0, |slope| -0.5 * slope)
        }
    };
    let dyadic: Vec<f64> = scales.iter().map(|&j| 2f64.powf(-2.0 * b * j as f64)).collect();
    let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let r = gram[(i, i)] / dyadic[i];
        lower = lower.min(r);
        upper = upper.max(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..probes {
        let x = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let num = (gram * &x).dot(&x);
        let den: f64 = x.iter().zip(&dyadic).map(|(v, d)| d * v * v).sum();
        lower = lower.min(num / den);
        upper = upper.max(num / den);
    }
    Ok(QuasiDiag { b, lower, upper })
}

/// `max_{t, i} ‖F_tφ_i‖_{H₂}` over the given parameters and the first `count` atoms.
pub fn uniform_bound(model: &dyn ForwardModel, count: usize, params: &[f64]) -> f64 {
    let w = model.measurement_weight();
    params
        .iter()
        .flat_map(|&t| model.responses(count, t))
        .map(|seg| (w * seg.norm_sq()).sqrt())
        .fold(0.0, f64::max)
}

/// `‖FΦ*ι_{tail}‖` for the atoms in `tail` by power iteration on their quadrature Gram matrix.
///
/// Atoms beyond the model's finest scale are not represented, so this is the norm on a
/// truncated tail.
pub fn tail_operator_norm(model: &dyn ForwardModel, tail: Range<usize>, resolution: usize) -> Result<f64> {
    if tail.end > model.num_atoms() || tail.is_empty() {
        return Err(Error::Index(format!("tail {tail:?} for {} atoms", model.num_atoms())));
    }
    let n = tail.len();
    let mut gram = DMatrix::zeros(n, n);
    for (t, w) in model.quadrature(resolution) {
        let block: Vec<_> = tail.clone().map(|i| model.response(i, t)).collect();
        accumulate_normal(&block, w * model.measurement_weight(), &mut gram);
    }
    gram.fill_upper_triangle_with_lower_triangle();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let next = &gram * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let converged = (norm - lambda).abs() <= 1e-10 * norm;
        lambda = norm;
        v = next / norm;
        if converged {
            break;
        }
    }
    Ok(lambda.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    /// `‖QAP_Λ^⊥x†‖_{H₂^m}`.
    pub residual: f64,
    /// `‖P_Λ^⊥x†‖₂`.
    pub r: f64,
    /// `c_ν^{−1/2}(‖FΦ*ι_{Γ∖Λ}‖·‖G^{-1}‖ + 1)·r` with a unit leading constant.
    pub bound: f64,
}

pub fn truncation_residual(system: &SampledSystem, r: f64, tail_norm: f64, inv_norm: f64, c_nu: f64) -> TruncationReport {
    TruncationReport {
        residual: system.truncation_residual(),
        r,
        bound: c_nu.powf(-0.5) * (tail_norm * inv_norm + 1.0) * r,
    }
}
