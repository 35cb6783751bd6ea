//! Restricted isometry constants `δ* = sup |xᵀ(AᵀA − GᵀG)x|` over `‖Gx‖ ≤ 1`, `ω(supp x) ≤ λ`,
//! and a randomized search for violations of the robust null space property.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::GramCertificate;
use crate::error::{Error, Result};
use crate::forward::SampledSystem;
use crate::sparsity::{quasi_best_sparse_approx, weighted_norm, Weights};

/// Largest `|Λ|` for support enumeration.
pub const ENUMERATION_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMethod {
    Bruteforce,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RipEstimate {
    pub lambda: f64,
    pub delta_star: f64,
    pub method: RipMethod,
    /// Supports evaluated.
    pub supports: usize,
    pub samples_m: usize,
}

/// `AᵀA − GᵀG` together with `GᵀG`.
#[derive(Debug, Clone)]
pub struct RipProblem {
    difference: DMatrix<f64>,
    gram: DMatrix<f64>,
    samples_m: usize,
}

impl RipProblem {
    pub fn new(normal: &DMatrix<f64>, gram: &DMatrix<f64>, samples_m: usize) -> Result<Self> {
        if normal.shape() != gram.shape() || normal.nrows() != normal.ncols() {
            return Err(Error::Dimension(format!(
                "normal matrix {:?} against Gram matrix {:?}",
                normal.shape(),
                gram.shape()
            )));
        }
        Ok(Self { difference: normal - gram, gram: gram.clone(), samples_m })
    }

    /// Uses `(QA)ᵀ(QA)` of the system.
    pub fn from_system(system: &SampledSystem, cert: &GramCertificate) -> Result<Self> {
        Self::new(&system.normal_matrix(), &cert.gram, system.m())
    }

    /// The problem for `(AZ, GZ)` with `Z = diag(z)`.
    pub fn scaled(&self, z: &[f64]) -> Result<Self> {
        if z.len() != self.len() || z.iter().any(|&v| v == 0.0) {
            return Err(Error::Dimension("scaling needs one nonzero entry per atom".into()));
        }
        let zd = DMatrix::from_diagonal(&DVector::from_column_slice(z));
        Ok(Self {
            difference: &zd * &self.difference * &zd,
            gram: &zd * &self.gram * &zd,
            samples_m: self.samples_m,
        })
    }

    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spectral radius of `H_S^{−1/2} D_S H_S^{−1/2}` with `H = GᵀG`, `D = AᵀA − GᵀG`.
    pub fn support_delta(&self, support: &[usize]) -> Result<f64> {
        let h = self.gram.select_rows(support).select_columns(support);
        let d = self.difference.select_rows(support).select_columns(support);
        let chol = Cholesky::new(h)
            .ok_or_else(|| Error::Numerical(format!("Gram matrix is not definite on support {support:?}")))?;
        let l = chol.l();
        // M = L^{-1} D L^{-T}.
        let left = l
            .solve_lower_triangular(&d)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let m = l
            .solve_lower_triangular(&left.transpose())
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymmetricEigen::new(sym).eigenvalues.amax())
    }

    /// `δ*` without a sparsity restriction.
    pub fn unrestricted(&self) -> Result<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.support_delta(&all)
    }

    /// Exact `δ*` over all inclusion-maximal supports with `ω(S) ≤ λ`.
    pub fn bruteforce(&self, weights: &Weights, lambda: f64) -> Result<RipEstimate> {
        self.check_weights(weights)?;
        let n = self.len();
        let w2: Vec<f64> = weights.as_slice().iter().map(|w| w * w).collect();
        let total: f64 = w2.iter().sum();
        let estimate = |delta_star, supports| RipEstimate {
            lambda,
            delta_star,
            method: RipMethod::Bruteforce,
            supports,
            samples_m: self.samples_m,
        };
        if total <= lambda * (1.0 + 1e-12) {
            return Ok(estimate(self.unrestricted()?, 1));
        }
        if n > ENUMERATION_LIMIT {
            return Err(Error::Capacity(format!("support enumeration over {n} > {ENUMERATION_LIMIT} atoms")));
        }
        let mut best = 0.0f64;
        let mut count = 0;
        for mask in 1u32..(1u32 << n) {
            let mut budget = 0.0;
            for (i, w) in w2.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    budget += w;
                }
            }
            if budget > lambda * (1.0 + 1e-12) {
                continue;
            }
            let maximal = (0..n).all(|i| mask & (1 << i) != 0 || budget + w2[i] > lambda * (1.0 + 1e-12));
            if !maximal {
                continue;
            }
            let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            best = best.max(self.support_delta(&support)?);
            count += 1;
        }
        Ok(estimate(best, count))
    }

    /// Lower bound on `δ*` from `trials` supports, each filled greedily in random order.
    pub fn montecarlo(&self, weights: &Weights, lambda: f64, trials: usize, seed: u64) -> Result<RipEstimate> {
        self.check_weights(weights)?;
        if trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        let w2: Vec<f64> = weights.as_slice().iter().map(|w| w * w).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut seen = BTreeSet::new();
        let mut best = 0.0f64;
        for _ in 0..trials {
            order.shuffle(&mut rng);
            let mut budget = 0.0;
            let mut support = Vec::new();
            for &i in &order {
                if budget + w2[i] <= lambda * (1.0 + 1e-12) {
                    budget += w2[i];
                    support.push(i);
                }
            }
            support.sort_unstable();
            if support.is_empty() || !seen.insert(support.clone()) {
                continue;
            }
            best = best.max(self.support_delta(&support)?);
        }
        Ok(RipEstimate {
            lambda,
            delta_star: best,
            method: RipMethod::Montecarlo,
            supports: seen.len(),
            samples_m: self.samples_m,
        })
    }

    fn check_weights(&self, weights: &Weights) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::Dimension(format!("{} weights for {} atoms", weights.len(), self.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RnspReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `‖x_S‖₂ / (ρ/√s ‖x_{S^c}‖_{1,ω} + κ‖Ax‖)` seen.
    pub worst_ratio: f64,
}

/// Searches `(x, S)` pairs with `ω(S) ≤ s` for violations of
/// `‖x_S‖₂ ≤ ρ/√s·‖x_{S^c}‖_{1,ω} + κ‖Ax‖`, where `‖Ax‖² = xᵀ normal x`.
///
/// Candidates mix Gaussian, sparse and near-kernel vectors; `S` is the quasi-best support of `x`.
pub fn rnsp_search(
    normal: &DMatrix<f64>,
    weights: &Weights,
    s: f64,
    rho: f64,
    kappa: f64,
    trials: usize,
    seed: u64,
) -> Result<RnspReport> {
    let n = normal.nrows();
    if weights.len() != n {
        return Err(Error::Dimension(format!("{} weights for {n} atoms", weights.len())));
    }
    let eig = SymmetricEigen::new(normal.clone());
    let mut low: Vec<usize> = (0..n).collect();
    low.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    low.truncate(3.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut x: Vec<f64> = match trial % 3 {
            0 => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            1 => {
                let mut x = vec![0.0; n];
                let k = rng.random_range(1..=n.min(2 * s.ceil() as usize + 1));
                for _ in 0..k {
                    x[rng.random_range(0..n)] = StandardNormal.sample(&mut rng);
                }
                x
            }
            _ => {
                let v = low[rng.random_range(0..low.len())];
                (0..n)
                    .map(|i| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        eig.eigenvectors[(i, v)] + 1e-3 * e
                    })
                    .collect()
            }
        };
        if x.iter().all(|&v| v == 0.0) {
            x[0] = 1.0;
        }
        let approx = quasi_best_sparse_approx(&x, weights, s, 2.0)?;
        let head: f64 = approx.support.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
        let mut rest = x.clone();
        for &i in &approx.support {
            rest[i] = 0.0;
        }
        let tail_l1 = weighted_norm(&rest, weights, 1.0)?;
        let xv = DVector::from_vec(x);
        let ax = (normal * &xv).dot(&xv).max(0.0).sqrt();
        let rhs = rho / s.sqrt() * tail_l1 + kappa * ax;
        let ratio = if rhs > 0.0 { head / rhs } else if head > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > 1.0 + 1e-12 {
            violations += 1;
        }
        worst = worst.max(ratio);
    }
    Ok(RnspReport { trials, violations, worst_ratio: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certification::compute_gram;
    use crate::forward::{draw_samples, CosineModel, DiagonalModel};

    fn diagonal_problem(m: usize, seed: u64) -> (RipProblem, GramCertificate) {
        let model = DiagonalModel::new(vec![0, 0, 1, 1, 2, 2], 0.5);
        let cert = compute_gram(&model, 6, 1).unwrap();
        // Random per-sample perturbation so that AᵀA ≠ GᵀG.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::<f64>::zeros(6 * m, 6);
        for k in 0..m {
            for r in 0..6 {
                for c in 0..6 {
                    let base = if r == c { cert.root[(c, c)] } else { 0.0 };
                    a[(k * 6 + r, c)] = (base + 0.3 * rng.random_range(-1.0..1.0)) / (m as f64).sqrt();
                }
            }
        }
        let normal = a.transpose() * &a;
        (RipProblem::new(&normal, &cert.gram, m).unwrap(), cert)
    }

    #[test]
    fn full_budget_collapses_to_one_eigenproblem() {
        let (p, _) = diagonal_problem(2, 1);
        let w = Weights::uniform(6);
        let full = p.bruteforce(&w, 6.0).unwrap();
        assert_eq!(full.supports, 1);
        assert_eq!(full.delta_star, p.unrestricted().unwrap());
    }

    #[test]
    fn bruteforce_matches_dense_random_inner_search() {
        let (p, cert) = diagonal_problem(2, 2);
        let w = Weights::uniform(6);
        let exact = p.bruteforce(&w, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut best = 0.0f64;
        for a in 0..6 {
            for b in a + 1..6 {
                for _ in 0..10_000 {
                    let mut x = DVector::zeros(6);
                    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    x[a] = phi.cos();
                    x[b] = phi.sin();
                    let g = (&cert.gram * &x).dot(&x);
                    let d = (&p.difference * &x).dot(&x);
                    best = best.max(d.abs() / g);
                }
            }
        }
        assert!(best <= exact.delta_star + 1e-12);
        assert!((exact.delta_star - best).abs() < 1e-6, "{} vs {best}", exact.delta_star);
    }

    #[test]
    fn montecarlo_is_a_deterministic_lower_bound() {
        let (p, _) = diagonal_problem(3, 4);
        let w = Weights::new(vec![1.0, 1.0, 1.2, 1.0, 1.5, 1.0]).unwrap();
        for lambda in [2.0, 3.5] {
            let exact = p.bruteforce(&w, lambda).unwrap();
            let mc = p.montecarlo(&w, lambda, 5, 9).unwrap();
            assert!(mc.delta_star <= exact.delta_star + 1e-10);
            assert_eq!(mc, p.montecarlo(&w, lambda, 5, 9).unwrap());
            let exhaustive = p.montecarlo(&w, lambda, 5000, 9).unwrap();
            assert_eq!(exhaustive.delta_star, exact.delta_star);
        }
    }

    #[test]
    fn bruteforce_is_monotone_in_the_budget() {
        let (p, _) = diagonal_problem(2, 5);
        let w = Weights::new(vec![1.0, 1.3, 1.0, 1.1, 1.0, 1.7]).unwrap();
        let mut prev = 0.0;
        for lambda in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 8.0, 20.0] {
            let d = p.bruteforce(&w, lambda).unwrap().delta_star;
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn diagonal_rescaling_leaves_delta_unchanged() {
        let (p, _) = diagonal_problem(2, 6);
        let w = Weights::uniform(6);
        let z = [0.3, 2.0, 1.1, 0.7, 5.0, 1.9];
        let q = p.scaled(&z).unwrap();
        for lambda in [1.0, 2.0, 3.0, 6.0] {
            let a = p.bruteforce(&w, lambda).unwrap().delta_star;
            let b = q.bruteforce(&w, lambda).unwrap().delta_star;
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn quadrature_samples_have_no_deviation() {
        let model = CosineModel::new(6);
        let cert = compute_gram(&model, 6, 0).unwrap();
        let sys = SampledSystem::on_quadrature(&model, 6, 0).unwrap();
        let p = RipProblem::from_system(&sys, &cert).unwrap();
        assert!(p.bruteforce(&Weights::uniform(6), 3.0).unwrap().delta_star <= 1e-8);
    }

    #[test]
    fn enumeration_is_guarded() {
        let model = CosineModel::new(17);
        let cert = compute_gram(&model, 17, 0).unwrap();
        let p = RipProblem::new(&cert.gram, &cert.gram, 1).unwrap();
        assert!(matches!(p.bruteforce(&Weights::uniform(17), 3.0), Err(Error::Capacity(_))));
    }

    #[test]
    fn no_null_space_violation_when_the_isometry_constant_is_small() {
        let count = 20;
        let model = CosineModel::new(count);
        let cert = compute_gram(&model, count, 0).unwrap();
        let samples = draw_samples(&model, 400, 12);
        let sys = SampledSystem::operator(&model, count, &samples).unwrap();
        let p = RipProblem::from_system(&sys, &cert).unwrap();
        let w = Weights::uniform(count);
        let s = 2.0;
        let (rho_p, delta) = (1.0 / 3.0, 0.5);
        let cond2 = (cert.inv_norm * cert.sigma_max).powi(2);
        let lambda = 5.0 / (rho_p * rho_p) * (1.0 + delta) / (1.0 - delta) * cond2 * s;
        let est = p.bruteforce(&w, lambda.min(count as f64)).unwrap();
        assert!(est.delta_star <= delta, "δ* = {}", est.delta_star);
        let kappa = 3.0 * cert.inv_norm / 2f64.sqrt();
        let report = rnsp_search(&sys.normal_matrix(), &w, s, 0.5, kappa, 10_000, 1).unwrap();
        assert_eq!(report.violations, 0, "worst ratio {}", report.worst_ratio);
    }
}
