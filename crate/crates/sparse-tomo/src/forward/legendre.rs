//! Point evaluation of Legendre expansions on `[−1, 1]` with the probability measure `dx/2`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ForwardModel, ModelKind, Segment};
use crate::error::{Error, Result};
use crate::sparsity::Weights;

/// Values `p_1(t), …, p_count(t)` of the polynomials orthonormal for `dx/2`, `p_i = √(2i−1)·P_{i−1}`.
pub fn legendre_values(t: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    // q_{k+1} = (t q_k − a_k q_{k−1}) / a_{k+1}, a_k = k / √(4k² − 1).
    let a = |k: usize| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    };
    let (mut prev, mut cur) = (0.0, 1.0);
    out.push(cur);
    for k in 0..count.saturating_sub(1) {
        let next = (t * cur - if k == 0 { 0.0 } else { a(k) * prev }) / a(k + 1);
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// `p_i(t)` for the 1-based index `i`.
pub fn legendre_row(t: f64, i: usize) -> Result<f64> {
    if !(t.abs() <= 1.0) {
        return Err(Error::Domain(format!("evaluation point {t} is outside [-1, 1]")));
    }
    if i == 0 {
        return Err(Error::Index("polynomial indices start at 1".into()));
    }
    Ok(legendre_values(t, i)[i - 1])
}

/// Gauss–Legendre nodes and weights for `dx/2`, from the eigenvectors of the Jacobi matrix.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut jac = DMatrix::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

#[derive(Debug, Clone)]
pub struct LegendreModel {
    count: usize,
}

impl LegendreModel {
    /// Expansions in `p_1, …, p_count`.
    pub fn new(count: usize) -> Self {
        Self { count }
    }

    /// `ω_i = √(2i−1) = ‖p_i‖_∞`.
    pub fn weights(&self) -> Weights {
        Weights::new((1..=self.count).map(|i| ((2 * i - 1) as f64).sqrt()).collect())
            .expect("weights are at least one")
    }
}

impl ForwardModel for LegendreModel {
    fn kind(&self) -> ModelKind {
        ModelKind::LegendrePoint
    }

    fn num_atoms(&self) -> usize {
        self.count
    }

    fn atom_scale(&self, _i: usize) -> u32 {
        0
    }

    fn measurement_len(&self) -> usize {
        1
    }

    fn measurement_weight(&self) -> f64 {
        1.0
    }

    fn density(&self, _t: f64) -> f64 {
        1.0
    }

    fn density_lower_bound(&self) -> f64 {
        1.0
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(-1.0..=1.0)
    }

    fn response(&self, i: usize, t: f64) -> Segment {
        Segment { start: 0, values: vec![legendre_values(t, i + 1)[i]] }
    }

    fn responses(&self, count: usize, t: f64) -> Vec<Segment> {
        legendre_values(t, count)
            .into_iter()
            .map(|v| Segment { start: 0, values: vec![v] })
            .collect()
    }

    fn quadrature(&self, resolution: usize) -> Vec<(f64, f64)> {
        gauss_legendre(resolution.max(self.count + 1))
    }
}
