//! Small analytic models with known Gram matrices, used to exercise the certification code.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ForwardModel, ModelKind, Segment};

/// `F_t φ_i = 2^{−b j_i} e_i` for every `t`: the Gram matrix is `diag(2^{−2b j_i})`.
#[derive(Debug, Clone)]
pub struct DiagonalModel {
    scales: Vec<u32>,
    b: f64,
}

impl DiagonalModel {
    pub fn new(scales: Vec<u32>, b: f64) -> Self {
        Self { scales, b }
    }
}

impl ForwardModel for DiagonalModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Synthetic
    }

    fn num_atoms(&self) -> usize {
        self.scales.len()
    }

    fn atom_scale(&self, i: usize) -> u32 {
        self.scales[i]
    }

    fn measurement_len(&self) -> usize {
        self.scales.len()
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
        rng.random_range(0.0..1.0)
    }

    fn response(&self, i: usize, _t: f64) -> Segment {
        Segment { start: i, values: vec![2f64.powf(-self.b * self.scales[i] as f64)] }
    }

    fn quadrature(&self, _resolution: usize) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0)]
    }
}

/// Scalar samples `F_t φ_i = √2 cos(2π (i+1) t)` with `t` uniform on `[0, 1)`: a bounded
/// orthonormal system whose Gram matrix is the identity.
#[derive(Debug, Clone)]
pub struct CosineModel {
    count: usize,
}

impl CosineModel {
    pub fn new(count: usize) -> Self {
        Self { count }
    }
}

impl ForwardModel for CosineModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Synthetic
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
        rng.random_range(0.0..1.0)
    }

    fn response(&self, i: usize, t: f64) -> Segment {
        Segment { start: 0, values: vec![2f64.sqrt() * (2.0 * PI * (i + 1) as f64 * t).cos()] }
    }

    /// Equispaced rule, exact for the products of two atoms once it has more than `2·count` nodes.
    fn quadrature(&self, resolution: usize) -> Vec<(f64, f64)> {
        let n = resolution.max(2 * self.count + 2);
        (0..n).map(|k| (k as f64 / n as f64, 1.0 / n as f64)).collect()
    }
}
