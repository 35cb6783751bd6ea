//! Measurement families `F_t` with their sampling densities, and the sampled system `A`.

pub mod fanbeam;
pub mod fourier;
pub mod legendre;
pub mod radon;
pub mod synthetic;
pub mod system;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use fanbeam::{FanBeamGeometry, FanBeamModel};
pub use fourier::FourierWaveletModel;
pub use legendre::LegendreModel;
pub use radon::{RadonModel, SGrid};
pub use synthetic::{CosineModel, DiagonalModel};
pub use system::{
    accumulate_normal, assemble_normal_form, assemble_sampled_system, read_dir, CleanData, NormalForm, SampledSystem,
    StoredSystem, StreamedSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Radon,
    Fanbeam,
    FourierWavelet,
    LegendrePoint,
    Synthetic,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Radon => "radon",
            ModelKind::Fanbeam => "fanbeam",
            ModelKind::FourierWavelet => "fourier_wavelet",
            ModelKind::LegendrePoint => "legendre_point",
            ModelKind::Synthetic => "synthetic",
        })
    }
}

/// Contiguous run of nonzero entries of a measurement vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Segment {
    pub start: usize,
    pub values: Vec<f64>,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.start + self.values.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `Σ a_k b_k` over the common index range.
    pub fn dot(&self, other: &Segment) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        if lo >= hi {
            return 0.0;
        }
        let a = &self.values[lo - self.start..hi - self.start];
        let b = &other.values[lo - other.start..hi - other.start];
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// `out[start..end] += scale · values`.
    pub fn add_to(&self, scale: f64, out: &mut [f64]) {
        for (o, v) in out[self.start..self.end()].iter_mut().zip(&self.values) {
            *o += scale * v;
        }
    }

    pub fn dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        self.add_to(1.0, &mut out);
        out
    }
}

/// A family of measurement operators `F_t` composed with a dictionary, together with the
/// sampling law `dν = f_ν dμ` on the parameter domain.
///
/// Measurement vectors live in a discretized `H₂` of dimension [`measurement_len`](Self::measurement_len)
/// whose squared norm is `measurement_weight() · Σ v_k²`.
pub trait ForwardModel: Send + Sync {
    fn kind(&self) -> ModelKind;

    /// Number of dictionary atoms the model can measure, in dictionary order.
    fn num_atoms(&self) -> usize;

    /// Scale label `j` of atom `i`.
    fn atom_scale(&self, i: usize) -> u32;

    fn measurement_len(&self) -> usize;

    fn measurement_weight(&self) -> f64;

    /// `f_ν(t)`.
    fn density(&self, t: f64) -> f64;

    /// `c_ν`, a lower bound of `f_ν` on the whole domain.
    fn density_lower_bound(&self) -> f64;

    /// One draw from `ν`.
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64;

    /// `F_t φ_i` on the measurement grid, without quadrature weight.
    fn response(&self, i: usize, t: f64) -> Segment;

    /// Nodes and weights of a rule for `∫ · dμ`, with about `resolution` nodes where that applies.
    fn quadrature(&self, resolution: usize) -> Vec<(f64, f64)>;

    /// `F_t φ_i` for every `i < count`.
    fn responses(&self, count: usize, t: f64) -> Vec<Segment> {
        (0..count).map(|i| self.response(i, t)).collect()
    }
}

/// `m` i.i.d. draws from the model's sampling law; identical for identical seeds.
pub fn draw_samples(model: &dyn ForwardModel, m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| model.draw(&mut rng)).collect()
}

/// `Q` weights `f_ν(t_k)^{−1/2}`.
pub fn q_weights(model: &dyn ForwardModel, samples: &[f64]) -> Vec<f64> {
    samples.iter().map(|&t| model.density(t).powf(-0.5)).collect()
}
