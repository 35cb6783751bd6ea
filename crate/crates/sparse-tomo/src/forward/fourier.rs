//! Fourier samples of periodic 1D wavelets on the torus `[0, 1)`.
//!
//! Scale 0 is the constant function; scale `j ≥ 1` holds the `2^{j−1}` periodized wavelets of
//! level `j − 1`. Frequencies `t ∈ [−N, N]` are drawn with density `1/(max(|t|,1)·C_ν)`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use super::{ForwardModel, ModelKind, Segment};
use crate::error::{Error, Result};
use crate::wavelet::atlas::{cascade, Generator};
use crate::wavelet::WaveletFilter;

#[derive(Debug, Clone)]
pub struct FourierWaveletModel {
    bandwidth: usize,
    scales: Vec<u32>,
    /// `coefficients[i][t + N]` is the Fourier coefficient of atom `i` at frequency `t`.
    coefficients: Vec<Vec<Complex64>>,
    c_nu: f64,
    cdf: Vec<f64>,
}

/// `C_ν = 1 + Σ_{t=1}^{N} 2/t`.
pub fn density_normalizer(bandwidth: usize) -> f64 {
    1.0 + (1..=bandwidth).map(|t| 2.0 / t as f64).sum::<f64>()
}

impl FourierWaveletModel {
    /// Atoms up to scale `j_max`, frequencies `|t| ≤ bandwidth`.
    pub fn new(filter: &WaveletFilter, j_max: u32, bandwidth: usize) -> Result<Self> {
        if bandwidth == 0 {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        // Eight samples per finest translation step, and enough points to resolve |t| ≤ N.
        let level_fine = (j_max + 3).max(usize::BITS - (2 * bandwidth + 1).leading_zeros() + 1);
        let n_pts = 1usize << level_fine;
        let h = 1.0 / n_pts as f64;
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n_pts);
        let mut scales = vec![0];
        let mut rasters = vec![vec![1.0; n_pts]];
        for j in 1..=j_max {
            let level = j - 1;
            let template = cascade(filter, Generator::Wavelet, level_fine - level, level_fine);
            let stride = 1usize << (level_fine - level);
            for n in 0..(1usize << level) {
                let mut r = vec![0.0; n_pts];
                for (k, v) in template.iter().enumerate() {
                    r[(n * stride + k) % n_pts] += v;
                }
                rasters.push(r);
                scales.push(j);
            }
        }
        let nb = bandwidth as isize;
        let coefficients = rasters
            .into_iter()
            .map(|r| {
                let mut buf: Vec<Complex64> = r.into_iter().map(|v| Complex64::new(v * h, 0.0)).collect();
                fft.process(&mut buf);
                (-nb..=nb).map(|t| buf[t.rem_euclid(n_pts as isize) as usize]).collect()
            })
            .collect();
        let c_nu = density_normalizer(bandwidth);
        let mut acc = 0.0;
        let cdf = (-nb..=nb)
            .map(|t| {
                acc += 1.0 / (t.unsigned_abs().max(1) as f64 * c_nu);
                acc
            })
            .collect();
        Ok(Self { bandwidth, scales, coefficients, c_nu, cdf })
    }

    /// Bandwidth `8·2^{j_max}`.
    pub fn with_default_bandwidth(filter: &WaveletFilter, j_max: u32) -> Result<Self> {
        Self::new(filter, j_max, 8usize << j_max)
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn normalizer(&self) -> f64 {
        self.c_nu
    }

    /// `𝓕φ_i(t)`.
    pub fn row(&self, t: i64, i: usize) -> Result<Complex64> {
        if t.unsigned_abs() as usize > self.bandwidth {
            return Err(Error::Index(format!("frequency {t} outside [-{0}, {0}]", self.bandwidth)));
        }
        let atom = self
            .coefficients
            .get(i)
            .ok_or_else(|| Error::Index(format!("atom {i} of {}", self.coefficients.len())))?;
        Ok(atom[(t + self.bandwidth as i64) as usize])
    }
}

impl ForwardModel for FourierWaveletModel {
    fn kind(&self) -> ModelKind {
        ModelKind::FourierWavelet
    }

    fn num_atoms(&self) -> usize {
        self.coefficients.len()
    }

    fn atom_scale(&self, i: usize) -> u32 {
        self.scales[i]
    }

    /// `ℂ` as `ℝ²`: real and imaginary part.
    fn measurement_len(&self) -> usize {
        2
    }

    fn measurement_weight(&self) -> f64 {
        1.0
    }

    fn density(&self, t: f64) -> f64 {
        1.0 / ((t.abs().round() as usize).max(1) as f64 * self.c_nu)
    }

    fn density_lower_bound(&self) -> f64 {
        1.0 / (self.bandwidth as f64 * self.c_nu)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u = rng.random_range(0.0..*self.cdf.last().unwrap());
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        k as f64 - self.bandwidth as f64
    }

    fn response(&self, i: usize, t: f64) -> Segment {
        let c = self.coefficients[i][(t.round() as i64 + self.bandwidth as i64) as usize];
        Segment { start: 0, values: vec![c.re, c.im] }
    }

    /// `μ` is the counting measure on `[−N, N]`.
    fn quadrature(&self, _resolution: usize) -> Vec<(f64, f64)> {
        let nb = self.bandwidth as i64;
        (-nb..=nb).map(|t| (t as f64, 1.0)).collect()
    }
}
