use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, ModelChoice, PhantomSpec, Shape};
use crate::error::{Error, Result};
use crate::forward::{FanBeamModel, ForwardModel, FourierWaveletModel, LegendreModel, RadonModel};
use crate::image::{Grid, Image};
use crate::sparsity::Weights;
use crate::stats::linear_fit;
use crate::wavelet::{DictionaryAtlas, WaveletFilter};

/// Sub-pixel samples per axis when rasterizing indicator functions.
const REGION_SUBSAMPLES: usize = 4;

/// A forward model together with the image dictionary behind it, when there is one.
pub struct Setup {
    pub model: Box<dyn ForwardModel>,
    pub atlas: Option<Arc<DictionaryAtlas>>,
    pub weights: Weights,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let filter = WaveletFilter::new(cfg.wavelet_order)?;
        let image_atlas = || DictionaryAtlas::with_default_grid(filter.clone(), cfg.j_max).map(Arc::new);
        let (model, atlas): (Box<dyn ForwardModel>, _) = match cfg.model {
            ModelChoice::Radon => {
                let atlas = image_atlas()?;
                let ds = cfg.detector_step.unwrap_or(atlas.h());
                (Box::new(RadonModel::new(atlas.clone(), ds)?), Some(atlas))
            }
            ModelChoice::Fanbeam => {
                let atlas = image_atlas()?;
                let model = match cfg.detector_step {
                    None => FanBeamModel::with_default_geometry(atlas.clone())?,
                    Some(ds) => {
                        let geometry = crate::forward::fanbeam::default_geometry(&atlas)?;
                        FanBeamModel::new(atlas.clone(), geometry, ds / geometry.rho)?
                    }
                };
                (Box::new(model), Some(atlas))
            }
            ModelChoice::Fourier => (Box::new(FourierWaveletModel::with_default_bandwidth(&filter, cfg.j_max)?), None),
            ModelChoice::Legendre => (Box::new(LegendreModel::new(legendre_count(cfg.j_max))), None),
        };
        let weights = match cfg.model {
            ModelChoice::Legendre => LegendreModel::new(legendre_count(cfg.j_max)).weights(),
            _ => Weights::uniform(model.num_atoms()),
        };
        Ok(Self { model, atlas, weights })
    }

    /// `|Λ_{j0}|`: atoms are ordered by scale.
    pub fn window_len(&self, j0: u32) -> usize {
        (0..self.model.num_atoms()).take_while(|&i| self.model.atom_scale(i) <= j0).count()
    }

    pub fn weights_on(&self, len: usize) -> Weights {
        Weights::new(self.weights.as_slice()[..len].to_vec()).expect("a prefix of valid weights")
    }
}

/// Polynomials `p_1, …, p_{4·2^{j_max}}`.
fn legendre_count(j_max: u32) -> usize {
    4 << j_max
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhantomMeta {
    /// Nonzero coefficients.
    pub s: usize,
    /// `−slope` of `log₂‖P_{Λ_j}^⊥x†‖₂` over `j < j_max`, when defined.
    pub a_effective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    /// `x†` on the leading atoms of the dictionary; later atoms are zero.
    pub coefficients: Vec<f64>,
    /// `u† = Φ*x†` when the model has an image dictionary.
    pub image: Option<Image>,
    pub meta: PhantomMeta,
}

impl Phantom {
    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `‖P_{Λ_j}^⊥x‖₂` for `j = 0..=j_max`.
pub fn tail_norms(x: &[f64], setup: &Setup, j_max: u32) -> Vec<f64> {
    (0..=j_max)
        .map(|j| {
            let start = setup.window_len(j).min(x.len());
            x[start..].iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect()
}

/// `−slope` of `log₂ tail_j` over the scales where the tail is nonzero and `j < j_max`.
fn tail_exponent(tails: &[f64]) -> Option<f64> {
    let (js, logs): (Vec<f64>, Vec<f64>) = tails
        .iter()
        .enumerate()
        .take(tails.len().saturating_sub(1))
        .filter(|(_, &t)| t > 0.0)
        .map(|(j, t)| (j as f64, t.log2()))
        .unzip();
    linear_fit(&js, &logs).ok().map(|f| -f.slope)
}

pub fn make_phantom(cfg: &ExperimentConfig, setup: &Setup) -> Result<Phantom> {
    let coefficients = match &cfg.phantom {
        PhantomSpec::Sparse { s, seed } => sparse_coefficients(setup.window_len(cfg.j0), *s, *seed)?,
        PhantomSpec::Tail { a, seed } => tail_coefficients(setup, cfg.j_max, *a, *seed),
        PhantomSpec::Cartoon { shapes } => {
            let atlas = setup
                .atlas
                .as_ref()
                .ok_or_else(|| Error::Config("cartoon phantoms need an image dictionary".into()))?;
            atlas.analysis(&cartoon_image(atlas.grid(), shapes))?
        }
    };
    let image = match &setup.atlas {
        Some(atlas) => Some(atlas.synthesis(&coefficients)?),
        None => None,
    };
    let tails = tail_norms(&coefficients, setup, cfg.j_max);
    let a_effective = match cfg.phantom {
        PhantomSpec::Sparse { .. } => None,
        _ => tail_exponent(&tails),
    };
    let s = coefficients.iter().filter(|&&v| v != 0.0).count();
    Ok(Phantom { coefficients, image, meta: PhantomMeta { s, a_effective } })
}

fn sparse_coefficients(window: usize, s: usize, seed: u64) -> Result<Vec<f64>> {
    if s > window {
        return Err(Error::Capacity(format!("{s} nonzeros requested on {window} atoms")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; window];
    let mut support = sample(&mut rng, window, s).into_vec();
    support.sort_unstable();
    for i in support {
        x[i] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    Ok(x)
}

/// Per-scale energies `E_0 = 1`, `E_j = 2^{−2a(j−1)}(1 − 2^{−2a})` for `0 < j < j_max` and
/// `E_{j_max} = 2^{−2a(j_max−1)}`, so the tails telescope to `2^{−2aj}` exactly.
fn tail_coefficients(setup: &Setup, j_max: u32, a: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = setup.window_len(j_max);
    let mut x = vec![0.0; n];
    let mut start = 0;
    for j in 0..=j_max {
        let end = setup.window_len(j);
        let energy = if j == 0 {
            1.0
        } else if j < j_max {
            2f64.powf(-2.0 * a * (j - 1) as f64) * (1.0 - 2f64.powf(-2.0 * a))
        } else {
            2f64.powf(-2.0 * a * (j - 1) as f64)
        };
        let count = end - start;
        if count > 0 {
            let magnitude = (energy / count as f64).sqrt();
            for v in &mut x[start..end] {
                *v = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            }
        }
        start = end;
    }
    x
}

fn bump(x: f64, y: f64, center: [f64; 2], radius: f64) -> f64 {
    let r2 = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (radius * radius);
    if r2 < 1.0 { (1.0 - 1.0 / (1.0 - r2)).exp() } else { 0.0 }
}

fn inside_ellipse(x: f64, y: f64, center: [f64; 2], axes: [f64; 2], angle: f64) -> bool {
    let (s, c) = angle.sin_cos();
    let (dx, dy) = (x - center[0], y - center[1]);
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    (u / axes[0]).powi(2) + (v / axes[1]).powi(2) <= 1.0
}

/// The shapes rasterized on `grid`, indicators by area fraction.
pub fn cartoon_image(grid: Grid, shapes: &[Shape]) -> Image {
    let mut img = Image::zeros(grid);
    for shape in shapes {
        let layer = match *shape {
            Shape::Bump { center, radius, amplitude } => {
                let mut l = Image::from_fn(grid, |x, y| bump(x, y, center, radius));
                l.data.iter_mut().for_each(|v| *v *= amplitude);
                l
            }
            Shape::Ellipse { center, axes, angle, amplitude } => {
                let mut l = Image::from_region(grid, REGION_SUBSAMPLES, |x, y| inside_ellipse(x, y, center, axes, angle));
                l.data.iter_mut().for_each(|v| *v *= amplitude);
                l
            }
        };
        img.data.iter_mut().zip(&layer.data).for_each(|(a, b)| *a += b);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::default_cartoon;

    fn haar_setup(j_max: u32) -> (ExperimentConfig, Setup) {
        let cfg = ExperimentConfig { wavelet_order: 1, j0: j_max, j_max, ..Default::default() };
        let setup = Setup::new(&cfg).unwrap();
        (cfg, setup)
    }

    #[test]
    fn sparse_phantom_support() {
        let (mut cfg, setup) = haar_setup(2);
        cfg.phantom = PhantomSpec::Sparse { s: 0, seed: 1 };
        let zero = make_phantom(&cfg, &setup).unwrap();
        assert_eq!(zero.meta.s, 0);
        assert!(zero.image.unwrap().data.iter().all(|&v| v == 0.0));
        cfg.phantom = PhantomSpec::Sparse { s: 7, seed: 1 };
        let p = make_phantom(&cfg, &setup).unwrap();
        assert_eq!(p.meta.s, 7);
        assert!(p.coefficients.iter().all(|&v| v == 0.0 || v.abs() == 1.0));
        cfg.phantom = PhantomSpec::Sparse { s: 100_000, seed: 1 };
        assert!(matches!(make_phantom(&cfg, &setup), Err(Error::Capacity(_))));
    }

    #[test]
    fn tail_phantom_has_exact_tail_law() {
        let (mut cfg, setup) = haar_setup(4);
        cfg.phantom = PhantomSpec::Tail { a: 0.5, seed: 3 };
        let p = make_phantom(&cfg, &setup).unwrap();
        let tails = tail_norms(&p.coefficients, &setup, 4);
        for (j, t) in tails.iter().enumerate().take(4) {
            assert!((t - 2f64.powf(-0.5 * j as f64)).abs() < 1e-12);
        }
        assert!((p.meta.a_effective.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cartoon_image_is_bounded_and_supported_in_disc() {
        let grid = Grid::centered(1.5, 1.0 / 32.0).unwrap();
        let img = cartoon_image(grid, &default_cartoon());
        for row in 0..grid.n {
            for col in 0..grid.n {
                let (x, y) = (grid.coord(col), grid.coord(row));
                if x.hypot(y) > 1.0 {
                    assert_eq!(img.at(col, row), 0.0);
                }
            }
        }
        assert!(img.data.iter().all(|v| v.abs() <= 2.5));
    }
}
