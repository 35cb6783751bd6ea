//! Radon transform at a fixed angle: `R_θ u(s) = ∫ u(s e_θ + y e_θ^⊥) dy`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ForwardModel, ModelKind, Segment};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::wavelet::{DictionaryAtlas, Factor};

/// Symmetric detector grid `s_l = (l − half)·ds`, `l = 0..=2·half`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SGrid {
    pub ds: f64,
    pub half: usize,
}

impl SGrid {
    /// Smallest symmetric grid of step `ds` reaching `radius`.
    pub fn covering(radius: f64, ds: f64) -> Result<Self> {
        if !(ds > 0.0) || !(radius >= 0.0) {
            return Err(Error::Config(format!("invalid detector grid: radius {radius}, step {ds}")));
        }
        Ok(Self { ds, half: (radius / ds).ceil() as usize + 1 })
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, l: usize) -> f64 {
        (l as f64 - self.half as f64) * self.ds
    }

    pub fn radius(&self) -> f64 {
        self.half as f64 * self.ds
    }
}

/// Radon transform at angle `θ` of the bilinear interpolant of atom `i`.
///
/// A separable atom `f(x₁)g(x₂)` projects to the convolution of `f(σ/cos θ)/|cos θ|` with
/// `g(σ/sin θ)/|sin θ|`. On a lattice a few times finer than the pixels, the narrower of the two
/// is integrated exactly over cells and the wider one is sampled at the nodes; the resulting
/// discrete convolution is evaluated only at the detector nodes.
pub fn project_atom(atlas: &DictionaryAtlas, i: usize, theta: f64, grid: &SGrid) -> Segment {
    let [f, g] = atlas.factors(i);
    project_separable(f, g, atlas.h(), theta, grid)
}

/// Internal convolution lattice steps per atlas pixel.
const LATTICE_PER_PIXEL: f64 = 4.0;

pub(crate) fn project_separable(f: Factor, g: Factor, h: f64, theta: f64, grid: &SGrid) -> Segment {
    let r = (LATTICE_PER_PIXEL * grid.ds / h - 1e-9).ceil().max(1.0) as usize;
    project_separable_with(f, g, h, theta, grid, r)
}

fn project_separable_with(f: Factor, g: Factor, h: f64, theta: f64, grid: &SGrid, r: usize) -> Segment {
    let (sn, c) = theta.sin_cos();
    let width_f = (f.values.len() as f64 + 1.0) * h * c.abs();
    let width_g = (g.values.len() as f64 + 1.0) * h * sn.abs();
    let ((narrow, nc), (wide, wc)) = if width_f <= width_g { ((f, c), (g, sn)) } else { ((g, sn), (f, c)) };
    let ri = r as isize;
    let step = grid.ds / r as f64;

    // Cell masses of the narrow factor on the fine lattice, cells centred on q·step.
    let cum = narrow.cumulative(h);
    let (a_lo, a_hi) = (narrow.lo(h) - h, narrow.hi(h) + h);
    let (cells, q0) = if nc.abs() < 1e-14 {
        (vec![cum[cum.len() - 1]], 0isize)
    } else {
        let (s0, s1) = {
            let (p, q) = (a_lo * nc, a_hi * nc);
            (p.min(q), p.max(q))
        };
        let q0 = (s0 / step - 0.5).floor() as isize;
        let q1 = (s1 / step + 0.5).ceil() as isize;
        let anti = |sigma: f64| narrow.antiderivative(sigma / nc, h, &cum);
        let mut prev = anti((q0 as f64 - 0.5) * step);
        let cells = (q0..=q1)
            .map(|q| {
                let next = anti((q as f64 + 0.5) * step);
                let m = (next - prev) * nc.signum();
                prev = next;
                m
            })
            .collect();
        (cells, q0)
    };

    // Point samples of the wide factor's density on the fine lattice.
    let (s0, s1) = {
        let (p, q) = ((wide.lo(h) - h) * wc, (wide.hi(h) + h) * wc);
        (p.min(q), p.max(q))
    };
    let k0 = (s0 / step).floor() as isize;
    let k1 = (s1 / step).ceil() as isize;
    let inv = 1.0 / wc.abs();
    let samples: Vec<f64> = (k0..=k1).map(|k| wide.eval(k as f64 * step / wc, h) * inv).collect();

    // Fine index p = q + k is kept when p ≡ 0 (mod r), at detector offset p / r.
    let p_lo = (q0 + k0).div_euclid(ri) + if (q0 + k0).rem_euclid(ri) == 0 { 0 } else { 1 };
    let p_hi = (q0 + k0 + cells.len() as isize + samples.len() as isize - 2).div_euclid(ri);
    let mut out = vec![0.0; (p_hi - p_lo + 1).max(0) as usize];
    for (a, &m) in cells.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let qa = q0 + a as isize;
        // Smallest k ≥ k0 with qa + k ≡ 0 (mod r).
        let first_k = k0 + (-(qa + k0)).rem_euclid(ri);
        let mut k = first_k;
        while k <= k1 {
            out[((qa + k) / ri - p_lo) as usize] += m * samples[(k - k0) as usize];
            k += ri;
        }
    }
    clip_segment(p_lo + grid.half as isize, out, grid.len())
}

fn clip_segment(first: isize, mut values: Vec<f64>, len: usize) -> Segment {
    let mut start = first;
    if start < 0 {
        let drop = (-start) as usize;
        values.drain(..drop.min(values.len()));
        start = 0;
    }
    let start = start as usize;
    if start >= len {
        return Segment { start: len, values: Vec::new() };
    }
    values.truncate(len - start);
    Segment { start, values }
}

/// Radon transform of an image by rotated bilinear quadrature: equispaced points of step `h/2`
/// along every line, summed with the step as weight.
pub fn radon_image(img: &Image, theta: f64, grid: &SGrid) -> Vec<f64> {
    let g = img.grid;
    let (sn, c) = theta.sin_cos();
    let reach = {
        let a = g.x0.abs().max((g.x0 + (g.n - 1) as f64 * g.h).abs());
        a * std::f64::consts::SQRT_2 + g.h
    };
    let step = 0.5 * g.h;
    (0..grid.len())
        .map(|l| {
            let s = grid.coord(l);
            if s.abs() >= reach {
                return 0.0;
            }
            let half_chord = (reach * reach - s * s).sqrt();
            let count = (half_chord / step).ceil() as isize;
            let mut acc = 0.0;
            for k in -count..=count {
                let y = k as f64 * step;
                acc += img.bilinear(s * c - y * sn, s * sn + y * c);
            }
            acc * step
        })
        .collect()
}

/// Radon transform restricted to the atoms of a dictionary atlas.
#[derive(Debug, Clone)]
pub struct RadonModel {
    atlas: Arc<DictionaryAtlas>,
    grid: SGrid,
}

impl RadonModel {
    /// Detector step `ds`; the grid covers the supports of every atlas atom.
    pub fn new(atlas: Arc<DictionaryAtlas>, ds: f64) -> Result<Self> {
        let radius = atlas.support_radius(atlas.j_max())?;
        let grid = SGrid::covering(radius, ds)?;
        Ok(Self { atlas, grid })
    }

    /// Detector step equal to the atlas pixel step.
    pub fn with_atlas_step(atlas: Arc<DictionaryAtlas>) -> Result<Self> {
        let h = atlas.h();
        Self::new(atlas, h)
    }

    pub fn atlas(&self) -> &DictionaryAtlas {
        &self.atlas
    }

    pub fn shared_atlas(&self) -> Arc<DictionaryAtlas> {
        Arc::clone(&self.atlas)
    }

    pub fn s_grid(&self) -> &SGrid {
        &self.grid
    }
}

impl ForwardModel for RadonModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Radon
    }

    fn num_atoms(&self) -> usize {
        self.atlas.len()
    }

    fn atom_scale(&self, i: usize) -> u32 {
        self.atlas.scale_of(i)
    }

    fn measurement_len(&self) -> usize {
        self.grid.len()
    }

    fn measurement_weight(&self) -> f64 {
        self.grid.ds
    }

    /// `μ` is the uniform probability on `[0, 2π)` and `ν = μ`.
    fn density(&self, _t: f64) -> f64 {
        1.0
    }

    fn density_lower_bound(&self) -> f64 {
        1.0
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(0.0..2.0 * PI)
    }

    fn response(&self, i: usize, t: f64) -> Segment {
        project_atom(&self.atlas, i, t, &self.grid)
    }

    /// Equispaced nodes on `[0, π)`: `R_{θ+π}u(s) = R_θ u(−s)` on the symmetric detector grid,
    /// so every quadratic form in `F_θ` is π-periodic.
    fn quadrature(&self, resolution: usize) -> Vec<(f64, f64)> {
        let n = resolution.max(1);
        (0..n).map(|k| (PI * k as f64 / n as f64, 1.0 / n as f64)).collect()
    }
}
