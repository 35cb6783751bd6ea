//! Separable 2D Daubechies atoms meeting the unit disc, rasterized by the cascade scheme.
//!
//! Scale 0 holds all four tensor families `χχ, ψχ, χψ, ψψ` at dilation 1/2 (translates on a
//! lattice of spacing 2); scale `j ≥ 1` holds the three detail families at dilation `2^{j−1}`.
//! The union is an orthonormal basis of `L²(ℝ²)` restricted to atoms whose support box meets B₁,
//! and every atom at scale `j` is a dilate by `2^j` of a scale-0 atom.

use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::filter::WaveletFilter;
use crate::error::{Error, Result};
use crate::image::{Grid, Image};

/// Label of an atom: scale `j`, orientation `ε` (0 = scaling, 1 = ψ⊗χ, 2 = χ⊗ψ, 3 = ψ⊗ψ) and
/// translation `(n1, n2)`. The derived order sorts by scale first, so every truncation set
/// `Λ_{j0}` is a prefix of the atlas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomIndex {
    pub scale: u32,
    pub orientation: u8,
    pub n1: i32,
    pub n2: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Generator {
    Scaling,
    Wavelet,
}

fn generators(orientation: u8) -> [Generator; 2] {
    use Generator::*;
    match orientation {
        0 => [Scaling, Scaling],
        1 => [Wavelet, Scaling],
        2 => [Scaling, Wavelet],
        _ => [Wavelet, Wavelet],
    }
}

/// A 1D factor of an atom: `values[k]` is the sample at `x = (start + k)·h`; the continuous
/// atom factor is the piecewise-linear interpolant of these samples.
#[derive(Debug, Clone, Copy)]
pub struct Factor<'a> {
    pub start: isize,
    pub values: &'a [f64],
}

impl Factor<'_> {
    pub fn lo(&self, h: f64) -> f64 {
        self.start as f64 * h
    }

    pub fn hi(&self, h: f64) -> f64 {
        (self.start + self.values.len() as isize - 1) as f64 * h
    }

    /// Piecewise-linear interpolant at `x`.
    pub fn eval(&self, x: f64, h: f64) -> f64 {
        let u = x / h - self.start as f64;
        if !(u > -1.0) || u >= self.values.len() as f64 {
            return 0.0;
        }
        let k = u.floor();
        let f = u - k;
        let k = k as isize;
        let at = |i: isize| {
            if i < 0 || i as usize >= self.values.len() {
                0.0
            } else {
                self.values[i as usize]
            }
        };
        (1.0 - f) * at(k) + f * at(k + 1)
    }

    /// `∫_{−∞}^{x}` of the interpolant.
    pub fn antiderivative(&self, x: f64, h: f64, cumulative: &[f64]) -> f64 {
        // cumulative[k] = ∫ up to node k (trapezoid of the interpolant, exact).
        let u = x / h - self.start as f64;
        let n = self.values.len();
        if !(u > -1.0) {
            return 0.0;
        }
        if u >= n as f64 {
            return cumulative[n + 1];
        }
        let k = u.floor();
        let f = u - k;
        let k = k as isize;
        let v0 = if k < 0 { 0.0 } else { self.values[k as usize] };
        let v1 = if (k + 1) as usize >= n { 0.0 } else { self.values[(k + 1) as usize] };
        // cumulative[k + 1] is the integral up to node k; cumulative[0] sits one step before
        // the first sample, where the hat of sample 0 starts.
        let base = cumulative[(k + 1) as usize];
        base + h * (v0 * f + 0.5 * (v1 - v0) * f * f)
    }

    /// Exact running integral of the interpolant: entry `k` is the integral up to node
    /// `start + k − 1`, and the extra last entry is the total.
    pub fn cumulative(&self, h: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 2);
        out.push(0.0);
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &v in self.values {
            acc += 0.5 * h * (prev + v);
            out.push(acc);
            prev = v;
        }
        out.push(acc + 0.5 * h * prev);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct AtomLayout {
    template: [usize; 2],
    start: [isize; 2],
}

/// The dictionary restricted to the atoms meeting B₁, together with their rasterizations.
#[derive(Debug, Clone)]
pub struct DictionaryAtlas {
    filter: WaveletFilter,
    j_max: u32,
    grid: Grid,
    levels_fine: u32,
    gamma: Vec<AtomIndex>,
    layout: Vec<AtomLayout>,
    templates: Vec<Vec<f64>>,
    scale_end: Vec<usize>,
}

/// Dyadic exponent `R` with `h = 2^{−R}`.
fn dyadic_level(h: f64) -> Option<u32> {
    let r = -h.log2();
    (r.is_finite() && r >= 0.0 && (r - r.round()).abs() < 1e-12).then(|| r.round() as u32)
}

/// Cascade samples of `2^{d/2} g(2^d x)` on the grid of step `2^{−level_fine}`, where `g` is the
/// generator and `d` the dilation level; sample `k` sits at `x = k·2^{−level_fine}`.
pub(crate) fn cascade(filter: &WaveletFilter, gen: Generator, steps: u32, level_fine: u32) -> Vec<f64> {
    let h = &filter.low_pass;
    let mut c = match gen {
        Generator::Scaling => filter.low_pass.clone(),
        Generator::Wavelet => filter.high_pass.clone(),
    };
    for _ in 1..steps {
        let mut next = vec![0.0; 2 * (c.len() - 1) + h.len()];
        for (l, cl) in c.iter().enumerate() {
            for (k, hk) in h.iter().enumerate() {
                next[2 * l + k] += cl * hk;
            }
        }
        c = next;
    }
    let amp = 2f64.powf(level_fine as f64 / 2.0);
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    // The cascade is orthonormal, so `norm` is 1 up to rounding; dividing removes that rounding.
    c.iter().map(|v| v * amp / norm).collect()
}

impl DictionaryAtlas {
    /// Builds the atlas with finest scale `j_max` on a grid of dyadic step `h ≤ 2^{−(j_max+2)}`.
    pub fn new(filter: WaveletFilter, j_max: u32, h: f64) -> Result<Self> {
        let level_fine = dyadic_level(h)
            .ok_or_else(|| Error::Config(format!("grid step {h} is not a power of two")))?;
        if level_fine < j_max + 2 {
            return Err(Error::Config(format!(
                "grid step {h} is too coarse for j_max = {j_max}; need at most 2^-{}",
                j_max + 2
            )));
        }
        let l = filter.support_length() as i64;
        let mut templates = Vec::new();
        let mut gamma = Vec::new();
        let mut layout = Vec::new();
        let mut scale_end = Vec::new();
        let mut extent: f64 = 1.0;
        for j in 0..=j_max {
            // Dilation level of the 1D factors: translates on a lattice of spacing 2^{−level}.
            let level = j as i32 - 1;
            let steps = (level_fine as i32 - level) as u32;
            let stride = 1isize << steps;
            let spacing = 2f64.powi(-level);
            let t_scaling = templates.len();
            templates.push(cascade(&filter, Generator::Scaling, steps, level_fine));
            let t_wavelet = templates.len();
            templates.push(cascade(&filter, Generator::Wavelet, steps, level_fine));
            let n_lo = (-1.0 / spacing).floor() as i64 - l - 1;
            let n_hi = (1.0 / spacing).ceil() as i64 + 1;
            let orientations: &[u8] = if j == 0 { &[0, 1, 2, 3] } else { &[1, 2, 3] };
            for &eps in orientations {
                for n1 in n_lo..=n_hi {
                    for n2 in n_lo..=n_hi {
                        let b1 = (n1 as f64 * spacing, (n1 + l) as f64 * spacing);
                        let b2 = (n2 as f64 * spacing, (n2 + l) as f64 * spacing);
                        let d1 = (b1.0.max(0.0)).max(-b1.1);
                        let d2 = (b2.0.max(0.0)).max(-b2.1);
                        if d1 * d1 + d2 * d2 >= 1.0 {
                            continue;
                        }
                        extent = extent.max(b1.0.abs()).max(b1.1.abs()).max(b2.0.abs()).max(b2.1.abs());
                        let g = generators(eps);
                        let pick = |gen: Generator| match gen {
                            Generator::Scaling => t_scaling,
                            Generator::Wavelet => t_wavelet,
                        };
                        gamma.push(AtomIndex { scale: j, orientation: eps, n1: n1 as i32, n2: n2 as i32 });
                        layout.push(AtomLayout {
                            template: [pick(g[0]), pick(g[1])],
                            start: [n1 as isize * stride, n2 as isize * stride],
                        });
                    }
                }
            }
            scale_end.push(gamma.len());
        }
        // Keep one spare cell so interpolants vanish at the grid border.
        let grid = Grid::centered(extent.ceil() + 1.0, h)?;
        Ok(Self { filter, j_max, grid, levels_fine: level_fine, gamma, layout, templates, scale_end })
    }

    /// Atlas with the default grid step `2^{−(j_max+2)}`, eight samples per finest translation step.
    pub fn with_default_grid(filter: WaveletFilter, j_max: u32) -> Result<Self> {
        Self::new(filter, j_max, default_step(j_max))
    }

    pub fn filter(&self) -> &WaveletFilter {
        &self.filter
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn indices(&self) -> &[AtomIndex] {
        &self.gamma
    }

    pub fn index(&self, i: usize) -> AtomIndex {
        self.gamma[i]
    }

    pub fn scale_of(&self, i: usize) -> u32 {
        self.gamma[i].scale
    }

    /// Scales of all atoms, in atlas order.
    pub fn scales(&self) -> Vec<u32> {
        self.gamma.iter().map(|a| a.scale).collect()
    }

    /// Number of atoms at each scale `0..=j_max`.
    pub fn scale_counts(&self) -> Vec<usize> {
        let mut prev = 0;
        self.scale_end
            .iter()
            .map(|&e| {
                let c = e - prev;
                prev = e;
                c
            })
            .collect()
    }

    /// Atom range `a..b` of scale `j`.
    pub fn scale_range(&self, j: u32) -> std::ops::Range<usize> {
        let start = if j == 0 { 0 } else { self.scale_end[j as usize - 1] };
        start..self.scale_end[j as usize]
    }

    /// `|Λ_{j0}|`; the truncation set is the atlas prefix of this length.
    pub fn truncation_len(&self, j0: u32) -> Result<usize> {
        if j0 > self.j_max {
            return Err(Error::Index(format!("j0 = {j0} exceeds j_max = {}", self.j_max)));
        }
        Ok(self.scale_end[j0 as usize])
    }

    /// `Λ_{j0} = {(j, n) ∈ Γ : j ≤ j0}`.
    pub fn truncation_set(&self, j0: u32) -> Result<&[AtomIndex]> {
        Ok(&self.gamma[..self.truncation_len(j0)?])
    }

    /// Side of the support square at scale `j`: `2L·2^{−j}`.
    pub fn support_side(&self, j: u32) -> f64 {
        2.0 * self.filter.support_length() as f64 * 2f64.powi(-(j as i32))
    }

    pub fn factors(&self, i: usize) -> [Factor<'_>; 2] {
        let lay = &self.layout[i];
        [0, 1].map(|a| Factor { start: lay.start[a], values: &self.templates[lay.template[a]] })
    }

    /// Continuum support square `[x1_lo, x1_hi, x2_lo, x2_hi]` of the atom, from its label.
    pub fn support_square(&self, i: usize) -> [f64; 4] {
        let a = self.gamma[i];
        let spacing = 2f64.powi(1 - a.scale as i32);
        let l = self.filter.support_length() as f64;
        let (n1, n2) = (a.n1 as f64, a.n2 as f64);
        [n1 * spacing, (n1 + l) * spacing, n2 * spacing, (n2 + l) * spacing]
    }

    /// Box `[x1_lo, x1_hi, x2_lo, x2_hi]` outside which the interpolated raster atom vanishes.
    pub fn support_box(&self, i: usize) -> [f64; 4] {
        let h = self.grid.h;
        let [f, g] = self.factors(i);
        [f.lo(h) - h, f.hi(h) + h, g.lo(h) - h, g.hi(h) + h]
    }

    /// Largest distance from the origin to a corner of any support box in `Λ_{j0}`.
    pub fn support_radius(&self, j0: u32) -> Result<f64> {
        let n = self.truncation_len(j0)?;
        Ok((0..n)
            .map(|i| {
                let b = self.support_box(i);
                let x = b[0].abs().max(b[1].abs());
                let y = b[2].abs().max(b[3].abs());
                (x * x + y * y).sqrt()
            })
            .fold(0.0, f64::max))
    }

    /// Pixel column/row of the first factor sample.
    fn pixel_start(&self, f: &Factor) -> usize {
        (f.start + self.grid.index_of_origin()) as usize
    }

    pub fn rasterize(&self, i: usize) -> Image {
        let mut img = Image::zeros(self.grid);
        self.accumulate(i, 1.0, &mut img);
        img
    }

    fn accumulate(&self, i: usize, coef: f64, img: &mut Image) {
        let [f, g] = self.factors(i);
        let (c0, r0) = (self.pixel_start(&f), self.pixel_start(&g));
        let n = self.grid.n;
        for (dr, gv) in g.values.iter().enumerate() {
            let row = &mut img.data[(r0 + dr) * n + c0..(r0 + dr) * n + c0 + f.values.len()];
            let a = coef * gv;
            for (px, fv) in row.iter_mut().zip(f.values) {
                *px += a * fv;
            }
        }
    }

    fn check_grid(&self, u: &Image) -> Result<()> {
        if u.grid != self.grid {
            return Err(Error::Dimension("image is not on the atlas grid".into()));
        }
        Ok(())
    }

    /// Coefficients `⟨u, φ_i⟩` for the first `count` atoms, with quadrature weight `h²`.
    pub fn analysis_prefix(&self, u: &Image, count: usize) -> Result<Vec<f64>> {
        self.check_grid(u)?;
        if count > self.len() {
            return Err(Error::Dimension(format!("{count} atoms requested, atlas has {}", self.len())));
        }
        let n = self.grid.n;
        let h2 = self.grid.h * self.grid.h;
        Ok((0..count)
            .map(|i| {
                let [f, g] = self.factors(i);
                let (c0, r0) = (self.pixel_start(&f), self.pixel_start(&g));
                let mut acc = 0.0;
                for (dr, gv) in g.values.iter().enumerate() {
                    let row = &u.data[(r0 + dr) * n + c0..(r0 + dr) * n + c0 + f.values.len()];
                    let dot: f64 = row.iter().zip(f.values).map(|(a, b)| a * b).sum();
                    acc += gv * dot;
                }
                acc * h2
            })
            .collect())
    }

    /// `Φu` over the whole atlas.
    pub fn analysis(&self, u: &Image) -> Result<Vec<f64>> {
        self.analysis_prefix(u, self.len())
    }

    /// `Φ*x = Σ x_i φ_i`; `x` may be shorter than the atlas, covering a prefix such as `Λ_{j0}`.
    pub fn synthesis(&self, x: &[f64]) -> Result<Image> {
        if x.len() > self.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for an atlas of {} atoms",
                x.len(),
                self.len()
            )));
        }
        let mut img = Image::zeros(self.grid);
        for (i, &c) in x.iter().enumerate() {
            if c != 0.0 {
                self.accumulate(i, c, &mut img);
            }
        }
        Ok(img)
    }

    /// Writes the text header and the row-major patches (64-bit little-endian floats).
    pub fn export(&self, header: &mut impl Write, patches: &mut impl Write) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "sparse-tomo atlas v1");
        let _ = writeln!(text, "filter_order {}", self.filter.order);
        let _ = writeln!(text, "j_max {}", self.j_max);
        let _ = writeln!(text, "h {:e}", self.grid.h);
        let _ = writeln!(text, "grid_x0 {:e}", self.grid.x0);
        let _ = writeln!(text, "grid_n {}", self.grid.n);
        let _ = writeln!(text, "atoms {}", self.len());
        let _ = writeln!(text, "# scale orientation n1 n2 col0 row0 cols rows offset");
        let mut offset = 0usize;
        for i in 0..self.len() {
            let a = self.gamma[i];
            let [f, g] = self.factors(i);
            let _ = writeln!(
                text,
                "{} {} {} {} {} {} {} {} {}",
                a.scale,
                a.orientation,
                a.n1,
                a.n2,
                self.pixel_start(&f),
                self.pixel_start(&g),
                f.values.len(),
                g.values.len(),
                offset
            );
            offset += f.values.len() * g.values.len();
            let mut buf = Vec::with_capacity(8 * f.values.len() * g.values.len());
            for gv in g.values {
                for fv in f.values {
                    buf.extend_from_slice(&(gv * fv).to_le_bytes());
                }
            }
            patches.write_all(&buf)?;
        }
        header.write_all(text.as_bytes())?;
        Ok(())
    }

    /// Reads an exported atlas, rebuilding it from the header parameters and checking every
    /// index and patch value against the file.
    pub fn import(header: impl BufRead, mut patches: impl Read) -> Result<Self> {
        let mut lines = header.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("atlas header ended early".into()))?
                .map_err(Error::from)
        };
        if next()?.trim() != "sparse-tomo atlas v1" {
            return Err(Error::Parse("not an atlas header".into()));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = next()?;
            let mut it = line.split_whitespace();
            match (it.next(), it.next()) {
                (Some(k), Some(v)) if k == name => Ok(v.to_string()),
                _ => Err(Error::Parse(format!("expected `{name}`, found `{line}`"))),
            }
        };
        let parse_err = |e: std::num::ParseIntError| Error::Parse(e.to_string());
        let order: usize = field("filter_order")?.parse().map_err(parse_err)?;
        let j_max: u32 = field("j_max")?.parse().map_err(parse_err)?;
        let h: f64 = field("h")?.parse().map_err(|e| Error::Parse(format!("{e}")))?;
        let _x0 = field("grid_x0")?;
        let _n = field("grid_n")?;
        let count: usize = field("atoms")?.parse().map_err(parse_err)?;
        let atlas = Self::new(WaveletFilter::new(order)?, j_max, h)?;
        if count != atlas.len() {
            return Err(Error::Parse(format!("header lists {count} atoms, rebuild gives {}", atlas.len())));
        }
        let _comment = next()?;
        let mut buf = Vec::new();
        for i in 0..count {
            let line = next()?;
            let v: Vec<i64> = line
                .split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            let a = atlas.gamma[i];
            let [f, g] = atlas.factors(i);
            let expect = [
                a.scale as i64,
                a.orientation as i64,
                a.n1 as i64,
                a.n2 as i64,
                atlas.pixel_start(&f) as i64,
                atlas.pixel_start(&g) as i64,
                f.values.len() as i64,
                g.values.len() as i64,
            ];
            if v.len() != 9 || v[..8] != expect {
                return Err(Error::Parse(format!("atom {i} header row `{line}` does not match")));
            }
            buf.resize(8 * f.values.len() * g.values.len(), 0);
            patches.read_exact(&mut buf)?;
            let mut chunks = buf.chunks_exact(8);
            for gv in g.values {
                for fv in f.values {
                    let stored = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
                    if (stored - gv * fv).abs() > 1e-12 {
                        return Err(Error::Parse(format!("atom {i} patch values differ from the rebuild")));
                    }
                }
            }
        }
        Ok(atlas)
    }

    /// Dyadic exponent of the grid step.
    pub fn grid_level(&self) -> u32 {
        self.levels_fine
    }
}

/// Default grid step `2^{−(j_max+2)}`.
pub fn default_step(j_max: u32) -> f64 {
    2f64.powi(-(j_max as i32 + 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atlas(order: usize, j_max: u32) -> DictionaryAtlas {
        DictionaryAtlas::with_default_grid(WaveletFilter::new(order).unwrap(), j_max).unwrap()
    }

    #[test]
    fn haar_counts_follow_the_lattice() {
        // Haar boxes [n s, (n+1) s] meet the open unit disc: scale 0 uses s = 2 → 2x2 translates.
        let a = atlas(1, 2);
        assert_eq!(a.scale_counts(), vec![16, 12, 48]);
    }

    #[test]
    fn single_scale_atlas_has_only_coarse_atoms() {
        let a = atlas(3, 0);
        assert!(a.indices().iter().all(|i| i.scale == 0));
        assert_eq!(a.truncation_len(0).unwrap(), a.len());
        assert!(a.indices().iter().any(|i| i.orientation == 0));
    }

    #[test]
    fn rejects_coarse_or_non_dyadic_grids() {
        let f = WaveletFilter::new(2).unwrap();
        assert!(matches!(DictionaryAtlas::new(f.clone(), 3, 1.0 / 16.0), Err(Error::Config(_))));
        assert!(matches!(DictionaryAtlas::new(f, 1, 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn truncation_sets_are_prefixes() {
        let a = atlas(2, 3);
        assert_eq!(a.truncation_set(3).unwrap().len(), a.len());
        assert!(a.truncation_set(0).unwrap().iter().all(|i| i.scale == 0));
        assert!(matches!(a.truncation_set(4), Err(Error::Index(_))));
        let l2 = a.truncation_set(2).unwrap();
        assert!(l2.iter().all(|i| i.scale <= 2));
        assert_eq!(l2.len(), a.indices().iter().filter(|i| i.scale <= 2).count());
    }

    #[test]
    fn discrete_gram_is_identity() {
        let a = atlas(2, 2);
        let imgs: Vec<Image> = (0..a.len()).map(|i| a.rasterize(i)).collect();
        let tol = 5.0 * a.h();
        let mut worst_off: f64 = 0.0;
        for i in 0..a.len() {
            let d = imgs[i].dot(&imgs[i]).unwrap();
            assert!((d - 1.0).abs() < 1e-12, "atom {i} norm² {d}");
            for j in (i + 1)..a.len() {
                worst_off = worst_off.max(imgs[i].dot(&imgs[j]).unwrap().abs());
            }
        }
        assert!(worst_off < 1e-12 && worst_off < tol, "off-diagonal {worst_off}");
    }

    #[test]
    fn continuum_norm_converges_to_one() {
        // Quadrature oracle: fine-grid trapezoid of the squared interpolant at two resolutions.
        let f = WaveletFilter::new(3).unwrap();
        let coarse = DictionaryAtlas::new(f.clone(), 1, 2f64.powi(-4)).unwrap();
        let fine = DictionaryAtlas::new(f, 1, 2f64.powi(-6)).unwrap();
        for a in [&coarse, &fine] {
            let h = a.h();
            for i in [0, a.len() / 2, a.len() - 1] {
                let [fx, gx] = a.factors(i);
                let sq = |fac: &Factor| {
                    // Exact ∫ of the squared piecewise-linear interpolant.
                    let mut prev = 0.0;
                    let mut acc = 0.0;
                    for &v in fac.values.iter().chain(std::iter::once(&0.0)) {
                        acc += h * (prev * prev + prev * v + v * v) / 3.0;
                        prev = v;
                    }
                    acc
                };
                let norm2 = sq(&fx) * sq(&gx);
                assert!((norm2.sqrt() - 1.0).abs() <= 5.0 * h, "h = {h}, atom {i}: {norm2}");
            }
        }
    }

    #[test]
    fn atoms_vanish_outside_their_support_square() {
        let a = atlas(3, 2);
        for i in (0..a.len()).step_by(7) {
            let img = a.rasterize(i);
            let (c0, c1, r0, r1) = img.nonzero_box().unwrap();
            let side = a.support_side(a.scale_of(i));
            let g = a.grid();
            assert!(g.coord(c1) - g.coord(c0) <= side + 1e-12);
            assert!(g.coord(r1) - g.coord(r0) <= side + 1e-12);
        }
    }

    #[test]
    fn every_atom_meets_the_unit_disc() {
        let a = atlas(3, 3);
        for i in 0..a.len() {
            let b = a.support_square(i);
            let r = a.support_box(i);
            assert!(r[0] >= b[0] - a.h() && r[1] <= b[1] + a.h());
            let dx = b[0].max(0.0).max(-b[1]);
            let dy = b[2].max(0.0).max(-b[3]);
            assert!(dx * dx + dy * dy < 1.0);
        }
    }

    #[test]
    fn analysis_recovers_coefficients() {
        let a = atlas(2, 2);
        let zero = a.analysis(&Image::zeros(a.grid())).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let (p, q) = (3, a.len() - 5);
        let mut x = vec![0.0; a.len()];
        x[p] = 1.0;
        x[q] = 2.0;
        let c = a.analysis(&a.synthesis(&x).unwrap()).unwrap();
        let tol = 5.0 * a.h();
        for (i, v) in c.iter().enumerate() {
            assert!((v - x[i]).abs() <= tol, "coefficient {i}: {v}");
        }
        assert_eq!(a.synthesis(&x[..1]).unwrap(), Image::zeros(a.grid()));
        let mut e = vec![0.0; a.len()];
        e[p] = 1.0;
        assert_eq!(a.synthesis(&e).unwrap(), a.rasterize(p));
    }

    #[test]
    fn synthesis_is_the_adjoint_of_analysis() {
        let a = atlas(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..a.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut u = Image::zeros(a.grid());
            u.data.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            let lhs = a.synthesis(&x).unwrap().dot(&u).unwrap();
            let rhs: f64 = a.analysis(&u).unwrap().iter().zip(&x).map(|(p, q)| p * q).sum();
            let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt() * u.norm();
            assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        let a = atlas(3, 1);
        let h = a.h();
        let [f, _] = a.factors(a.len() - 1);
        let cum = f.cumulative(h);
        let lo = f.lo(h) - 2.0 * h;
        let hi = f.hi(h) + 2.0 * h;
        let total = f.antiderivative(hi, h, &cum);
        assert!((f.antiderivative(lo, h, &cum)).abs() < 1e-15);
        let n = 20000;
        let dx = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let x = lo + (k as f64 + 0.5) * dx;
            acc += f.eval(x, h) * dx;
            if k % 997 == 0 {
                let partial = f.antiderivative(lo + (k + 1) as f64 * dx, h, &cum);
                assert!((partial - acc).abs() < 1e-6, "{partial} vs {acc}");
            }
        }
        assert!((total - acc).abs() < 1e-6);
    }

    #[test]
    fn export_import_round_trip() {
        let a = atlas(2, 1);
        let mut header = Vec::new();
        let mut patches = Vec::new();
        a.export(&mut header, &mut patches).unwrap();
        let b = DictionaryAtlas::import(&header[..], &patches[..]).unwrap();
        assert_eq!(a.indices(), b.indices());
        patches[8 * 17] = patches[8 * 17].wrapping_add(1);
        patches[8 * 17 + 7] ^= 0x40;
        assert!(DictionaryAtlas::import(&header[..], &patches[..]).is_err());
    }
}
