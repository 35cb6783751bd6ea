//! Fan-beam transform from a source at angle `θ`: `D_θ u(α) = ∫ u(ρ e_θ + t e_{θ+α}) dt`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ForwardModel, ModelKind, Segment};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::wavelet::DictionaryAtlas;

/// Source radius `ρ` and object radius `d`, with `0 < d < ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanBeamGeometry {
    pub rho: f64,
    pub d: f64,
}

impl FanBeamGeometry {
    pub fn new(rho: f64, d: f64) -> Result<Self> {
        if !(d > 0.0 && d < rho && rho.is_finite()) {
            return Err(Error::Config(format!("fan-beam geometry needs 0 < d < ρ, got d = {d}, ρ = {rho}")));
        }
        Ok(Self { rho, d })
    }

    /// Largest fan angle whose ray still meets the disc of radius `d`.
    pub fn alpha_max(&self) -> f64 {
        (self.d / self.rho).asin()
    }
}

/// Symmetric fan-angle grid `α_l = (l − half)·dalpha` covering `[−α_max, α_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub dalpha: f64,
    pub half: usize,
}

impl AlphaGrid {
    pub fn covering(geometry: &FanBeamGeometry, dalpha: f64) -> Result<Self> {
        if !(dalpha > 0.0) {
            return Err(Error::Config(format!("fan-angle step {dalpha} must be positive")));
        }
        Ok(Self { dalpha, half: (geometry.alpha_max() / dalpha).ceil() as usize })
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, l: usize) -> f64 {
        (l as f64 - self.half as f64) * self.dalpha
    }
}

/// Parameter interval where the line `p + t·u` crosses the box `[x_lo, x_hi] × [y_lo, y_hi]`.
fn clip_to_box(p: [f64; 2], u: [f64; 2], b: [f64; 4]) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for axis in 0..2 {
        let (lo, hi) = (b[2 * axis], b[2 * axis + 1]);
        if u[axis].abs() < 1e-15 {
            if p[axis] < lo || p[axis] > hi {
                return None;
            }
            continue;
        }
        let a = (lo - p[axis]) / u[axis];
        let c = (hi - p[axis]) / u[axis];
        t0 = t0.max(a.min(c));
        t1 = t1.min(a.max(c));
    }
    (t1 > t0).then_some((t0, t1))
}

/// Fan angle of the line through the source and `q`, folded into `(−π/2, π/2]`.
fn fan_angle(source: [f64; 2], theta: f64, q: [f64; 2]) -> f64 {
    let dir = (q[1] - source[1]).atan2(q[0] - source[0]);
    let mut a = (dir - theta).rem_euclid(PI);
    if a > PI / 2.0 {
        a -= PI;
    }
    a
}

/// Fan-beam samples of atom `i` from the source at angle `θ`, by line quadrature of step `h/2`.
pub fn fanbeam_atom(
    atlas: &DictionaryAtlas,
    i: usize,
    theta: f64,
    geometry: &FanBeamGeometry,
    grid: &AlphaGrid,
) -> Result<Segment> {
    let b = atlas.support_box(i);
    let corners = [[b[0], b[2]], [b[0], b[3]], [b[1], b[2]], [b[1], b[3]]];
    if corners.iter().any(|c| c[0].hypot(c[1]) > geometry.d) {
        return Err(Error::Domain(format!(
            "atom {i} is not contained in the object disc of radius {}",
            geometry.d
        )));
    }
    let h = atlas.h();
    let [f, g] = atlas.factors(i);
    let source = [geometry.rho * theta.cos(), geometry.rho * theta.sin()];
    let angles = corners.map(|c| fan_angle(source, theta, c));
    let a_lo = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let a_hi = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let l0 = ((a_lo / grid.dalpha).floor() as isize + grid.half as isize).max(0) as usize;
    let l1 = (((a_hi / grid.dalpha).ceil() as isize + grid.half as isize).max(0) as usize).min(grid.len() - 1);
    let step = 0.5 * h;
    let values = (l0..=l1)
        .map(|l| {
            let phi = theta + grid.coord(l);
            let u = [phi.cos(), phi.sin()];
            let Some((t0, t1)) = clip_to_box(source, u, b) else {
                return 0.0;
            };
            let k = ((t1 - t0) / step).ceil().max(1.0) as usize;
            let dt = (t1 - t0) / k as f64;
            // The interpolant vanishes on the box boundary, so the trapezoid rule is a plain sum.
            (1..k)
                .map(|q| {
                    let t = t0 + q as f64 * dt;
                    f.eval(source[0] + t * u[0], h) * g.eval(source[1] + t * u[1], h)
                })
                .sum::<f64>()
                * dt
        })
        .collect();
    Ok(Segment { start: l0, values })
}

/// Fan-beam samples of an image by rotated bilinear quadrature of step `h/2`.
pub fn fanbeam_image(img: &Image, theta: f64, geometry: &FanBeamGeometry, grid: &AlphaGrid) -> Vec<f64> {
    let gr = img.grid;
    let reach = gr.x0.abs().max((gr.x0 + (gr.n - 1) as f64 * gr.h).abs()) * std::f64::consts::SQRT_2 + gr.h;
    let source = [geometry.rho * theta.cos(), geometry.rho * theta.sin()];
    let step = 0.5 * gr.h;
    (0..grid.len())
        .map(|l| {
            let phi = theta + grid.coord(l);
            let u = [phi.cos(), phi.sin()];
            let mid = -(source[0] * u[0] + source[1] * u[1]);
            let dist2 = geometry.rho * geometry.rho - mid * mid;
            if dist2 >= reach * reach {
                return 0.0;
            }
            let half = (reach * reach - dist2).sqrt();
            let count = (half / step).ceil() as isize;
            let mut acc = 0.0;
            for k in -count..=count {
                let t = mid + k as f64 * step;
                acc += img.bilinear(source[0] + t * u[0], source[1] + t * u[1]);
            }
            acc * step
        })
        .collect()
}

/// Fan-beam transform restricted to the atoms of a dictionary atlas.
#[derive(Debug, Clone)]
pub struct FanBeamModel {
    atlas: Arc<DictionaryAtlas>,
    geometry: FanBeamGeometry,
    grid: AlphaGrid,
}

impl FanBeamModel {
    pub fn new(atlas: Arc<DictionaryAtlas>, geometry: FanBeamGeometry, dalpha: f64) -> Result<Self> {
        let radius = atlas.support_radius(atlas.j_max())?;
        if radius > geometry.d {
            return Err(Error::Domain(format!(
                "atom supports reach radius {radius:.3}, beyond the object disc d = {}",
                geometry.d
            )));
        }
        let grid = AlphaGrid::covering(&geometry, dalpha)?;
        Ok(Self { atlas, geometry, grid })
    }

    /// `d` = largest atom-support corner distance, `ρ = 4d`, fan step `h/ρ`.
    pub fn with_default_geometry(atlas: Arc<DictionaryAtlas>) -> Result<Self> {
        let geometry = default_geometry(&atlas)?;
        let dalpha = atlas.h() / geometry.rho;
        Self::new(atlas, geometry, dalpha)
    }

    pub fn geometry(&self) -> &FanBeamGeometry {
        &self.geometry
    }

    pub fn alpha_grid(&self) -> &AlphaGrid {
        &self.grid
    }

    pub fn atlas(&self) -> &DictionaryAtlas {
        &self.atlas
    }
}

/// Smallest object disc holding every atom support, with the source two units outside it.
pub fn default_geometry(atlas: &DictionaryAtlas) -> Result<FanBeamGeometry> {
    let d = atlas.support_radius(atlas.j_max())?;
    FanBeamGeometry::new(4.0 * d, d)
}

impl ForwardModel for FanBeamModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Fanbeam
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
        self.grid.dalpha
    }

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
        fanbeam_atom(&self.atlas, i, t, &self.geometry, &self.grid)
            .expect("containment is checked when the model is built")
    }

    fn quadrature(&self, resolution: usize) -> Vec<(f64, f64)> {
        let n = resolution.max(1);
        (0..n).map(|k| (2.0 * PI * k as f64 / n as f64, 1.0 / n as f64)).collect()
    }
}
