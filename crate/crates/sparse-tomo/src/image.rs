//! Square pixel grids and images sampled on them.

use crate::error::{Error, Result};

/// Square grid with nodes `x0 + p·h`, `p = 0..n`, on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    /// Grid on `[−half_width, half_width]²` with step `h`; `half_width/h` must be an integer.
    pub fn centered(half_width: f64, h: f64) -> Result<Self> {
        let cells = half_width / h;
        if !(h > 0.0) || (cells - cells.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "half width {half_width} is not a multiple of the step {h}"
            )));
        }
        let cells = cells.round() as usize;
        Ok(Self { x0: -half_width, h, n: 2 * cells + 1 })
    }

    pub fn coord(&self, p: usize) -> f64 {
        self.x0 + p as f64 * self.h
    }

    pub fn half_width(&self) -> f64 {
        -self.x0
    }

    /// Index of the node at `x0 + p·h` for an integer offset measured from `x = 0`.
    pub fn index_of_origin(&self) -> isize {
        (-self.x0 / self.h).round() as isize
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Real image stored row-major: `data[row·n + col]` is the value at `(x0 + col·h, x0 + row·h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for r in 0..grid.n {
            let x2 = grid.coord(r);
            for c in 0..grid.n {
                data.push(f(grid.coord(c), x2));
            }
        }
        Self { grid, data }
    }

    /// Indicator of a region rasterized by `sub × sub` supersampling of every pixel cell.
    pub fn from_region(grid: Grid, sub: usize, inside: impl Fn(f64, f64) -> bool) -> Self {
        let sub = sub.max(1);
        let offsets: Vec<f64> = (0..sub)
            .map(|k| ((k as f64 + 0.5) / sub as f64 - 0.5) * grid.h)
            .collect();
        let scale = 1.0 / (sub * sub) as f64;
        Self::from_fn(grid, |x1, x2| {
            let mut hits = 0usize;
            for dy in &offsets {
                for dx in &offsets {
                    hits += inside(x1 + dx, x2 + dy) as usize;
                }
            }
            hits as f64 * scale
        })
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.grid.n + col]
    }

    /// Bilinear interpolant, zero outside the grid.
    pub fn bilinear(&self, x1: f64, x2: f64) -> f64 {
        let g = &self.grid;
        let u = (x1 - g.x0) / g.h;
        let v = (x2 - g.x0) / g.h;
        if !(u > -1.0 && v > -1.0) || u >= g.n as f64 || v >= g.n as f64 {
            return 0.0;
        }
        let c0 = u.floor();
        let r0 = v.floor();
        let fu = u - c0;
        let fv = v - r0;
        let c0 = c0 as isize;
        let r0 = r0 as isize;
        let n = g.n as isize;
        let px = |c: isize, r: isize| {
            if c < 0 || r < 0 || c >= n || r >= n {
                0.0
            } else {
                self.data[(r * n + c) as usize]
            }
        };
        (1.0 - fv) * ((1.0 - fu) * px(c0, r0) + fu * px(c0 + 1, r0))
            + fv * ((1.0 - fu) * px(c0, r0 + 1) + fu * px(c0 + 1, r0 + 1))
    }

    /// Discrete inner product `h² Σ u v`.
    pub fn dot(&self, other: &Image) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Dimension("images live on different grids".into()));
        }
        let h2 = self.grid.h * self.grid.h;
        Ok(h2 * self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn norm(&self) -> f64 {
        (self.grid.h * self.grid.h * self.data.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Smallest box `[c0, c1] × [r0, r1]` of pixel indices holding every nonzero value.
    pub fn nonzero_box(&self) -> Option<(usize, usize, usize, usize)> {
        let n = self.grid.n;
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for r in 0..n {
            for c in 0..n {
                if self.data[r * n + c] != 0.0 {
                    bbox = Some(match bbox {
                        None => (c, c, r, r),
                        Some((a, b, d, e)) => (a.min(c), b.max(c), d.min(r), e.max(r)),
                    });
                }
            }
        }
        bbox
    }
}
