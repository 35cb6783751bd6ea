use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SolveConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Radon,
    Fanbeam,
    Fourier,
    Legendre,
}

impl std::str::FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radon" => Ok(Self::Radon),
            "fanbeam" => Ok(Self::Fanbeam),
            "fourier" => Ok(Self::Fourier),
            "legendre" => Ok(Self::Legendre),
            other => Err(Error::Parse(format!("unknown model {other:?}"))),
        }
    }
}

/// One term of a cartoon phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// `amplitude · exp(1 − 1/(1 − |x − center|²/radius²))` inside the disc.
    Bump { center: [f64; 2], radius: f64, amplitude: f64 },
    /// Indicator of the ellipse with semi-axes `axes` rotated by `angle`.
    Ellipse { center: [f64; 2], axes: [f64; 2], angle: f64, amplitude: f64 },
}

impl Shape {
    /// Largest distance of the shape from the origin.
    pub fn reach(&self) -> f64 {
        match self {
            Shape::Bump { center, radius, .. } => center[0].hypot(center[1]) + radius,
            Shape::Ellipse { center, axes, .. } => center[0].hypot(center[1]) + axes[0].max(axes[1]),
        }
    }
}

/// Two bumps and one ellipse inside the unit disc.
pub fn default_cartoon() -> Vec<Shape> {
    vec![
        Shape::Bump { center: [-0.3, 0.25], radius: 0.45, amplitude: 1.0 },
        Shape::Bump { center: [0.35, -0.2], radius: 0.35, amplitude: -0.6 },
        Shape::Ellipse { center: [0.1, 0.15], axes: [0.5, 0.3], angle: 0.4, amplitude: 0.8 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomSpec {
    /// `s` unit coefficients of random sign on uniformly drawn atoms of `Λ_{j0}`.
    Sparse { s: usize, seed: u64 },
    /// A list of shapes analysed onto the dictionary.
    Cartoon {
        #[serde(default = "default_cartoon")]
        shapes: Vec<Shape>,
    },
    /// Random signs on every atom with `‖P_{Λ_j}^⊥x†‖₂ = 2^{−aj}` for `j < j_max`.
    Tail { a: f64, seed: u64 },
}

impl PhantomSpec {
    /// Decay rate `a` of the truncation error the phantom is built with.
    pub fn tail_rate(&self) -> Option<f64> {
        match self {
            PhantomSpec::Sparse { .. } => None,
            PhantomSpec::Cartoon { .. } => Some(0.5),
            PhantomSpec::Tail { a, .. } => Some(*a),
        }
    }
}

/// Number of samples per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SampleRule {
    Fixed { values: Vec<usize> },
    /// `m = ⌊C₀ s j₀ log³s⌋`, the weighted Radon exact-recovery rule.
    Exact { c0: f64 },
    /// `m = ⌊C₀ β^{−2/(2a+1) − 2a/(p(2a+1))} log⁴(1/β)⌋`; `p` defaults to `a`.
    Rate {
        c0: f64,
        #[serde(default)]
        p: Option<f64>,
    },
    /// `m = ⌊C₀ β^{−2} log⁴(1/β)⌋`.
    Cartoon { c0: f64 },
}

/// Finest scale `j₀` of the reconstruction window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// The configured `j0`.
    Fixed,
    /// `j₀ = ⌊2/(2a+1) log(1/β)⌋` with the phantom's `a`, clamped to `[1, j0]`.
    FromNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub step_ratio: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self { max_iters: d.max_iters, tol_gap: d.tol_gap, tol_feas: d.tol_feas, step_ratio: d.step_ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub wavelet_order: usize,
    pub j0: u32,
    pub j_max: u32,
    /// Detector spacing for the tomographic models; the atlas step when absent.
    pub detector_step: Option<f64>,
    pub phantom: PhantomSpec,
    pub betas: Vec<f64>,
    pub m_rule: SampleRule,
    pub j0_rule: ScaleRule,
    pub m_cap: usize,
    pub gamma: f64,
    pub zeta: f64,
    /// `b` in `W = diag(2^{bj})`.
    pub scale_exponent: f64,
    pub seeds: Vec<u64>,
    pub solver: SolverSettings,
    /// Worker threads for sweep cells; 0 uses the available parallelism.
    pub workers: usize,
    /// `(λ, m)` pairs for the δ* estimates of the certification report.
    pub rip_grid: Vec<(f64, usize)>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelChoice::Radon,
            wavelet_order: crate::wavelet::filter::DEFAULT_ORDER,
            j0: 3,
            j_max: 3,
            detector_step: None,
            phantom: PhantomSpec::Sparse { s: 5, seed: 0 },
            betas: vec![0.0],
            m_rule: SampleRule::Fixed { values: vec![16] },
            j0_rule: ScaleRule::Fixed,
            m_cap: 4096,
            gamma: 0.1,
            zeta: 0.0,
            scale_exponent: 0.5,
            seeds: vec![0],
            solver: SolverSettings::default(),
            workers: 1,
            rip_grid: vec![(4.0, 64), (8.0, 64)],
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.j0 > self.j_max {
            return Err(Error::Config(format!("j0 = {} exceeds j_max = {}", self.j0, self.j_max)));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::Config("noise levels must be non-empty and in [0, 1)".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.m_cap == 0 {
            return Err(Error::Config("m_cap must be at least one".into()));
        }
        match &self.m_rule {
            SampleRule::Fixed { values } if values.is_empty() || values.contains(&0) => {
                return Err(Error::Config("fixed sample counts must be non-empty and at least one".into()));
            }
            SampleRule::Exact { c0 } | SampleRule::Rate { c0, .. } | SampleRule::Cartoon { c0 } if !(*c0 > 0.0) => {
                return Err(Error::Config(format!("rule constant {c0} must be positive")));
            }
            SampleRule::Rate { p: Some(p), .. } if !(*p > 0.0) => {
                return Err(Error::Config(format!("compressibility {p} must be positive")));
            }
            SampleRule::Exact { .. } if !matches!(self.phantom, PhantomSpec::Sparse { .. }) => {
                return Err(Error::Config("the exact-recovery rule needs a sparse phantom".into()));
            }
            SampleRule::Rate { .. } | SampleRule::Cartoon { .. } if self.betas.contains(&0.0) => {
                return Err(Error::Config("noise-driven sample rules need positive noise levels".into()));
            }
            _ => {}
        }
        if self.j0_rule == ScaleRule::FromNoise {
            if self.phantom.tail_rate().is_none() {
                return Err(Error::Config("a noise-driven j0 needs a tail or cartoon phantom".into()));
            }
            if self.betas.contains(&0.0) {
                return Err(Error::Config("a noise-driven j0 needs positive noise levels".into()));
            }
        }
        match &self.phantom {
            PhantomSpec::Tail { a, .. } if !(*a > 0.0) => {
                return Err(Error::Config(format!("tail rate {a} must be positive")));
            }
            PhantomSpec::Cartoon { shapes } if shapes.iter().any(|s| s.reach() > 1.0) => {
                return Err(Error::Config("cartoon shapes must lie in the unit disc".into()));
            }
            _ => {}
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("failure probability {} outside (0, 1)", self.gamma)));
        }
        if let Some(ds) = self.detector_step {
            if !(ds > 0.0) {
                return Err(Error::Config(format!("detector step {ds} must be positive")));
            }
        }
        self.solve_config(0.0).validate()
    }

    pub fn solve_config(&self, eta: f64) -> SolveConfig {
        SolveConfig {
            zeta: self.zeta,
            eta,
            max_iters: self.solver.max_iters,
            tol_gap: self.solver.tol_gap,
            tol_feas: self.solver.tol_feas,
            step_ratio: self.solver.step_ratio,
            scale_exponent: self.scale_exponent,
        }
    }

    /// `j₀` for noise level `beta`.
    pub fn j0_for(&self, beta: f64) -> u32 {
        match (self.j0_rule, self.phantom.tail_rate()) {
            (ScaleRule::FromNoise, Some(a)) if beta > 0.0 => {
                let j = (2.0 / (2.0 * a + 1.0) * (1.0 / beta).ln()).floor();
                (j.max(1.0) as u32).min(self.j0)
            }
            _ => self.j0,
        }
    }

    /// Sample counts for one noise level; rules yield a single count, capped at `m_cap`.
    pub fn sample_counts(&self, beta: f64, j0: u32, s: usize) -> Vec<usize> {
        let cap = |m: f64| (m.floor().max(1.0) as usize).min(self.m_cap);
        let log_inv = (1.0 / beta).ln();
        match &self.m_rule {
            SampleRule::Fixed { values } => values.iter().map(|&m| m.min(self.m_cap)).collect(),
            SampleRule::Exact { c0 } => vec![cap(exact_rule(*c0, s, j0))],
            SampleRule::Rate { c0, p } => {
                let a = self.phantom.tail_rate().unwrap_or(0.5);
                let p = p.unwrap_or(a);
                let exponent = 2.0 / (2.0 * a + 1.0) + 2.0 * a / (p * (2.0 * a + 1.0));
                vec![cap(c0 * beta.powf(-exponent) * log_inv.powi(4))]
            }
            SampleRule::Cartoon { c0 } => vec![cap(c0 * beta.powi(-2) * log_inv.powi(4))],
        }
    }
}

/// `C₀ s j₀ log³s`.
pub fn exact_rule(c0: f64, s: usize, j0: u32) -> f64 {
    let s = s as f64;
    c0 * s * j0 as f64 * s.ln().powi(3)
}
