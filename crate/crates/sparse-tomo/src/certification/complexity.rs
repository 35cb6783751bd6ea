//! Sample-complexity bounds `m ≥ C₀ τ max{…}` with `τ` built from certified constants.
//!
//! All logarithms are natural.

use serde::Serialize;

use super::GramCertificate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ComplexityVariant {
    /// `τ = B²‖G^{-1}‖⁴‖G‖²s`, `m ≥ C₀τ max{log³τ log M, log(1/γ)}`.
    General,
    /// `τ = B² max_Λ(d_{j}^{−2}2^{2bj}) 2^{2(1−ζ)bj₀} s`, same bound on `m`.
    Multiscale { zeta: f64, j0: u32 },
    /// `τ = 2^{j₀}s`, `m ≥ C₀τ max{j₀ log³τ, log(1/γ)}`.
    RadonUnweighted { j0: u32 },
    /// `m ≥ C₀ s max{j₀ log³s, log(1/γ)}`.
    RadonWeighted { j0: u32 },
}

/// The certified constants the bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityInputs {
    pub coherence: f64,
    /// `e` in `d_{j,n} = 2^{e j}`.
    pub decay_exponent: f64,
    pub b: f64,
    pub inv_norm: f64,
    pub norm: f64,
}

impl ComplexityInputs {
    pub fn from_certificate(cert: &GramCertificate) -> Self {
        Self {
            coherence: cert.coherence.bound,
            decay_exponent: cert.coherence.decay_exponent,
            b: cert.quasi_diag.b,
            inv_norm: cert.inv_norm,
            norm: cert.sigma_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleComplexity {
    pub tau: f64,
    pub m: u64,
}

/// Smallest `m` meeting the variant's bound for sparsity `s`, `M = |Λ|` atoms, failure
/// probability `γ`, maximal weight `‖ω‖_∞` and constant `C₀`.
pub fn sample_complexity(
    inputs: &ComplexityInputs,
    s: f64,
    atoms: usize,
    weight_max: f64,
    gamma: f64,
    c0: f64,
    variant: ComplexityVariant,
) -> Result<SampleComplexity> {
    let floor = 2f64.max(weight_max * weight_max / 4.0);
    if !(s >= floor) || s > atoms as f64 {
        return Err(Error::Domain(format!("sparsity {s} outside [{floor}, {atoms}]")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("failure probability {gamma} outside (0, 1)")));
    }
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("constant {c0} must be positive")));
    }
    let log_gamma = (1.0 / gamma).ln();
    let ln3 = |v: f64| v.ln().powi(3);
    let (tau, factor) = match variant {
        ComplexityVariant::General => {
            let tau = inputs.coherence.powi(2) * inputs.inv_norm.powi(4) * inputs.norm.powi(2) * s;
            (tau, ln3(tau) * (atoms as f64).ln())
        }
        ComplexityVariant::Multiscale { zeta, j0 } => {
            if !(0.0..=1.0).contains(&zeta) {
                return Err(Error::Domain(format!("ζ = {zeta} outside [0, 1]")));
            }
            let b = inputs.b;
            let relative = (0..=j0)
                .map(|j| 2f64.powf(2.0 * (b - inputs.decay_exponent) * j as f64))
                .fold(0.0, f64::max);
            let tau = inputs.coherence.powi(2) * relative * 2f64.powf(2.0 * (1.0 - zeta) * b * j0 as f64) * s;
            (tau, ln3(tau) * (atoms as f64).ln())
        }
        ComplexityVariant::RadonUnweighted { j0 } => {
            let tau = 2f64.powi(j0 as i32) * s;
            (tau, j0 as f64 * ln3(tau))
        }
        ComplexityVariant::RadonWeighted { j0 } => (s, j0 as f64 * ln3(s)),
    };
    let m = (c0 * tau * factor.max(log_gamma)).ceil().max(1.0);
    Ok(SampleComplexity { tau, m: m as u64 })
}
