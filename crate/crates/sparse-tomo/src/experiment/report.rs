use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::{ExperimentConfig, PhantomSpec};
use super::phantom::Setup;
use crate::certification::{
    compute_gram, default_gram_resolution, sample_complexity, ComplexityInputs, ComplexityVariant, GramCertificate,
    RipEstimate, RipProblem, SampleComplexity, ENUMERATION_LIMIT,
};
use crate::error::Result;
use crate::forward::{draw_samples, ForwardModel, SampledSystem};
use crate::sparsity::Weights;

/// Support trials of the Monte Carlo δ* estimate.
const RIP_TRIALS: usize = 200;

/// Sparsity used for the sample-complexity table when the phantom does not fix one.
const DEFAULT_SPARSITY: usize = 5;

pub struct CertificationReport {
    pub certificate: GramCertificate,
    pub rip: Vec<RipEstimate>,
    pub complexity: Vec<(String, SampleComplexity)>,
    pub window: usize,
    pub j0: u32,
    pub s: usize,
}

/// Certifies the first `window` atoms of `model`: Gram matrix on the quadrature rule,
/// δ* at every `(λ, m)` of `rip_grid`, and the four sample-complexity bounds.
pub fn certify_model(
    model: &dyn ForwardModel,
    weights: &Weights,
    window: usize,
    j0: u32,
    resolution: usize,
    cfg: &ExperimentConfig,
) -> Result<CertificationReport> {
    let certificate = compute_gram(model, window, resolution)?;
    let seed = cfg.seeds[0];
    let mut rip = Vec::new();
    for &(lambda, m) in &cfg.rip_grid {
        let samples = draw_samples(model, m, seed);
        let system = SampledSystem::operator(model, window, &samples)?;
        let problem = RipProblem::from_system(&system, &certificate)?;
        let estimate = if window <= ENUMERATION_LIMIT {
            problem.bruteforce(weights, lambda)?
        } else {
            problem.montecarlo(weights, lambda, RIP_TRIALS, seed)?
        };
        rip.push(estimate);
    }
    let s = match cfg.phantom {
        PhantomSpec::Sparse { s, .. } if s >= 2 => s,
        _ => DEFAULT_SPARSITY,
    }
    .min(window);
    let inputs = ComplexityInputs::from_certificate(&certificate);
    let variants = [
        ("general", ComplexityVariant::General),
        ("multiscale", ComplexityVariant::Multiscale { zeta: cfg.zeta, j0 }),
        ("radon_unweighted", ComplexityVariant::RadonUnweighted { j0 }),
        ("radon_weighted", ComplexityVariant::RadonWeighted { j0 }),
    ];
    let mut complexity = Vec::new();
    for (name, variant) in variants {
        if let Ok(c) = sample_complexity(&inputs, s as f64, window, weights.max(), cfg.gamma, 1.0, variant) {
            complexity.push((name.to_string(), c));
        }
    }
    Ok(CertificationReport { certificate, rip, complexity, window, j0, s })
}

/// Certifies the configured model on `Λ_{j0}`.
pub fn run_certification_report(cfg: &ExperimentConfig) -> Result<CertificationReport> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let window = setup.window_len(cfg.j0);
    certify_model(
        setup.model.as_ref(),
        &setup.weights_on(window),
        window,
        cfg.j0,
        default_gram_resolution(cfg.j_max),
        cfg,
    )
}

impl CertificationReport {
    /// `certificate.txt`, `coherence.csv`, `rip.csv` and `complexity.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let cert = &self.certificate;
        let mut out = BufWriter::new(File::create(dir.join("certificate.txt"))?);
        writeln!(out, "j0 = {}", self.j0)?;
        writeln!(out, "window = {}", self.window)?;
        for (k, v) in cert.summary() {
            writeln!(out, "{k} = {v}")?;
        }
        writeln!(out, "sparsity = {}", self.s)?;
        for (name, c) in &self.complexity {
            writeln!(out, "m_{name} = {} (tau = {:.6e}, C0 = 1)", c.m, c.tau)?;
        }
        for r in &self.rip {
            writeln!(out, "delta_star(lambda = {}, m = {}) = {:.12e}", r.lambda, r.samples_m, r.delta_star)?;
        }
        out.flush()?;

        let mut out = BufWriter::new(File::create(dir.join("coherence.csv"))?);
        writeln!(out, "scale,coherence,bound")?;
        for &(j, c) in &cert.coherence.per_scale {
            let bound = cert.coherence.bound * 2f64.powf(-cert.coherence.decay_exponent * j as f64);
            writeln!(out, "{j},{c:.12e},{bound:.12e}")?;
        }
        out.flush()?;

        let mut out = BufWriter::new(File::create(dir.join("rip.csv"))?);
        writeln!(out, "lambda,m,delta_star,method,supports")?;
        for r in &self.rip {
            let method = format!("{:?}", r.method).to_lowercase();
            writeln!(out, "{},{},{:.12e},{method},{}", r.lambda, r.samples_m, r.delta_star, r.supports)?;
        }
        out.flush()?;

        let mut out = BufWriter::new(File::create(dir.join("complexity.csv"))?);
        writeln!(out, "variant,tau,m")?;
        for (name, c) in &self.complexity {
            writeln!(out, "{name},{:.12e},{}", c.tau, c.m)?;
        }
        out.flush()?;
        Ok(())
    }
}
