use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparse_tomo::experiment::config::default_cartoon;
use sparse_tomo::experiment::output::{
    read_records, write_f64, write_fit, write_pgm, write_records, write_sinogram, write_timings,
};
use sparse_tomo::experiment::{
    calibrate_c0, fit_scaling, make_phantom, run_certification_report, run_recovery_sweep, with_c0,
    ExperimentConfig, FitAxis, ModelChoice, PhantomSpec, SampleRule, ScaleRule, Setup, SweepRecord,
};
use sparse_tomo::forward::{assemble_sampled_system, draw_samples};
use sparse_tomo::solver::{reconstruct_image, solve_constrained_l1};
use sparse_tomo::{Error, Result};

#[derive(Parser)]
#[command(name = "sparse-tomo", version, about = "Sparse-angle tomography with wavelet dictionaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dictionary atlas operations.
    Atlas {
        #[command(subcommand)]
        action: AtlasAction,
    },
    /// Gram certificate, coherence, δ* estimates and sample-complexity table.
    Certify(Common),
    /// One reconstruction: images, sinogram, solver trace and its record.
    Reconstruct(Common),
    /// Recovery sweep over noise levels, sample counts and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Calibrate the rule constant by exact recovery of s-sparse phantoms at this j0 first.
        #[arg(long)]
        calibrate_j0: Option<u32>,
    },
    /// Power-law fit of the median error per cell.
    Fit {
        #[arg(long, default_value = "out/records.csv")]
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = AxisArg::Beta)]
        axis: AxisArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AtlasAction {
    /// Builds the atlas and writes its header and patches.
    Build(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Beta,
    M,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomArg {
    Sparse,
    Cartoon,
    Tail,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Fixed,
    Exact,
    Rate,
    Cartoon,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleRuleArg {
    Fixed,
    Noise,
}

/// Flags shared by the experiment commands; each overrides the `--config` file.
#[derive(Args, Clone)]
struct Common {
    /// JSON config; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelChoice>,
    #[arg(long)]
    wavelet_order: Option<usize>,
    #[arg(long)]
    j0: Option<u32>,
    #[arg(long)]
    jmax: Option<u32>,
    #[arg(long, value_enum)]
    phantom: Option<PhantomArg>,
    /// Sparsity of the sparse phantom.
    #[arg(long)]
    s: Option<usize>,
    /// Tail decay rate of the tail phantom.
    #[arg(long)]
    a: Option<f64>,
    /// Comma-separated sample counts for the fixed rule.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    m_rule: Option<RuleArg>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    m_cap: Option<usize>,
    #[arg(long, value_enum)]
    j0_rule: Option<ScaleRuleArg>,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_model(s: &str) -> std::result::Result<ModelChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.wavelet_order {
            cfg.wavelet_order = v;
        }
        if let Some(v) = self.j0 {
            cfg.j0 = v;
        }
        if let Some(v) = self.jmax {
            cfg.j_max = v;
        }
        let seed = self.seed.as_ref().and_then(|s| s.first().copied()).unwrap_or(0);
        match self.phantom {
            Some(PhantomArg::Sparse) => cfg.phantom = PhantomSpec::Sparse { s: self.s.unwrap_or(5), seed },
            Some(PhantomArg::Tail) => cfg.phantom = PhantomSpec::Tail { a: self.a.unwrap_or(0.5), seed },
            Some(PhantomArg::Cartoon) => cfg.phantom = PhantomSpec::Cartoon { shapes: default_cartoon() },
            None => match &mut cfg.phantom {
                PhantomSpec::Sparse { s, .. } => *s = self.s.unwrap_or(*s),
                PhantomSpec::Tail { a, .. } => *a = self.a.unwrap_or(*a),
                PhantomSpec::Cartoon { .. } => {}
            },
        }
        let c0 = self.c0.unwrap_or(1.0);
        match self.m_rule {
            Some(RuleArg::Fixed) | None if self.m.is_some() => {
                cfg.m_rule = SampleRule::Fixed { values: self.m.clone().unwrap_or_default() }
            }
            Some(RuleArg::Fixed) => {}
            Some(RuleArg::Exact) => cfg.m_rule = SampleRule::Exact { c0 },
            Some(RuleArg::Rate) => cfg.m_rule = SampleRule::Rate { c0, p: None },
            Some(RuleArg::Cartoon) => cfg.m_rule = SampleRule::Cartoon { c0 },
            None => {
                if let Some(c0) = self.c0 {
                    cfg = with_c0(&cfg, c0);
                }
            }
        }
        if let Some(v) = self.m_cap {
            cfg.m_cap = v;
        }
        if let Some(v) = self.j0_rule {
            cfg.j0_rule = match v {
                ScaleRuleArg::Fixed => ScaleRule::Fixed,
                ScaleRuleArg::Noise => ScaleRule::FromNoise,
            };
        }
        if let Some(v) = &self.beta {
            cfg.betas = v.clone();
        }
        if let Some(v) = self.zeta {
            cfg.zeta = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = &self.seed {
            cfg.seeds = v.clone();
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("config.json"), cfg.to_json() + "\n")?;
    Ok(())
}

fn atlas_build(cfg: &ExperimentConfig) -> Result<()> {
    prepare_out(cfg)?;
    let setup = Setup::new(cfg)?;
    let atlas = setup
        .atlas
        .as_ref()
        .ok_or_else(|| Error::Config(format!("model {:?} has no image dictionary", cfg.model)))?;
    let mut header = BufWriter::new(File::create(cfg.out.join("atlas_header.txt"))?);
    let mut patches = BufWriter::new(File::create(cfg.out.join("atlas_patches.bin"))?);
    atlas.export(&mut header, &mut patches)?;
    header.flush()?;
    patches.flush()?;
    println!("atoms per scale: {:?}", atlas.scale_counts());
    println!("grid: {} x {} nodes, step {}", atlas.grid().n, atlas.grid().n, atlas.h());
    Ok(())
}

fn certify(cfg: &ExperimentConfig) -> Result<()> {
    prepare_out(cfg)?;
    let report = run_certification_report(cfg)?;
    report.write(&cfg.out)?;
    for (k, v) in report.certificate.summary() {
        println!("{k} = {v}");
    }
    Ok(())
}

fn reconstruct(cfg: &ExperimentConfig) -> Result<()> {
    prepare_out(cfg)?;
    let setup = Setup::new(cfg)?;
    let phantom = make_phantom(cfg, &setup)?;
    let beta = cfg.betas[0];
    let seed = cfg.seeds[0];
    let j0 = cfg.j0_for(beta);
    let window = setup.window_len(j0);
    let m = cfg.sample_counts(beta, j0, phantom.meta.s)[0];
    let model = setup.model.as_ref();
    let samples = draw_samples(model, m, seed);
    let system = assemble_sampled_system(model, window, &samples, &phantom.coefficients, beta, seed ^ 0x5EED)?;
    let q_rms = (system.q_weights.iter().map(|q| q * q).sum::<f64>() / m as f64).sqrt();
    let eta = beta * q_rms + system.truncation_residual();
    let result = solve_constrained_l1(&system, &setup.weights_on(window), &cfg.solve_config(eta))?;
    result.write_trace(&cfg.out.join("trace.csv"))?;
    write_sinogram(&cfg.out.join("sinogram.csv"), &samples, &system.y)?;
    write_f64(&cfg.out.join("coefficients.bin"), &result.x_hat)?;

    let mut diff = phantom.coefficients.clone();
    diff.resize(diff.len().max(window), 0.0);
    diff.iter_mut().zip(&result.x_hat).for_each(|(d, x)| *d -= x);
    let err_l2 = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut err_img = err_l2;
    if let (Some(atlas), Some(truth)) = (&setup.atlas, &phantom.image) {
        let recon = reconstruct_image(&result, atlas)?;
        err_img = truth.data.iter().zip(&recon.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() * truth.grid.h;
        write_pgm(&cfg.out.join("truth.pgm"), truth)?;
        write_f64(&cfg.out.join("truth.bin"), &truth.data)?;
        write_pgm(&cfg.out.join("recon.pgm"), &recon)?;
        write_f64(&cfg.out.join("recon.bin"), &recon.data)?;
    }
    let norm = phantom.norm();
    let record = SweepRecord {
        beta,
        m,
        j0,
        s: phantom.coefficients.iter().take(window).filter(|&&v| v != 0.0).count(),
        seed,
        err_l2,
        err_img,
        err_rel: if norm > 0.0 { err_l2 / norm } else { err_l2 },
        residual: result.residual,
        eta,
        status: result.status,
        iterations: result.iterations,
        wall_time: 0.0,
    };
    write_records(&cfg.out.join("records.csv"), std::slice::from_ref(&record))?;
    println!(
        "m = {m}, j0 = {j0}, |Λ| = {window}: err_l2 = {err_l2:.6e}, rel = {:.6e}, status = {:?}, iterations = {}",
        record.err_rel, result.status, result.iterations
    );
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, calibrate_j0: Option<u32>) -> Result<()> {
    prepare_out(cfg)?;
    let setup = Setup::new(cfg)?;
    let mut cfg = cfg.clone();
    if let Some(j0) = calibrate_j0 {
        let s = match cfg.phantom {
            PhantomSpec::Sparse { s, .. } => s,
            _ => 5,
        };
        let pilot = ExperimentConfig {
            phantom: PhantomSpec::Sparse { s, seed: 0 },
            betas: vec![0.0],
            j0_rule: ScaleRule::Fixed,
            zeta: 1.0,
            m_rule: SampleRule::Exact { c0: 1.0 },
            ..cfg.clone()
        };
        let cal = calibrate_c0(&pilot, &setup, j0)?;
        let mut out = BufWriter::new(File::create(cfg.out.join("calibration.txt"))?);
        writeln!(out, "j0 = {}\ns = {}\nm_min = {}\nc0 = {:.12e}\nsuccess_rate = {}", cal.j0, cal.s, cal.m_min, cal.c0, cal.success_rate)?;
        out.flush()?;
        println!("calibrated C0 = {:.6} (m_min = {} at j0 = {})", cal.c0, cal.m_min, cal.j0);
        cfg = with_c0(&cfg, cal.c0);
    }
    let phantom = make_phantom(&cfg, &setup)?;
    let records = run_recovery_sweep(&cfg, &setup, &phantom)?;
    write_records(&cfg.out.join("records.csv"), &records)?;
    write_timings(&cfg.out.join("timings.csv"), &records)?;
    for r in &records {
        println!(
            "beta = {:e}, m = {}, j0 = {}, seed = {}: err_img = {:.6e}, status = {:?}",
            r.beta, r.m, r.j0, r.seed, r.err_img, r.status
        );
    }
    let axis = if cfg.betas.len() >= 4 { Some(FitAxis::Beta) } else { None };
    let axis = axis.or_else(|| matches!(&cfg.m_rule, SampleRule::Fixed { values } if values.len() >= 4).then_some(FitAxis::M));
    if let Some(axis) = axis {
        let fit = fit_scaling(&records, axis)?;
        write_fit(&cfg.out.join("fit.txt"), &fit)?;
        println!("exponent = {:.4}, r² = {:.4}", fit.exponent, fit.r_squared);
    }
    Ok(())
}

fn fit(records: &Path, axis: AxisArg, out: &Path) -> Result<()> {
    let records = read_records(records)?;
    let axis = match axis {
        AxisArg::Beta => FitAxis::Beta,
        AxisArg::M => FitAxis::M,
    };
    let fit = fit_scaling(&records, axis)?;
    std::fs::create_dir_all(out)?;
    write_fit(&out.join("fit.txt"), &fit)?;
    println!("exponent = {:.6}, intercept = {:.6}, r² = {:.6}", fit.exponent, fit.intercept, fit.r_squared);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Atlas { action: AtlasAction::Build(common) } => atlas_build(&common.resolve()?),
        Command::Certify(common) => certify(&common.resolve()?),
        Command::Reconstruct(common) => reconstruct(&common.resolve()?),
        Command::Sweep { common, calibrate_j0 } => sweep(&common.resolve()?, calibrate_j0),
        Command::Fit { records, axis, out } => fit(&records, axis, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
