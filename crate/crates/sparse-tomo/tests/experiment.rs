use nalgebra::DVector;
use sparse_tomo::certification::{compute_gram, default_gram_resolution};
use sparse_tomo::experiment::config::default_cartoon;
use sparse_tomo::experiment::sweep::run_cell;
use sparse_tomo::experiment::{
    make_phantom, run_recovery_sweep, Cell, ExperimentConfig, PhantomSpec, SampleRule, Setup, SweepRecord,
};
use sparse_tomo::solver::SolveStatus;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (mx / n, my / n);
    let sxy: f64 = points.iter().map(|(x, y)| (x.ln() - mx) * (y.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x.ln() - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn cartoon_coefficients_decay_like_inverse_rank() {
    for order in [1, 3] {
        let cfg = ExperimentConfig {
            wavelet_order: order,
            j_max: 5,
            j0: 4,
            phantom: PhantomSpec::Cartoon { shapes: default_cartoon() },
            ..Default::default()
        };
        let setup = Setup::new(&cfg).unwrap();
        let phantom = make_phantom(&cfg, &setup).unwrap();
        let mut mags: Vec<f64> = phantom.coefficients.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let points: Vec<(f64, f64)> = (10..=1000).map(|i| (i as f64, mags[i - 1])).collect();
        let slope = loglog_slope(&points);
        assert!(slope <= -0.85, "db{order}: rearrangement slope {slope}");
    }
}

fn noisy_sparse_config() -> ExperimentConfig {
    ExperimentConfig {
        wavelet_order: 1,
        j_max: 3,
        j0: 2,
        phantom: PhantomSpec::Sparse { s: 6, seed: 3 },
        betas: vec![0.02],
        m_rule: SampleRule::Fixed { values: vec![8, 16, 32, 64, 128] },
        seeds: (0..5).collect(),
        ..Default::default()
    }
}

#[test]
fn doubling_samples_does_not_increase_the_median_error() {
    let cfg = noisy_sparse_config();
    let setup = Setup::new(&cfg).unwrap();
    let phantom = make_phantom(&cfg, &setup).unwrap();
    let records = run_recovery_sweep(&cfg, &setup, &phantom).unwrap();
    let medians: Vec<f64> = [8, 16, 32, 64, 128]
        .iter()
        .map(|&m| median(records.iter().filter(|r| r.m == m).map(|r| r.err_l2).collect()))
        .collect();
    let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "medians {medians:?}");
    assert!(medians[4] < medians[0], "medians {medians:?}");
}

fn without_time(records: &[SweepRecord]) -> Vec<SweepRecord> {
    records.iter().map(|r| SweepRecord { wall_time: 0.0, ..r.clone() }).collect()
}

#[test]
fn sweeps_are_deterministic_across_worker_counts() {
    let cfg = ExperimentConfig { betas: vec![0.02, 0.05], ..noisy_sparse_config() };
    let setup = Setup::new(&cfg).unwrap();
    let phantom = make_phantom(&cfg, &setup).unwrap();
    let serial = run_recovery_sweep(&cfg, &setup, &phantom).unwrap();
    let again = run_recovery_sweep(&cfg, &setup, &phantom).unwrap();
    let pooled = run_recovery_sweep(&ExperimentConfig { workers: 3, ..cfg.clone() }, &setup, &phantom).unwrap();
    assert_eq!(serial.len(), 2 * 5 * 5);
    assert_eq!(without_time(&serial), without_time(&again));
    assert_eq!(without_time(&serial), without_time(&pooled));
    for r in &serial {
        assert!((r.err_img - r.err_l2).abs() <= 5.0 * setup.atlas.as_ref().unwrap().h() * r.err_l2 + 1e-14);
        assert!(r.err_l2 >= 0.0);
    }
}

#[test]
fn noiseless_sparse_recovery_is_exact() {
    let cfg = ExperimentConfig {
        m_rule: SampleRule::Fixed { values: vec![48] },
        betas: vec![0.0],
        zeta: 1.0,
        ..noisy_sparse_config()
    };
    let setup = Setup::new(&cfg).unwrap();
    let phantom = make_phantom(&cfg, &setup).unwrap();
    for r in run_recovery_sweep(&cfg, &setup, &phantom).unwrap() {
        assert!(r.err_rel <= 1e-5, "seed {}: {}", r.seed, r.err_rel);
        assert_eq!(r.status, SolveStatus::Optimal);
    }
}

#[test]
fn weighted_error_sits_in_the_quasi_diagonal_band() {
    let cfg = ExperimentConfig {
        wavelet_order: 2,
        j_max: 2,
        j0: 2,
        zeta: 1.0,
        phantom: PhantomSpec::Sparse { s: 4, seed: 1 },
        betas: vec![0.05],
        m_rule: SampleRule::Fixed { values: vec![24] },
        ..Default::default()
    };
    let setup = Setup::new(&cfg).unwrap();
    let window = setup.window_len(cfg.j0);
    let cert = compute_gram(setup.model.as_ref(), window, default_gram_resolution(cfg.j_max)).unwrap();
    let qd = cert.quasi_diag;
    let phantom = make_phantom(&cfg, &setup).unwrap();
    for seed in 0..4u64 {
        let cell = Cell { beta: 0.05, m: 24, j0: cfg.j0, seed };
        let (_, result) = run_cell(&cfg, &setup, &phantom, &cell).unwrap();
        let e = DVector::from_iterator(window, (0..window).map(|i| result.x_hat[i] - phantom.coefficients[i]));
        let measured = (&cert.gram * &e).dot(&e).sqrt();
        let weighted: f64 = (0..window)
            .map(|i| 2f64.powf(-2.0 * qd.b * cert.scales[i] as f64) * e[i] * e[i])
            .sum::<f64>()
            .sqrt();
        let (lo, hi) = (qd.lower.sqrt() * weighted, qd.upper.sqrt() * weighted);
        assert!(measured >= lo * (1.0 - 1e-9) && measured <= hi * (1.0 + 1e-9), "seed {seed}: {lo} ≤ {measured} ≤ {hi}");
    }
}
