use std::sync::Arc;

use nalgebra::SymmetricEigen;
use sparse_tomo::certification::{compute_gram, tail_operator_norm, truncation_residual, RipProblem};
use sparse_tomo::experiment::{run_certification_report, ExperimentConfig, PhantomSpec};
use sparse_tomo::forward::{assemble_sampled_system, draw_samples, ForwardModel, RadonModel, SampledSystem};
use sparse_tomo::sparsity::Weights;
use sparse_tomo::wavelet::{DictionaryAtlas, WaveletFilter};

fn radon(order: usize, j_max: u32) -> (Arc<DictionaryAtlas>, RadonModel) {
    let atlas = Arc::new(DictionaryAtlas::with_default_grid(WaveletFilter::new(order).unwrap(), j_max).unwrap());
    let model = RadonModel::with_atlas_step(atlas.clone()).unwrap();
    (atlas, model)
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("sparse-tomo-cert-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn radon_report_has_half_scale_exponent() {
    let cfg = ExperimentConfig::default();
    assert_eq!((cfg.j_max, cfg.j0, cfg.wavelet_order), (3, 3, 3));
    let report = run_certification_report(&cfg).unwrap();
    let b = report.certificate.quasi_diag.b;
    assert!((0.4..=0.6).contains(&b), "b_fit = {b}");
    assert!(!report.certificate.fbi_violation);
    let qd = report.certificate.quasi_diag;
    assert!(qd.lower > 0.0 && qd.lower <= qd.upper);
}

#[test]
fn report_reruns_are_byte_identical() {
    let cfg = ExperimentConfig {
        wavelet_order: 1,
        j_max: 2,
        j0: 1,
        phantom: PhantomSpec::Sparse { s: 3, seed: 0 },
        rip_grid: vec![(2.0, 16), (4.0, 32)],
        ..Default::default()
    };
    let (a, b) = (scratch("a"), scratch("b"));
    run_certification_report(&cfg).unwrap().write(&a).unwrap();
    run_certification_report(&cfg).unwrap().write(&b).unwrap();
    for file in ["certificate.txt", "coherence.csv", "rip.csv", "complexity.csv"] {
        let (x, y) = (std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
    let rip = std::fs::read_to_string(a.join("rip.csv")).unwrap();
    assert!(rip.contains("montecarlo"), "Λ_1 exceeds the enumeration limit");
}

#[test]
fn isometry_constant_shrinks_as_samples_grow() {
    let (atlas, model) = radon(1, 1);
    let len = atlas.truncation_len(0).unwrap();
    let cert = compute_gram(&model, len, 64).unwrap();
    let w = Weights::uniform(len);
    let mean_delta = |m: usize| {
        (0..5u64)
            .map(|seed| {
                let system = SampledSystem::operator(&model, len, &draw_samples(&model, m, seed)).unwrap();
                RipProblem::from_system(&system, &cert).unwrap().bruteforce(&w, 4.0).unwrap().delta_star
            })
            .sum::<f64>()
            / 5.0
    };
    let deltas: Vec<f64> = [8, 32, 128, 512].map(mean_delta).to_vec();
    for pair in deltas.windows(2) {
        assert!(pair[1] < pair[0], "δ* means {deltas:?}");
    }
    // Monte Carlo concentration: quadrupling m roughly halves δ*.
    assert!(deltas[3] < 0.35 * deltas[1], "δ* means {deltas:?}");
}

#[test]
fn tail_norm_matches_dense_eigenvalue() {
    let (atlas, model) = radon(1, 2);
    let tail = atlas.truncation_len(1).unwrap()..atlas.len();
    let norm = tail_operator_norm(&model, tail.clone(), 64).unwrap();
    let full = compute_gram(&model, atlas.len(), 64).unwrap();
    let block = full.gram.view((tail.start, tail.start), (tail.len(), tail.len())).into_owned();
    let oracle = SymmetricEigen::new(block).eigenvalues.max().sqrt();
    assert!((norm - oracle).abs() <= 1e-6 * oracle, "{norm} vs {oracle}");
}

#[test]
fn truncation_residual_vanishes_inside_the_window() {
    let (atlas, model) = radon(1, 2);
    let window = atlas.truncation_len(1).unwrap();
    let samples = draw_samples(&model, 12, 3);
    let mut inside = vec![0.0; atlas.len()];
    inside[3] = 1.0;
    inside[window - 1] = -0.5;
    let system = assemble_sampled_system(&model, window, &samples, &inside, 0.0, 1).unwrap();
    let report = truncation_residual(&system, 0.0, 1.0, 1.0, model.density_lower_bound());
    assert!(report.residual < 1e-12 && report.bound == 0.0);

    let mut outside = inside.clone();
    outside[window + 2] = 0.25;
    let r = 0.25;
    let system = assemble_sampled_system(&model, window, &samples, &outside, 0.0, 1).unwrap();
    let tail_norm = tail_operator_norm(&model, window..atlas.len(), 64).unwrap();
    let report = truncation_residual(&system, r, tail_norm, 1.0, model.density_lower_bound());
    assert!(report.residual > 0.0);
    assert_eq!(report.r, r);
    // A one-atom tail: the residual is r times that atom's sampled column norm.
    let column = SampledSystem::operator(&model, atlas.len(), &samples).unwrap().normal_matrix()[(window + 2, window + 2)];
    assert!((report.residual - r * column.sqrt()).abs() <= 1e-10);
}
