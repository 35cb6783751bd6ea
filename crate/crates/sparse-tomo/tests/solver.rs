use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_tomo::forward::{assemble_sampled_system, draw_samples, NormalForm, RadonModel};
use sparse_tomo::solver::{
    reconstruct_image, solve_constrained_l1, solve_normal_form, solve_unconstrained_path, SolveConfig, SolveResult,
    SolveStatus,
};
use sparse_tomo::sparsity::Weights;
use sparse_tomo::wavelet::{DictionaryAtlas, WaveletFilter};

fn weighted_l1(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a.abs() * b).sum()
}

/// Grid search over `x ∈ [−2, 2]³` at step 0.01, skipping points outside the ball.
fn cube_grid_oracle(a: &DMatrix<f64>, y: &DVector<f64>, w: &[f64], eta: f64) -> f64 {
    let axis: Vec<f64> = (0..=400).map(|k| -2.0 + k as f64 * 0.01).collect();
    let mut best = f64::INFINITY;
    for &x1 in &axis {
        for &x2 in &axis {
            let base = y - a.column(0) * x1 - a.column(1) * x2;
            let partial = w[0] * x1.abs() + w[1] * x2.abs();
            if partial >= best {
                continue;
            }
            for &x3 in &axis {
                let value = partial + w[2] * x3.abs();
                if value < best && (&base - a.column(2) * x3).norm() <= eta {
                    best = value;
                }
            }
        }
    }
    best
}

#[test]
fn three_atom_path_matches_cube_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
    let y = &a * DVector::from_vec(vec![0.8, -0.3, 0.0]);
    let w = [1.0, 1.5, 1.2];
    let form = NormalForm::from_dense(&a, &y, vec![0; 3]).unwrap();
    let weights = Weights::new(w.to_vec()).unwrap();
    let eta = 0.2 * y.norm();
    let oracle = cube_grid_oracle(&a, &y, &w, eta);
    let constrained = solve_normal_form(&form, &weights, &SolveConfig { eta, ..Default::default() }).unwrap();
    assert_eq!(constrained.status, SolveStatus::Optimal);
    assert!((constrained.objective - oracle).abs() <= 0.02, "{} vs grid {oracle}", constrained.objective);
    let penalties: Vec<f64> = (0..300).map(|k| 2.0 * 0.97f64.powi(k)).collect();
    let path = solve_unconstrained_path(&form, &weights, 0.0, 0.5, &penalties).unwrap();
    let member = path.iter().find(|r| r.residual <= eta).expect("path reaches the constraint");
    assert!((member.objective - oracle).abs() <= 0.02, "{} vs grid {oracle}", member.objective);
}

/// Refines a geometric penalty grid around the member whose residual crosses `eta`.
fn bracketing_member(form: &NormalForm, weights: &Weights, zeta: f64, eta: f64) -> SolveResult {
    let (mut hi, mut lo): (f64, f64) = (1e2, 1e-6);
    let mut best = None;
    for _ in 0..4 {
        let grid: Vec<f64> = (0..40).map(|k| hi * (lo / hi).powf(k as f64 / 39.0)).collect();
        let path = solve_unconstrained_path(form, weights, zeta, 0.5, &grid).unwrap();
        let k = path.iter().position(|r| r.residual <= eta).expect("residual crosses η on the grid");
        assert!(k > 0, "grid starts inside the ball");
        hi = grid[k - 1];
        lo = grid[k];
        best = Some(path[k].clone());
    }
    best.unwrap()
}

#[test]
fn penalty_path_brackets_the_constrained_objective() {
    for (seed, zeta) in [(1u64, 0.0), (2, 1.0), (3, 0.5)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (15, 30);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0) / (m as f64).sqrt());
        let mut x = DVector::zeros(n);
        for _ in 0..4 {
            x[rng.random_range(0..n)] = rng.random_range(-2.0..2.0);
        }
        let y = &a * &x + DVector::from_fn(m, |_, _| rng.random_range(-0.05..0.05));
        let scales = (0..n).map(|i| (i / 8) as u32).collect();
        let form = NormalForm::from_dense(&a, &y, scales).unwrap();
        let weights = Weights::new((0..n).map(|_| rng.random_range(1.0..2.0)).collect()).unwrap();
        let eta = 0.1 * y.norm();
        let cfg = SolveConfig { eta, zeta, tol_gap: 1e-10, max_iters: 200_000, ..Default::default() };
        let constrained = solve_normal_form(&form, &weights, &cfg).unwrap();
        assert_eq!(constrained.status, SolveStatus::Optimal);
        let member = bracketing_member(&form, &weights, zeta, eta);
        let rel = (member.objective - constrained.objective).abs() / constrained.objective;
        assert!(rel <= 1e-4, "seed {seed}: path {} vs constrained {}", member.objective, constrained.objective);
    }
}

#[test]
fn penalty_path_residuals_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = DMatrix::from_fn(10, 20, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
    let form = NormalForm::from_dense(&a, &y, vec![0; 20]).unwrap();
    let penalties: Vec<f64> = (0..30).map(|k| 10.0 * 0.7f64.powi(k)).collect();
    let path = solve_unconstrained_path(&form, &Weights::uniform(20), 0.0, 0.5, &penalties).unwrap();
    assert!(path[0].x_hat.iter().all(|&v| v == 0.0), "large penalty gives zero");
    for pair in path.windows(2) {
        assert!(pair[1].residual <= pair[0].residual + 1e-9);
    }
}

fn radon_instance(
    order: usize,
    j_max: u32,
    j0: u32,
    m: usize,
    beta: f64,
) -> (Arc<DictionaryAtlas>, sparse_tomo::forward::SampledSystem, Vec<f64>) {
    let atlas = Arc::new(DictionaryAtlas::with_default_grid(WaveletFilter::new(order).unwrap(), j_max).unwrap());
    let model = RadonModel::with_atlas_step(atlas.clone()).unwrap();
    let window = atlas.truncation_len(j0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut x = vec![0.0; atlas.len()];
    for _ in 0..6 {
        x[rng.random_range(0..window)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    let samples = draw_samples(&model, m, 5);
    let system = assemble_sampled_system(&model, window, &samples, &x, beta, 6).unwrap();
    (atlas, system, x)
}

#[test]
fn synthesis_and_analysis_forms_agree() {
    let (atlas, system, _) = radon_instance(2, 2, 2, 12, 0.05);
    let window = system.normal_form().len();
    let weights = Weights::uniform(window);
    let eta = 0.05 * system.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    let result = solve_constrained_l1(&system, &weights, &SolveConfig { eta, ..Default::default() }).unwrap();
    assert_eq!(result.status, SolveStatus::Optimal);
    // Analysis form: the image û is feasible with objective ‖Φû‖_{1,ω} on Λ.
    let image = reconstruct_image(&result, &atlas).unwrap();
    let coefficients = atlas.analysis_prefix(&image, window).unwrap();
    let analysis_objective = weighted_l1(&coefficients, weights.as_slice());
    assert!((analysis_objective - result.objective).abs() <= 1e-8 * result.objective);
    let analysis_residual: f64 = system
        .apply(&coefficients)
        .iter()
        .zip(system.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!((analysis_residual - result.residual).abs() <= 1e-8 * eta.max(1.0));
}

#[test]
fn reconstruction_preserves_norms() {
    let (atlas, system, x_true) = radon_instance(3, 2, 2, 16, 0.02);
    let window = system.normal_form().len();
    let eta = 0.02 * system.data().iter().map(|v| v * v).sum::<f64>().sqrt() + system.truncation_residual();
    let result =
        solve_constrained_l1(&system, &Weights::uniform(window), &SolveConfig { eta, ..Default::default() }).unwrap();
    let tol = 5.0 * atlas.h();
    let err_coef: f64 = x_true[..window]
        .iter()
        .zip(&result.x_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let truth = atlas.synthesis(&x_true[..window]).unwrap();
    let recon = reconstruct_image(&result, &atlas).unwrap();
    let h2 = atlas.h() * atlas.h();
    let err_img = truth.data.iter().zip(&recon.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() * atlas.h();
    assert!((err_img - err_coef).abs() <= tol * err_coef.max(1e-12), "{err_img} vs {err_coef}");

    let zero = SolveResult { x_hat: vec![0.0; window], ..result.clone() };
    assert!(reconstruct_image(&zero, &atlas).unwrap().data.iter().all(|&v| v == 0.0));
    for i in [0, window / 2, window - 1] {
        let mut e = vec![0.0; window];
        e[i] = 1.0;
        let unit = SolveResult { x_hat: e, ..result.clone() };
        let img = reconstruct_image(&unit, &atlas).unwrap();
        assert_eq!(img.data, atlas.rasterize(i).data);
        let norm_sq: f64 = img.data.iter().map(|v| v * v).sum::<f64>() * h2;
        assert!((norm_sq - 1.0).abs() <= tol);
    }
    let too_long = SolveResult { x_hat: vec![0.0; atlas.len() + 1], ..result };
    assert!(reconstruct_image(&too_long, &atlas).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn optimal_solutions_are_feasible(seed in 0u64..1_000, rows in 2usize..8, cols in 2usize..12, frac in 0.01f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let form = NormalForm::from_dense(&a, &y, (0..cols).map(|i| (i % 3) as u32).collect()).unwrap();
        let eta = frac * y.norm();
        let cfg = SolveConfig { eta, zeta: 1.0, ..Default::default() };
        let r = solve_normal_form(&form, &Weights::uniform(cols), &cfg).unwrap();
        let residual = (&a * DVector::from_column_slice(&r.x_hat) - &y).norm();
        if r.status == SolveStatus::Optimal {
            prop_assert!(residual <= eta * (1.0 + 1e-6) + 1e-7 * y.norm(), "{} > {}", residual, eta);
            prop_assert!(r.gap <= 1e-8);
        }
    }
}
