use autopersuade::inference::{infer_converged, predict_response};
use autopersuade::linalg::frobenius_sq;
use autopersuade::rng::seeded;
use autopersuade::sunmodel::{
    fit, loss_components, load_model, normalize, save_model, total_loss, FitOptions, SupervisedMatrix,
};
use ndarray::{s, Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

fn gaussian(rng: &mut autopersuade::rng::Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

/// Exact nonnegative factorization `M|Y = W*·H*` plus optional noise.
fn planted(seed: u64, n: usize, s: usize, j: usize, noise: f64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = seeded(seed);
    let w = gaussian(&mut rng, n, j).mapv(f64::abs);
    let h = gaussian(&mut rng, j, s + 1);
    let xm = w.dot(&h) + gaussian(&mut rng, n, s + 1).mapv(|v| noise * v);
    (xm.slice(s![.., ..s]).to_owned(), xm.column(s).to_owned())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn loss_trace_monotone_and_loadings_nonnegative(
        seed in any::<u64>(),
        j in 2usize..6,
        alpha in 0.05f64..0.95,
    ) {
        let (m, y) = planted(seed, 60, 10, 4, 0.3);
        let x = SupervisedMatrix::new(m.view(), y.view(), alpha).unwrap();
        let model = fit(&x, FitOptions::new(j, seed ^ 0x5a5a).iters(60)).unwrap();
        prop_assert!(model.w.iter().all(|&v| v >= 0.0));
        for pair in model.loss_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs(), "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn decomposition_holds_for_arbitrary_matrices(
        seed in any::<u64>(),
        n in 1usize..12,
        sdim in 1usize..8,
        j in 1usize..5,
        alpha in 0.01f64..0.99,
    ) {
        let mut rng = seeded(seed);
        let m = gaussian(&mut rng, n, sdim);
        let y = gaussian(&mut rng, n, 1).column(0).to_owned();
        let w = gaussian(&mut rng, n, j).mapv(f64::abs);
        let h = gaussian(&mut rng, j, sdim + 1);
        let x = SupervisedMatrix::new(m.view(), y.view(), alpha).unwrap();
        let (la, lr) = loss_components(&x, w.view(), h.view()).unwrap();
        let total = total_loss(&x, w.view(), h.view()).unwrap();
        let direct = frobenius_sq((x.x() - &w.dot(&h)).view()) / 2.0;
        prop_assert!((alpha * la + (1.0 - alpha) * lr - direct).abs() <= 1e-10 * direct.max(1e-300));
        prop_assert!((total - direct).abs() <= 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn normalize_leaves_fit_and_predictions_unchanged(seed in any::<u64>(), j in 2usize..5) {
        let (m, y) = planted(seed, 50, 8, 3, 0.2);
        let x = SupervisedMatrix::from_raw(m.view(), y.view(), 0.5, 2.0).unwrap();
        let model = fit(&x, FitOptions::new(j, seed).iters(40)).unwrap();
        prop_assume!(model.dead_topics().is_empty());
        let norm = normalize(&model).unwrap();
        let before = model.w.dot(&model.h);
        let after = norm.w.dot(&norm.h);
        for (a, b) in before.iter().zip(after.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let l0 = total_loss(&x, model.w.view(), model.h.view()).unwrap();
        let l1 = total_loss(&x, norm.w.view(), norm.h.view()).unwrap();
        prop_assert!((l0 - l1).abs() < 1e-10 * l0.max(1.0));
        let pa = model.w.dot(&model.gamma());
        let pb = norm.w.dot(&norm.gamma());
        for (a, b) in pa.iter().zip(pb.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }

        let (fresh, _) = planted(seed.wrapping_add(1), 10, 8, 3, 0.2);
        let fresh = x.scaling().scale_embeddings(fresh.view()).unwrap();
        let ids: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
        let ya = predict_response(&infer_converged(fresh.view(), &ids, &model, 1e-8).unwrap(), &model).unwrap();
        let yb = predict_response(&infer_converged(fresh.view(), &ids, &norm, 1e-8).unwrap(), &norm).unwrap();
        for (a, b) in ya.iter().zip(yb.iter()) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

/// Fit rank below the planted rank so the two losses compete.
#[test]
fn alpha_trades_reconstruction_for_response_fit() {
    let (m, y) = planted(31, 80, 10, 4, 0.0);
    let mut last: Option<(f64, f64)> = None;
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let x = SupervisedMatrix::new(m.view(), y.view(), alpha).unwrap();
        let model = fit(&x, FitOptions::new(2, 4).iters(500)).unwrap();
        let (la, lr) = loss_components(&x, model.w.view(), model.h.view()).unwrap();
        if let Some((pa, pr)) = last {
            assert!(la <= pa + 1e-6, "alpha {alpha}: L_A {la} after {pa}");
            assert!(lr + 1e-6 >= pr, "alpha {alpha}: L_R {lr} after {pr}");
        }
        last = Some((la, lr));
    }
}

#[test]
fn model_file_round_trip_is_exact() {
    let (m, y) = planted(2, 40, 6, 3, 0.1);
    let x = SupervisedMatrix::from_raw(m.view(), y.view(), 0.4, 2.0).unwrap();
    let model = fit(&x, FitOptions::new(3, 9).iters(25)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("models").join("m.json");
    save_model(&path, &model).unwrap();
    let back = load_model::<f64>(&path).unwrap();
    assert_eq!(back, model);
}
