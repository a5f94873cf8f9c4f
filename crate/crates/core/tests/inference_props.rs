use autopersuade::inference::{
    infer, infer_converged, infer_iterative, load_loadings, predict_response, reconstruction_objective,
    write_loadings, InferenceMode,
};
use autopersuade::rng::seeded;
use autopersuade::sunmodel::{fit, FitOptions, SunModel, SupervisedMatrix};
use ndarray::{s, Array2, Axis};
use proptest::prelude::*;
use rand::Rng;

fn uniform(rng: &mut autopersuade::rng::Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

fn fitted(seed: u64, j: usize) -> (SunModel<f64>, Array2<f64>) {
    let mut rng = seeded(seed);
    let w = uniform(&mut rng, 70, j).mapv(f64::abs);
    let h = uniform(&mut rng, j, 9);
    let xm = w.dot(&h) + uniform(&mut rng, 70, 9).mapv(|v| 0.1 * v);
    let x = SupervisedMatrix::new(xm.slice(s![..50, ..8]), xm.slice(s![..50, 8]), 0.5).unwrap();
    let model = fit(&x, FitOptions::new(j, seed).iters(50)).unwrap();
    (model, xm.slice(s![50.., ..8]).to_owned())
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("new{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converged_never_worse_than_early_stopping(seed in any::<u64>(), j in 2usize..5) {
        let (model, m) = fitted(seed, j);
        let ids = ids(m.nrows());
        let conv = infer_converged(m.view(), &ids, &model, 1e-8).unwrap();
        let iter = infer_iterative(m.view(), &ids, &model, 100, seed).unwrap();
        let oc = reconstruction_objective(m.view(), &conv, &model).unwrap();
        let oi = reconstruction_objective(m.view(), &iter, &model).unwrap();
        for (c, i) in oc.iter().zip(oi.iter()) {
            prop_assert!(*c <= i + 1e-8, "converged {c} vs iterative {i}");
        }
        prop_assert!(conv.w.iter().all(|&v| v >= 0.0));
        prop_assert!(iter.w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn documents_are_inferred_independently(seed in any::<u64>(), j in 2usize..5) {
        let (model, m) = fitted(seed, j);
        let ids = ids(m.nrows());
        let batch = infer_converged(m.view(), &ids, &model, 1e-8).unwrap();
        for (i, row) in m.axis_iter(Axis(0)).enumerate() {
            let one = infer_converged(row.insert_axis(Axis(0)), &ids[i..=i], &model, 1e-8).unwrap();
            for k in 0..j {
                prop_assert!((one.w[[0, k]] - batch.w[[i, k]]).abs() < 1e-8);
            }
        }
        let it_batch = infer_iterative(m.view(), &ids, &model, 30, seed).unwrap();
        let it_again = infer_iterative(m.view(), &ids, &model, 30, seed).unwrap();
        prop_assert_eq!(it_batch.w, it_again.w);
    }
}

#[test]
fn converged_mode_ignores_seed() {
    let (model, m) = fitted(3, 3);
    let ids = ids(m.nrows());
    let a = infer(m.view(), &ids, &model, InferenceMode::Converged, 100, 1, 1e-8).unwrap();
    let b = infer(m.view(), &ids, &model, InferenceMode::Converged, 100, 2, 1e-8).unwrap();
    assert_eq!(a.w, b.w);
    assert!(a.kkt_max_violation.unwrap() <= 1e-8);
    let c = infer(m.view(), &ids, &model, InferenceMode::Iterative, 10, 1, 1e-8).unwrap();
    let d = infer(m.view(), &ids, &model, InferenceMode::Iterative, 10, 2, 1e-8).unwrap();
    assert_ne!(c.w, d.w);
}

#[test]
fn loadings_file_round_trip() {
    let (model, m) = fitted(5, 3);
    let ids = ids(m.nrows());
    let loadings = infer_converged(m.view(), &ids, &model, 1e-8).unwrap();
    let pred = predict_response(&loadings, &model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loadings.csv");
    write_loadings(&path, &loadings, pred.view()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "id,t0,t1,t2,predicted_score,mode");
    let (back, back_pred) = load_loadings(&path).unwrap();
    assert_eq!(back.ids, loadings.ids);
    assert_eq!(back.w, loadings.w);
    assert_eq!(back_pred, pred);
    assert_eq!(back.mode, InferenceMode::Converged);
}
