use autopersuade::causal::{
    build_design, effects_csv, estimate_amce, parse_effects_csv, topic_term, DesignMatrix, LENGTH_TERM,
};
use autopersuade::inference::{InferenceMode, TopicLoadings};
use autopersuade::rng::seeded;
use autopersuade::Error;
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn problem(seed: u64, n: usize, p: usize) -> (DesignMatrix<f64>, Array1<f64>) {
    let mut rng = seeded(seed);
    let mut x = Array2::from_shape_fn((n, p + 1), |_| rng.random_range(0.0..2.0));
    x.column_mut(0).fill(1.0);
    let beta = Array1::from_shape_fn(p + 1, |_| rng.random_range(-1.0..1.0));
    let y = x.dot(&beta) + Array1::from_shape_fn(n, |_| rng.random_range(-0.5..0.5));
    let mut terms = vec!["const".to_string()];
    terms.extend((0..p).map(topic_term));
    (DesignMatrix::new(terms, x).unwrap(), y)
}

fn max_abs(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_equations_hold(seed in any::<u64>(), n in 12usize..60, p in 1usize..5) {
        let (d, y) = problem(seed, n, p);
        let fit = estimate_amce(&d, y.view()).unwrap();
        let beta = Array1::from(fit.coefficients());
        let resid = &y - &d.values.dot(&beta);
        let lhs = d.values.t().dot(&resid);
        let rhs = d.values.t().dot(&y);
        prop_assert!(max_abs(&lhs) < 1e-8 * max_abs(&rhs));
        prop_assert!(resid.sum().abs() < 1e-8 * n as f64);
    }

    #[test]
    fn row_order_does_not_matter(seed in any::<u64>(), n in 12usize..60, p in 1usize..5) {
        let (d, y) = problem(seed, n, p);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded(seed ^ 1));
        let dp = DesignMatrix::new(d.terms.clone(), d.values.select(Axis(0), &order)).unwrap();
        let yp = y.select(Axis(0), &order);
        let a = estimate_amce(&d, y.view()).unwrap();
        let b = estimate_amce(&dp, yp.view()).unwrap();
        for (ea, eb) in a.terms.iter().zip(b.terms.iter()) {
            prop_assert!((ea.coef - eb.coef).abs() < 1e-9 * (1.0 + ea.coef.abs()));
            prop_assert!((ea.se - eb.se).abs() < 1e-9 * (1.0 + ea.se));
        }
    }

    #[test]
    fn orthogonal_covariate_leaves_others_alone(seed in any::<u64>(), n in 12usize..60, p in 1usize..4) {
        let (d, y) = problem(seed, n, p);
        let mut rng = seeded(seed ^ 2);
        let raw = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        // Project out the existing columns so the new one is sample-orthogonal.
        let xtx = d.values.t().dot(&d.values);
        let coef = autopersuade::linalg::pinv(xtx.view(), 1e-12).dot(&d.values.t().dot(&raw));
        let z = &raw - &d.values.dot(&coef);
        prop_assume!(z.dot(&z) > 1e-6);
        let mut values = Array2::zeros((n, p + 2));
        values.slice_mut(ndarray::s![.., ..=p]).assign(&d.values);
        values.column_mut(p + 1).assign(&z);
        let mut terms = d.terms.clone();
        terms.push("z".into());
        let wide = DesignMatrix::new(terms, values).unwrap();
        let a = estimate_amce(&d, y.view()).unwrap();
        let b = estimate_amce(&wide, y.view()).unwrap();
        for (ea, eb) in a.terms.iter().zip(b.terms.iter()) {
            prop_assert!((ea.coef - eb.coef).abs() < 1e-8, "{} {} {}", ea.term, ea.coef, eb.coef);
        }
    }

    #[test]
    fn rescaled_topic_column(seed in any::<u64>(), n in 12usize..60, p in 1usize..5, c in 0.01f64..100.0) {
        let (d, y) = problem(seed, n, p);
        let mut values = d.values.clone();
        values.column_mut(1).mapv_inplace(|v| v * c);
        let scaled = DesignMatrix::new(d.terms.clone(), values).unwrap();
        let a = estimate_amce(&d, y.view()).unwrap();
        let b = estimate_amce(&scaled, y.view()).unwrap();
        let (ta, tb) = (&a.terms[1], &b.terms[1]);
        prop_assert!((tb.coef * c - ta.coef).abs() < 1e-8 * (1.0 + ta.coef.abs()));
        prop_assert!((tb.t - ta.t).abs() < 1e-8 * (1.0 + ta.t.abs()));
        prop_assert!(ta.ci_low <= ta.coef && ta.coef <= ta.ci_high);
    }
}

#[test]
fn collinear_design_names_columns() {
    let n = 20;
    let w = Array2::from_shape_fn((n, 2), |(i, k)| if k == 0 { i as f64 } else { 2.0 * i as f64 });
    let loadings = TopicLoadings {
        ids: (0..n).map(|i| i.to_string()).collect(),
        w,
        mode: InferenceMode::Converged,
        kkt_max_violation: None,
    };
    match build_design(&loadings, &[]) {
        Err(Error::RankDeficient { columns }) => {
            assert_eq!(columns, vec![topic_term(0), topic_term(1)]);
        }
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn effects_table_round_trips() {
    let mut rng = seeded(8);
    let n = 40;
    let loadings = TopicLoadings {
        ids: (0..n).map(|i| i.to_string()).collect(),
        w: Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..1.0)),
        mode: InferenceMode::Converged,
        kkt_max_violation: Some(0.0),
    };
    let length = Array1::from_shape_fn(n, |_| rng.random_range(50.0..300.0));
    let y = Array1::from_shape_fn(n, |_| rng.random_range(0.5..1.5));
    let design = build_design(&loadings, &[(LENGTH_TERM.to_string(), length)]).unwrap();
    let fit = estimate_amce(&design, y.view()).unwrap();
    let back = parse_effects_csv(&effects_csv(&fit)).unwrap();
    assert_eq!(back, fit.terms);
    assert_eq!(back.last().unwrap().term, "Arg. Length");
}
