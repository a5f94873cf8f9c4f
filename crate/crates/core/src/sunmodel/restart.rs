//! Several fits from different seeds, ranked by held-out response error.

use ndarray::Axis;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{fit, FitOptions, SunModel, SupervisedMatrix};
use crate::error::{Error, Result};
use crate::inference::{infer_converged, predict_response, DEFAULT_KKT_TOL};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;

pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy)]
pub struct RestartPlan {
    pub topics: usize,
    pub n_iters: usize,
    pub n_restarts: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl RestartPlan {
    pub fn new(topics: usize, n_iters: usize, n_restarts: usize, seed: u64) -> Self {
        RestartPlan {
            topics,
            n_iters,
            n_restarts,
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
            seed,
        }
    }

    /// Seed of restart `r`.
    pub fn restart_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    /// `(fit rows, holdout rows)`, each sorted.
    pub fn partition(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "holdout_fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        let n_hold = ((n as f64) * self.holdout_fraction).round() as usize;
        if n_hold == 0 || n_hold >= n {
            return Err(Error::invalid(format!(
                "holdout fraction {} leaves no documents on one side of {n}",
                self.holdout_fraction
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded(derive_seed(self.seed, "holdout")));
        let mut hold = order[..n_hold].to_vec();
        let mut train = order[n_hold..].to_vec();
        hold.sort_unstable();
        train.sort_unstable();
        Ok((train, hold))
    }
}

#[derive(Debug, Clone)]
pub struct RestartEntry {
    pub restart: usize,
    pub seed: u64,
    pub holdout_mse: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct RestartReport {
    pub entries: Vec<RestartEntry>,
    pub best_seed: u64,
    pub holdout_rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RestartOutcome<T> {
    pub model: SunModel<T>,
    pub report: RestartReport,
}

/// Fit on `train` rows with `seed`, then score the response error of the
/// `hold` rows in original units, inferring their loadings without
/// responses. Returns the fitted model and the MSE.
pub fn evaluate_restart<T: Scalar>(
    x: &SupervisedMatrix<T>,
    train: &[usize],
    hold: &[usize],
    topics: usize,
    n_iters: usize,
    seed: u64,
) -> Result<(SunModel<T>, f64)> {
    let xt = x.select_rows(train);
    let model = fit(&xt, FitOptions::new(topics, seed).iters(n_iters))?;
    let m_hold = x.scaled_embeddings().select(Axis(0), hold);
    let ids: Vec<String> = hold.iter().map(|i| i.to_string()).collect();
    let loadings = infer_converged(m_hold.view(), &ids, &model, T::lit(DEFAULT_KKT_TOL).max(T::epsilon().sqrt()))?;
    let pred = predict_response(&loadings, &model)?;
    let y = x.scaling().unscale_response(x.scaled_response().select(Axis(0), hold).view());
    let mse = pred
        .iter()
        .zip(y.iter())
        .map(|(&p, &t)| (p - t).as_f64().powi(2))
        .sum::<f64>()
        / hold.len() as f64;
    Ok((model, mse))
}

/// Run `n_restarts` fits on the non-holdout rows, pick the lowest holdout
/// MSE (ties to the smaller seed), and refit that seed on all rows.
pub fn multi_restart_fit<T: Scalar>(x: &SupervisedMatrix<T>, plan: RestartPlan) -> Result<RestartOutcome<T>> {
    if plan.n_restarts == 0 {
        return Err(Error::invalid("n_restarts must be at least 1"));
    }
    let (train, hold) = plan.partition(x.nrows())?;
    let entries = (0..plan.n_restarts)
        .into_par_iter()
        .map(|r| {
            let seed = plan.restart_seed(r);
            let (model, mse) = evaluate_restart(x, &train, &hold, plan.topics, plan.n_iters, seed)?;
            Ok(RestartEntry {
                restart: r,
                seed,
                holdout_mse: mse,
                final_loss: model.final_loss().map(|v| v.as_f64()).unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = entries
        .iter()
        .min_by(|a, b| a.holdout_mse.total_cmp(&b.holdout_mse).then(a.seed.cmp(&b.seed)))
        .expect("at least one restart");
    let best_seed = best.seed;
    let model = fit(x, FitOptions::new(plan.topics, best_seed).iters(plan.n_iters))?;
    Ok(RestartOutcome {
        model,
        report: RestartReport {
            entries,
            best_seed,
            holdout_rows: hold,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::{s, Array2};
    use rand_distr::{Distribution, StandardNormal};

    fn planted(seed: u64) -> SupervisedMatrix<f64> {
        let mut rng = seeded(seed);
        let w = Array2::from_shape_fn((80, 3), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v.abs()
        });
        let h = Array2::from_shape_fn((3, 7), |_| StandardNormal.sample(&mut rng));
        let mut x = w.dot(&h);
        x.mapv_inplace(|v| v + 0.05 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
        SupervisedMatrix::from_raw(x.slice(s![.., ..6]), x.column(6), 0.5, 2.0).unwrap()
    }

    #[test]
    fn single_restart_equals_plain_fit() {
        let x = planted(1);
        let out = multi_restart_fit(&x, RestartPlan::new(3, 30, 1, 42)).unwrap();
        assert_eq!(out.report.entries.len(), 1);
        assert_eq!(out.report.best_seed, 42);
        let plain = fit(&x, FitOptions::new(3, 42).iters(30)).unwrap();
        assert_eq!(out.model, plain);
    }

    #[test]
    fn report_covers_every_restart_and_best_is_minimum() {
        let x = planted(2);
        let out = multi_restart_fit(&x, RestartPlan::new(3, 30, 5, 7)).unwrap();
        assert_eq!(out.report.entries.len(), 5);
        let best = out.report.entries.iter().find(|e| e.seed == out.report.best_seed).unwrap();
        let worst = out.report.entries.iter().map(|e| e.holdout_mse).fold(f64::MIN, f64::max);
        assert!(out.report.entries.iter().all(|e| e.holdout_mse >= best.holdout_mse));
        assert!(worst >= best.holdout_mse);
        assert_eq!(out.report.holdout_rows.len(), 16);
    }

    #[test]
    fn partition_is_disjoint_and_deterministic() {
        let plan = RestartPlan::new(2, 10, 1, 3);
        let (a, b) = plan.partition(50).unwrap();
        assert_eq!(a.len() + b.len(), 50);
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(plan.partition(50).unwrap(), (a, b));
        let bad = RestartPlan {
            holdout_fraction: 1.0,
            ..plan
        };
        assert!(bad.partition(50).is_err());
    }
}
