use std::path::Path;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{infer_converged, predict_response, DEFAULT_KKT_TOL};
use crate::ingest::{create_writer, finish_writer, io_err, DEFAULT_EMBEDDING_DIVISOR};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;
use crate::sunmodel::{fit, FitOptions, SupervisedMatrix, DEFAULT_FIT_ITERS};

/// Mean squared difference.
pub fn mse<T: Scalar>(predicted: ArrayView1<T>, actual: ArrayView1<T>) -> Result<T> {
    if predicted.len() != actual.len() {
        return Err(Error::dimension(format!(
            "{} predictions for {} targets",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("mse of empty vectors"));
    }
    let sum: T = predicted.iter().zip(actual.iter()).map(|(&p, &a)| (p - a) * (p - a)).sum();
    Ok(sum / T::from_usize_lossy(predicted.len()))
}

/// Fold index of every row: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(derive_seed(seed, "cv-folds")));
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % folds;
    }
    fold
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    pub grid: Vec<(usize, f64)>,
    pub folds: usize,
    pub n_iters: usize,
    pub seed: u64,
    pub embedding_divisor: f64,
}

impl CvOptions {
    pub fn new(grid: Vec<(usize, f64)>, folds: usize, seed: u64) -> Self {
        CvOptions {
            grid,
            folds,
            n_iters: DEFAULT_FIT_ITERS,
            seed,
            embedding_divisor: DEFAULT_EMBEDDING_DIVISOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvEntry {
    pub topics: usize,
    pub alpha: f64,
    pub fold: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// Test error of predicting the training-fold mean response.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEntry {
    pub fold: usize,
    pub test_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub topics: usize,
    pub alpha: f64,
    pub mean_train_mse: f64,
    pub mean_test_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub entries: Vec<CvEntry>,
    pub baseline: Vec<BaselineEntry>,
    pub folds: usize,
    pub seed: u64,
}

impl CvReport {
    /// Per-cell means, in grid order.
    pub fn summary(&self) -> Vec<CvSummary> {
        let mut out: Vec<CvSummary> = Vec::new();
        for e in &self.entries {
            if out.iter().any(|s| s.topics == e.topics && s.alpha == e.alpha) {
                continue;
            }
            let cell: Vec<&CvEntry> = self
                .entries
                .iter()
                .filter(|x| x.topics == e.topics && x.alpha == e.alpha)
                .collect();
            let k = cell.len() as f64;
            out.push(CvSummary {
                topics: e.topics,
                alpha: e.alpha,
                mean_train_mse: cell.iter().map(|x| x.train_mse).sum::<f64>() / k,
                mean_test_mse: cell.iter().map(|x| x.test_mse).sum::<f64>() / k,
            });
        }
        out
    }

    pub fn mean_test_mse(&self, topics: usize, alpha: f64) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.topics == topics && s.alpha == alpha)
            .map(|s| s.mean_test_mse)
    }

    /// Cell with the lowest mean test error.
    pub fn best(&self) -> Option<CvSummary> {
        self.summary()
            .into_iter()
            .min_by(|a, b| a.mean_test_mse.total_cmp(&b.mean_test_mse))
    }

    pub fn baseline_mean(&self) -> f64 {
        self.baseline.iter().map(|b| b.test_mse).sum::<f64>() / self.baseline.len() as f64
    }

    /// CSV `J,alpha,fold,train_mse,test_mse`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("J,alpha,fold,train_mse,test_mse\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:?},{},{:?},{:?}\n",
                e.topics, e.alpha, e.fold, e.train_mse, e.test_mse
            ));
        }
        out
    }

    /// CSV `fold,test_mse` for the mean predictor.
    pub fn baseline_csv(&self) -> String {
        let mut out = String::from("fold,test_mse\n");
        for b in &self.baseline {
            out.push_str(&format!("{},{:?}\n", b.fold, b.test_mse));
        }
        out
    }

    pub fn write(&self, entries_path: &Path, baseline_path: &Path) -> Result<()> {
        use std::io::Write;
        for (path, text) in [(entries_path, self.to_csv()), (baseline_path, self.baseline_csv())] {
            let mut w = create_writer(path)?;
            w.write_all(text.as_bytes()).map_err(io_err(path))?;
            finish_writer(path, w)?;
        }
        Ok(())
    }
}

fn fit_seed(seed: u64, topics: usize, alpha: f64, fold: usize) -> u64 {
    derive_seed(seed, &format!("cv/{topics}/{alpha:?}/{fold}"))
}

/// K-fold cross-validation over `(J, α)` on raw embeddings `m` and raw
/// responses `y`. Each fold refits the scaling on its training rows, fits
/// the model, infers held-out loadings by NNLS without their responses and
/// scores predictions in original response units.
pub fn cross_validate<T: Scalar>(m: ArrayView2<T>, y: ArrayView1<T>, opts: &CvOptions) -> Result<CvReport> {
    let n = m.nrows();
    if y.len() != n {
        return Err(Error::dimension(format!("{} responses for {n} embedding rows", y.len())));
    }
    if opts.folds < 2 {
        return Err(Error::invalid("folds must be at least 2"));
    }
    if opts.grid.is_empty() {
        return Err(Error::invalid("CV grid is empty"));
    }
    if opts.folds > n {
        return Err(Error::invalid(format!("{} folds for {n} documents", opts.folds)));
    }
    let assignment = fold_assignment(n, opts.folds, opts.seed);
    let parts: Vec<(Vec<usize>, Vec<usize>)> = (0..opts.folds)
        .map(|f| {
            let train = (0..n).filter(|&i| assignment[i] != f).collect();
            let test = (0..n).filter(|&i| assignment[i] == f).collect();
            (train, test)
        })
        .collect();
    let smallest = parts.iter().map(|(_, t)| t.len()).min().unwrap_or(0);
    for &(j, alpha) in &opts.grid {
        if j == 0 || smallest < j {
            return Err(Error::invalid(format!(
                "smallest fold has {smallest} documents, fewer than J = {j}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
    }
    let baseline = parts
        .iter()
        .enumerate()
        .map(|(f, (train, test))| {
            let ytr = y.select(Axis(0), train);
            let mean = ytr.sum() / T::from_usize_lossy(train.len());
            let pred = Array1::from_elem(test.len(), mean);
            Ok(BaselineEntry {
                fold: f,
                test_mse: mse(pred.view(), y.select(Axis(0), test).view())?.as_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64, usize)> = opts
        .grid
        .iter()
        .flat_map(|&(j, a)| (0..opts.folds).map(move |f| (j, a, f)))
        .collect();
    let divisor = T::lit(opts.embedding_divisor);
    let entries = jobs
        .par_iter()
        .map(|&(topics, alpha, f)| {
            let (train, test) = &parts[f];
            let mtr = m.select(Axis(0), train);
            let ytr = y.select(Axis(0), train);
            let x = SupervisedMatrix::from_raw(mtr.view(), ytr.view(), T::lit(alpha), divisor)?;
            let model = fit(&x, FitOptions::new(topics, fit_seed(opts.seed, topics, alpha, f)).iters(opts.n_iters))?;
            let train_pred = x.scaling().unscale_response(model.w.dot(&model.gamma()).view());
            let train_mse = mse(train_pred.view(), ytr.view())?.as_f64();
            let mte = x.scaling().scale_embeddings(m.select(Axis(0), test).view())?;
            let ids: Vec<String> = test.iter().map(|i| i.to_string()).collect();
            let tol = T::lit(DEFAULT_KKT_TOL).max(T::epsilon().sqrt());
            let loadings = infer_converged(mte.view(), &ids, &model, tol)?;
            let pred = predict_response(&loadings, &model)?;
            let test_mse = mse(pred.view(), y.select(Axis(0), test).view())?.as_f64();
            Ok(CvEntry {
                topics,
                alpha,
                fold: f,
                train_mse,
                test_mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        entries,
        baseline,
        folds: opts.folds,
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mse_examples() {
        assert_eq!(mse(array![1.0, 2.0].view(), array![1.0, 2.0].view()).unwrap(), 0.0);
        assert_eq!(mse(array![0.0, 0.0].view(), array![1.0, 3.0].view()).unwrap(), 5.0);
        assert_eq!(mse(array![0.0, 0.0].view(), array![3.0, 1.0].view()).unwrap(), 5.0);
        assert!(mse(Array1::<f64>::zeros(0).view(), Array1::zeros(0).view()).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let f = fold_assignment(103, 10, 5);
        for k in 0..10 {
            let c = f.iter().filter(|&&x| x == k).count();
            assert!(c == 10 || c == 11);
        }
        assert_eq!(f, fold_assignment(103, 10, 5));
        assert_ne!(f, fold_assignment(103, 10, 6));
    }

    fn data() -> (Array2<f64>, Array1<f64>) {
        let mut rng = seeded(1);
        let m = Array2::from_shape_fn((60, 5), |_| StandardNormal.sample(&mut rng));
        let y = m.column(0).mapv(|v| v + 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
        (m, y)
    }

    #[test]
    fn report_shape_and_grid_order_invariance() {
        let (m, y) = data();
        let mut opts = CvOptions::new(vec![(2, 0.3), (3, 0.5)], 4, 9);
        opts.n_iters = 20;
        let a = cross_validate(m.view(), y.view(), &opts).unwrap();
        assert_eq!(a.entries.len(), 8);
        assert_eq!(a.baseline.len(), 4);
        assert!(a.to_csv().starts_with("J,alpha,fold,train_mse,test_mse\n2,0.3,0,"));
        opts.grid.reverse();
        let b = cross_validate(m.view(), y.view(), &opts).unwrap();
        assert_eq!(a.mean_test_mse(2, 0.3), b.mean_test_mse(2, 0.3));
        assert_eq!(a.mean_test_mse(3, 0.5), b.mean_test_mse(3, 0.5));
    }

    #[test]
    fn rejects_small_folds_and_bad_grid() {
        let (m, y) = data();
        assert!(cross_validate(m.view(), y.view(), &CvOptions::new(vec![(7, 0.5)], 10, 0)).is_err());
        assert!(cross_validate(m.view(), y.view(), &CvOptions::new(vec![], 10, 0)).is_err());
        assert!(cross_validate(m.view(), y.view(), &CvOptions::new(vec![(2, 0.5)], 1, 0)).is_err());
    }
}
