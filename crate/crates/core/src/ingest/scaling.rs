use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::mean_and_std;
use crate::scalar::Scalar;

/// Divisor applied to standardized embeddings so that a wide embedding does
/// not swamp the single response column.
pub const DEFAULT_EMBEDDING_DIVISOR: f64 = 2.0;

/// Dimensions whose population std falls below this are left unscaled.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Standardization state fitted on training data and re-applied to new
/// documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams<T> {
    pub dim_means: Vec<T>,
    pub dim_stds: Vec<T>,
    pub embedding_divisor: T,
    pub response_mean: T,
    pub response_std: T,
}

/// Fit per-dimension means and population standard deviations of `m`, and
/// of the response `y`.
pub fn fit_scaling<T: Scalar>(m: ArrayView2<T>, y: ArrayView1<T>, embedding_divisor: T) -> Result<ScalingParams<T>> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("scaling needs at least 2 documents, got {n}")));
    }
    if y.len() != n {
        return Err(Error::dimension(format!("{} responses for {n} embedding rows", y.len())));
    }
    if !(embedding_divisor > T::zero()) || !embedding_divisor.is_finite() {
        return Err(Error::invalid("embedding_divisor must be a positive finite number"));
    }
    let degenerate = T::lit(DEGENERATE_STD);
    let mut dim_means = Vec::with_capacity(m.ncols());
    let mut dim_stds = Vec::with_capacity(m.ncols());
    for (j, col) in m.axis_iter(Axis(1)).enumerate() {
        let (mean, std) = mean_and_std(col);
        if std < degenerate {
            log::warn!("embedding dimension e{j} is constant; leaving it uncentered and unscaled");
            dim_means.push(T::zero());
            dim_stds.push(T::one());
        } else {
            dim_means.push(mean);
            dim_stds.push(std);
        }
    }
    let (response_mean, response_std) = mean_and_std(y);
    if !(response_std >= degenerate) {
        return Err(Error::invalid("response has zero variance"));
    }
    Ok(ScalingParams {
        dim_means,
        dim_stds,
        embedding_divisor,
        response_mean,
        response_std,
    })
}

impl<T: Scalar> ScalingParams<T> {
    /// Parameters that leave both embeddings and responses untouched.
    pub fn identity(dim: usize) -> Self {
        ScalingParams {
            dim_means: vec![T::zero(); dim],
            dim_stds: vec![T::one(); dim],
            embedding_divisor: T::one(),
            response_mean: T::zero(),
            response_std: T::one(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim_means.len()
    }

    fn check_dim(&self, cols: usize) -> Result<()> {
        if cols != self.dim() {
            return Err(Error::dimension(format!(
                "embedding has {cols} dimensions, scaling was fitted on {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// `((x − mean) / std) / divisor`, per column.
    pub fn scale_embeddings(&self, m: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_dim(m.ncols())?;
        let mut out = m.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mean, std) = (self.dim_means[j], self.dim_stds[j]);
            col.mapv_inplace(|x| ((x - mean) / std) / self.embedding_divisor);
        }
        Ok(out)
    }

    pub fn unscale_embeddings(&self, m: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_dim(m.ncols())?;
        let mut out = m.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mean, std) = (self.dim_means[j], self.dim_stds[j]);
            col.mapv_inplace(|x| x * self.embedding_divisor * std + mean);
        }
        Ok(out)
    }

    pub fn scale_response(&self, y: ArrayView1<T>) -> Array1<T> {
        y.mapv(|v| (v - self.response_mean) / self.response_std)
    }

    pub fn unscale_response(&self, y: ArrayView1<T>) -> Array1<T> {
        y.mapv(|v| v * self.response_std + self.response_mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn two_point_column() {
        let m = array![[1.0], [3.0]];
        let p = fit_scaling(m.view(), array![0.0, 1.0].view(), 2.0).unwrap();
        assert_eq!(p.dim_means, vec![2.0]);
        assert_eq!(p.dim_stds, vec![1.0]);
        assert_eq!(p.embedding_divisor, 2.0);
        let s = p.scale_embeddings(m.view()).unwrap();
        assert_eq!(s, array![[-0.5], [0.5]]);
    }

    #[test]
    fn constant_response_rejected() {
        let m = array![[1.0], [2.0], [3.0]];
        assert!(fit_scaling(m.view(), array![1.0, 1.0, 1.0].view(), 2.0).is_err());
    }

    #[test]
    fn constant_dimension_passes_through() {
        let m = array![[5.0, 1.0], [5.0, 3.0]];
        let p = fit_scaling(m.view(), array![0.0, 1.0].view(), 2.0).unwrap();
        assert_eq!(p.dim_means[0], 0.0);
        assert_eq!(p.dim_stds[0], 1.0);
        let s = p.scale_embeddings(m.view()).unwrap();
        assert_eq!(s[[0, 0]], 2.5);
    }

    #[test]
    fn new_rows_use_training_statistics() {
        // train column [1, 3]: mean 2, std 1. New rows [5, 7] under train
        // params: (5-2)/2 = 1.5, (7-2)/2 = 2.5. Under their own stats
        // (mean 6, std 1): -0.5, 0.5.
        let train = array![[1.0], [3.0]];
        let fresh = array![[5.0], [7.0]];
        let y = array![0.0, 1.0];
        let p_train = fit_scaling(train.view(), y.view(), 2.0).unwrap();
        let p_own = fit_scaling(fresh.view(), y.view(), 2.0).unwrap();
        assert_eq!(p_train.scale_embeddings(fresh.view()).unwrap(), array![[1.5], [2.5]]);
        assert_eq!(p_own.scale_embeddings(fresh.view()).unwrap(), array![[-0.5], [0.5]]);
    }

    #[test]
    fn dimension_mismatch() {
        let p = ScalingParams::<f64>::identity(3);
        assert!(p.scale_embeddings(array![[1.0, 2.0]].view()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_moments(
            rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 2..20),
            ys in proptest::collection::vec(-10.0f64..10.0, 20),
        ) {
            let n = rows.len();
            let m = Array2::from_shape_vec((n, 3), rows.concat()).unwrap();
            let mut y = Array1::from_vec(ys[..n].to_vec());
            y[0] += 1.0; // guarantee some spread
            y[1] -= 1.0;
            let p = fit_scaling(m.view(), y.view(), 2.0).unwrap();
            let s = p.scale_embeddings(m.view()).unwrap();
            let back = p.unscale_embeddings(s.view()).unwrap();
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let yb = p.unscale_response(p.scale_response(y.view()).view());
            for (a, b) in yb.iter().zip(y.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            for (j, col) in s.axis_iter(Axis(1)).enumerate() {
                if p.dim_stds[j] == 1.0 && p.dim_means[j] == 0.0 { continue; }
                let (mean, std) = mean_and_std(col);
                prop_assert!(mean.abs() < 1e-10);
                prop_assert!((std - 0.5).abs() / 0.5 < 1e-10);
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let m = array![[1.0f32], [3.0]];
        let p = fit_scaling(m.view(), array![0.0f32, 1.0].view(), 2.0).unwrap();
        let s = p.scale_embeddings(m.view()).unwrap();
        assert_abs_diff_eq!(s[[0, 0]], -0.5f32);
    }
}
