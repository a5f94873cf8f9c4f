use ndarray::{Array2, ArrayView2};

use super::SupervisedMatrix;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, negative_part, pinv, positive_part};
use crate::scalar::Scalar;

/// Guard added to the denominator of the multiplicative `W` step.
pub const UPDATE_EPSILON: f64 = 1e-12;
/// Relative singular-value cutoff for the pseudoinverse of `WᵀW`.
pub const PINV_RCOND: f64 = 1e-10;

/// `H = (WᵀW)⁺ WᵀX`: the least-squares `H` for fixed `W`.
pub fn update_h<T: Scalar>(x: &SupervisedMatrix<T>, w: ArrayView2<T>) -> Result<Array2<T>> {
    if w.nrows() != x.nrows() {
        return Err(Error::dimension(format!("W has {} rows, X has {}", w.nrows(), x.nrows())));
    }
    if !all_finite(w) {
        return Err(Error::numerical("non-finite entry in W"));
    }
    let gram = w.t().dot(&w);
    let rcond = T::lit(PINV_RCOND).max(T::epsilon() * T::from_usize_lossy(w.ncols().max(1)));
    let h = pinv(gram.view(), rcond).dot(&w.t().dot(x.x()));
    if !all_finite(h.view()) {
        return Err(Error::numerical("non-finite entry in H"));
    }
    Ok(h)
}

/// The multiplicative `W` step for a fixed `H`, with `HHᵀ` split into
/// positive and negative parts once.
#[derive(Debug, Clone)]
pub struct MultiplicativeStep<T> {
    h: Array2<T>,
    hht_pos: Array2<T>,
    hht_neg: Array2<T>,
}

impl<T: Scalar> MultiplicativeStep<T> {
    pub fn new(h: ArrayView2<T>) -> Self {
        let hht = h.dot(&h.t());
        MultiplicativeStep {
            h: h.to_owned(),
            hht_pos: positive_part(&hht),
            hht_neg: negative_part(&hht),
        }
    }

    /// Precompute `XHᵀ` split into parts, for repeated steps on the same `X`.
    pub fn target(&self, x: ArrayView2<T>) -> (Array2<T>, Array2<T>) {
        let xht = x.dot(&self.h.t());
        (positive_part(&xht), negative_part(&xht))
    }

    /// `W ← W ⊙ sqrt(((XHᵀ)⁺ + W(HHᵀ)⁻) / ((XHᵀ)⁻ + W(HHᵀ)⁺ + ε))`.
    pub fn apply(&self, w: ArrayView2<T>, xht_pos: &Array2<T>, xht_neg: &Array2<T>) -> Result<Array2<T>> {
        let eps = T::lit(UPDATE_EPSILON);
        let num = xht_pos + &w.dot(&self.hht_neg);
        let den = xht_neg + &w.dot(&self.hht_pos);
        let mut out = w.to_owned();
        for ((idx, v), (&a, &b)) in out.indexed_iter_mut().zip(num.iter().zip(den.iter())) {
            *v *= (a / (b + eps)).sqrt();
            if !v.is_finite() {
                return Err(Error::numerical(format!("W update produced a non-finite value at {idx:?}")));
            }
        }
        Ok(out)
    }
}

pub fn update_w<T: Scalar>(x: &SupervisedMatrix<T>, w: ArrayView2<T>, h: ArrayView2<T>) -> Result<Array2<T>> {
    if w.nrows() != x.nrows() || h.nrows() != w.ncols() || h.ncols() != x.x().ncols() {
        return Err(Error::dimension("W, H and X do not conform"));
    }
    if w.iter().any(|&v| v < T::zero()) {
        return Err(Error::invalid("W must be nonnegative"));
    }
    let step = MultiplicativeStep::new(h);
    let (p, n) = step.target(x.x().view());
    step.apply(w, &p, &n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sunmodel::total_loss;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, s, Array1};
    use rand_distr::{Distribution, StandardNormal};

    fn raw_x(x: Array2<f64>) -> SupervisedMatrix<f64> {
        // undo the column weights so that `X` equals `x` exactly at α = 0.5
        let s = x.ncols() - 1;
        let wa = 0.5f64.sqrt();
        let m = x.slice(s![.., ..s]).mapv(|v| v / wa);
        let y: Array1<f64> = x.column(s).mapv(|v| v / wa);
        SupervisedMatrix::new(m.view(), y.view(), 0.5).unwrap()
    }

    #[test]
    fn h_step_normal_equations() {
        // W=[[1],[1]], X=[[2,0],[0,2]] → H=[[1,1]]
        let x = raw_x(array![[2.0, 0.0], [0.0, 2.0]]);
        let h = update_h(&x, array![[1.0], [1.0]].view()).unwrap();
        assert_abs_diff_eq!(h[[0, 0]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[[0, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn h_step_orthonormal_w() {
        let x = raw_x(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
        let w = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let h = update_h(&x, w.view()).unwrap();
        let expected = w.t().dot(x.x());
        for (a, b) in h.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn h_step_residual_orthogonal() {
        let mut rng = crate::rng::seeded(4);
        let xm: Array2<f64> = Array2::from_shape_fn((20, 6), |_| StandardNormal.sample(&mut rng));
        let x = raw_x(xm);
        let w: Array2<f64> = Array2::from_shape_fn((20, 3), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v.abs()
        });
        let h = update_h(&x, w.view()).unwrap();
        let r = x.x() - &w.dot(&h);
        let g = w.t().dot(&r);
        assert!(g.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn h_step_singular_gram_uses_pseudoinverse() {
        let x = raw_x(array![[1.0, 2.0], [3.0, 4.0]]);
        // duplicated column: WᵀW singular
        let h = update_h(&x, array![[1.0, 1.0], [1.0, 1.0]].view()).unwrap();
        assert!(h.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(h[[0, 0]], h[[1, 0]], epsilon = 1e-12);
    }

    #[test]
    fn w_step_scalar_example() {
        // X=[[3]], W=[[1]], H=[[2]] → W' = √1.5; loss ½(3−2w)²: 0.5 → ≈ 0.1515
        let x = raw_x(array![[3.0, 0.0]]);
        let h = array![[2.0, 0.0]];
        let w0 = array![[1.0]];
        let w1 = update_w(&x, w0.view(), h.view()).unwrap();
        assert_abs_diff_eq!(w1[[0, 0]], 1.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(total_loss(&x, w0.view(), h.view()).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(total_loss(&x, w1.view(), h.view()).unwrap(), 0.151531, epsilon = 1e-6);
    }

    #[test]
    fn zero_entries_stay_zero_and_output_nonnegative() {
        let mut rng = crate::rng::seeded(5);
        let xm: Array2<f64> = Array2::from_shape_fn((10, 4), |_| StandardNormal.sample(&mut rng));
        let x = raw_x(xm);
        let mut w: Array2<f64> = Array2::from_elem((10, 2), 0.5);
        w[[3, 1]] = 0.0;
        let h: Array2<f64> = Array2::from_shape_fn((2, 4), |_| StandardNormal.sample(&mut rng));
        let w1 = update_w(&x, w.view(), h.view()).unwrap();
        assert_eq!(w1[[3, 1]], 0.0);
        assert!(w1.iter().all(|&v| v >= 0.0));
    }
}
