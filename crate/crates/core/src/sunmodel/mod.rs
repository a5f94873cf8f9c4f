//! Supervised semi-nonnegative topic model.
//!
//! Scaled embeddings `M` (n × s) and responses `Y` (n) are explained by
//! nonnegative topic loadings `W` (n × J) through a topic basis `B`
//! (J × s) and persuasion coefficients `γ` (J):
//!
//! ```text
//! L = α·½‖M − WB‖² + (1−α)·½‖Y − Wγ‖² = ½‖X − WH‖²
//! X = (√α·M | √(1−α)·Y),   H = (√α·B | √(1−α)·γ)
//! ```
//!
//! so fitting reduces to semi-NMF of `X`, solved by alternating the
//! closed-form `H` step and the multiplicative `W` step.

mod kmeans;
mod persist;
mod restart;
mod updates;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

pub use kmeans::{kmeans, KMeans, MAX_LLOYD_ITERS};
pub use persist::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use restart::{
    evaluate_restart, multi_restart_fit, RestartEntry, RestartOutcome, RestartPlan, RestartReport,
    DEFAULT_HOLDOUT_FRACTION,
};
pub use updates::{update_h, update_w, MultiplicativeStep, PINV_RCOND, UPDATE_EPSILON};

use crate::error::{Error, Result};
use crate::ingest::{fit_scaling, ScalingParams};
use crate::linalg::{all_finite, frobenius_sq, mean_and_std};
use crate::scalar::Scalar;

/// Constant added to the k-means indicator matrix before the first update.
pub const INIT_OFFSET: f64 = 0.2;
pub const DEFAULT_FIT_ITERS: usize = 100;
/// Topics whose loading column has a smaller population std are dead.
pub const DEAD_TOPIC_STD: f64 = 1e-12;

/// The stacked matrix `X = (√α·M | √(1−α)·Y)` together with the scaling
/// that produced `M` and `Y`.
#[derive(Debug, Clone)]
pub struct SupervisedMatrix<T> {
    x: Array2<T>,
    alpha: T,
    s: usize,
    scaling: ScalingParams<T>,
}

impl<T: Scalar> SupervisedMatrix<T> {
    /// Build from already-scaled embeddings and responses. The attached
    /// scaling is the identity.
    pub fn new(m_scaled: ArrayView2<T>, y_scaled: ArrayView1<T>, alpha: T) -> Result<Self> {
        let s = m_scaled.ncols();
        Self::with_scaling(m_scaled, y_scaled, alpha, ScalingParams::identity(s))
    }

    /// Build from scaled data, recording the scaling that produced it.
    pub fn with_scaling(
        m_scaled: ArrayView2<T>,
        y_scaled: ArrayView1<T>,
        alpha: T,
        scaling: ScalingParams<T>,
    ) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let (n, s) = m_scaled.dim();
        if y_scaled.len() != n {
            return Err(Error::dimension(format!("{} responses for {n} embedding rows", y_scaled.len())));
        }
        if scaling.dim() != s {
            return Err(Error::dimension(format!(
                "scaling has {} dimensions, embeddings have {s}",
                scaling.dim()
            )));
        }
        if !all_finite(m_scaled) || !y_scaled.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite value in model inputs"));
        }
        let (wa, wr) = (alpha.sqrt(), (T::one() - alpha).sqrt());
        let mut x = Array2::<T>::zeros((n, s + 1));
        x.slice_mut(s![.., ..s]).assign(&m_scaled.mapv(|v| v * wa));
        x.column_mut(s).assign(&y_scaled.mapv(|v| v * wr));
        Ok(SupervisedMatrix { x, alpha, s, scaling })
    }

    /// Fit the scaling on raw embeddings and responses, then stack.
    pub fn from_raw(m: ArrayView2<T>, y: ArrayView1<T>, alpha: T, embedding_divisor: T) -> Result<Self> {
        let scaling = fit_scaling(m, y, embedding_divisor)?;
        let ms = scaling.scale_embeddings(m)?;
        let ys = scaling.scale_response(y);
        Self::with_scaling(ms.view(), ys.view(), alpha, scaling)
    }

    pub fn x(&self) -> &Array2<T> {
        &self.x
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Embedding dimension.
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn scaling(&self) -> &ScalingParams<T> {
        &self.scaling
    }

    /// Scaled embeddings `M`, recovered from `X`.
    pub fn scaled_embeddings(&self) -> Array2<T> {
        let wa = self.alpha.sqrt();
        self.x.slice(s![.., ..self.s]).mapv(|v| v / wa)
    }

    /// Scaled responses `Y`, recovered from `X`.
    pub fn scaled_response(&self) -> Array1<T> {
        let wr = (T::one() - self.alpha).sqrt();
        self.x.column(self.s).mapv(|v| v / wr)
    }

    /// Rows `rows` of this matrix, keeping alpha and scaling.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        SupervisedMatrix {
            x: self.x.select(Axis(0), rows),
            alpha: self.alpha,
            s: self.s,
            scaling: self.scaling.clone(),
        }
    }
}

/// A fitted model. `B` and `γ` are views of `H`, recomputed on access.
#[derive(Debug, Clone, PartialEq)]
pub struct SunModel<T> {
    pub w: Array2<T>,
    pub h: Array2<T>,
    pub alpha: T,
    pub seed: u64,
    pub n_iters: usize,
    pub loss_trace: Vec<T>,
    pub scaling: ScalingParams<T>,
    pub normalized: bool,
    /// Ids of the training rows of `W`, when known.
    pub ids: Vec<String>,
}

impl<T: Scalar> SunModel<T> {
    pub fn topics(&self) -> usize {
        self.h.nrows()
    }

    /// Embedding dimension.
    pub fn s(&self) -> usize {
        self.h.ncols() - 1
    }

    /// `√α·B`, the embedding block of `H`.
    pub fn scaled_basis(&self) -> ArrayView2<'_, T> {
        self.h.slice(s![.., ..self.s()])
    }

    /// Topic basis `B = H[:, ..s] / √α`.
    pub fn basis(&self) -> Array2<T> {
        let wa = self.alpha.sqrt();
        self.scaled_basis().mapv(|v| v / wa)
    }

    /// Persuasion coefficients `γ = H[:, s] / √(1−α)`.
    pub fn gamma(&self) -> Array1<T> {
        let wr = (T::one() - self.alpha).sqrt();
        self.h.column(self.s()).mapv(|v| v / wr)
    }

    pub fn final_loss(&self) -> Option<T> {
        self.loss_trace.last().copied()
    }

    /// Topics whose loadings have (near) zero spread.
    pub fn dead_topics(&self) -> Vec<usize> {
        self.w
            .axis_iter(Axis(1))
            .enumerate()
            .filter(|(_, c)| mean_and_std(*c).1 <= T::lit(DEAD_TOPIC_STD))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.w.nrows() {
            return Err(Error::dimension(format!("{} ids for {} loading rows", ids.len(), self.w.nrows())));
        }
        self.ids = ids;
        Ok(self)
    }
}

fn check_shapes<T: Scalar>(x: &SupervisedMatrix<T>, w: &ArrayView2<T>, h: &ArrayView2<T>) -> Result<()> {
    if w.nrows() != x.nrows() || h.ncols() != x.x.ncols() || w.ncols() != h.nrows() {
        return Err(Error::dimension(format!(
            "X is {}×{}, W is {}×{}, H is {}×{}",
            x.nrows(),
            x.x.ncols(),
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

/// `½‖X − WH‖²_F`.
pub fn total_loss<T: Scalar>(x: &SupervisedMatrix<T>, w: ArrayView2<T>, h: ArrayView2<T>) -> Result<T> {
    check_shapes(x, &w, &h)?;
    let resid = &x.x - &w.dot(&h);
    Ok(frobenius_sq(resid.view()) / T::lit(2.0))
}

/// `(L_A, L_R) = (½‖M − WB‖², ½‖Y − Wγ‖²)` in scaled units.
pub fn loss_components<T: Scalar>(x: &SupervisedMatrix<T>, w: ArrayView2<T>, h: ArrayView2<T>) -> Result<(T, T)> {
    check_shapes(x, &w, &h)?;
    let s = x.s;
    let (wa, wr) = (x.alpha.sqrt(), (T::one() - x.alpha).sqrt());
    let m = x.scaled_embeddings();
    let y = x.scaled_response();
    let b = h.slice(s![.., ..s]).mapv(|v| v / wa);
    let gamma = h.column(s).mapv(|v| v / wr);
    let la = frobenius_sq((&m - &w.dot(&b)).view()) / T::lit(2.0);
    let lr = (&y - &w.dot(&gamma)).iter().map(|&r| r * r).sum::<T>() / T::lit(2.0);
    Ok((la, lr))
}

/// K-means cluster indicators of the rows of `X`, plus 0.2 everywhere.
pub fn init_w_kmeans<T: Scalar>(x: &SupervisedMatrix<T>, topics: usize, seed: u64) -> Result<Array2<T>> {
    if topics == 0 {
        return Err(Error::invalid("number of topics must be at least 1"));
    }
    if topics > x.nrows() {
        return Err(Error::invalid(format!(
            "cannot fit {topics} topics to {} documents",
            x.nrows()
        )));
    }
    let km = kmeans(x.x.view(), topics, seed, MAX_LLOYD_ITERS)?;
    let offset = T::lit(INIT_OFFSET);
    let mut w = Array2::<T>::from_elem((x.nrows(), topics), offset);
    for (i, &k) in km.labels.iter().enumerate() {
        w[[i, k]] += T::one();
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub topics: usize,
    pub n_iters: usize,
    pub seed: u64,
    /// When set, stop early once the relative loss decrease drops below this.
    pub tol: Option<f64>,
}

impl FitOptions {
    pub fn new(topics: usize, seed: u64) -> Self {
        FitOptions {
            topics,
            n_iters: DEFAULT_FIT_ITERS,
            seed,
            tol: None,
        }
    }

    pub fn iters(mut self, n_iters: usize) -> Self {
        self.n_iters = n_iters;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }
}

/// Initialize by k-means, then run rounds of (H step, W step), recording
/// the total loss after each round. The model is returned un-normalized.
pub fn fit<T: Scalar>(x: &SupervisedMatrix<T>, opts: FitOptions) -> Result<SunModel<T>> {
    if opts.n_iters == 0 {
        return Err(Error::invalid("n_iters must be at least 1"));
    }
    let mut w = init_w_kmeans(x, opts.topics, opts.seed)?;
    let mut h = Array2::<T>::zeros((opts.topics, x.s + 1));
    let mut trace: Vec<T> = Vec::with_capacity(opts.n_iters);
    for _ in 0..opts.n_iters {
        h = update_h(x, w.view())?;
        w = update_w(x, w.view(), h.view())?;
        let loss = total_loss(x, w.view(), h.view())?;
        let stop = match (opts.tol, trace.last()) {
            (Some(tol), Some(&prev)) => ((prev - loss) / prev.abs().max(T::min_positive_value())).as_f64() < tol,
            _ => false,
        };
        trace.push(loss);
        if stop {
            break;
        }
    }
    let model = SunModel {
        w,
        h,
        alpha: x.alpha,
        seed: opts.seed,
        n_iters: opts.n_iters,
        loss_trace: trace,
        scaling: x.scaling.clone(),
        normalized: false,
        ids: Vec::new(),
    };
    let dead = model.dead_topics();
    if !dead.is_empty() {
        log::warn!("fit produced dead topics {dead:?}");
    }
    Ok(model)
}

/// Divide each loading column by its population std and multiply the
/// matching row of `H` by it. `WH` is unchanged.
pub fn normalize<T: Scalar>(model: &SunModel<T>) -> Result<SunModel<T>> {
    let mut out = model.clone();
    for k in 0..model.topics() {
        let (_, std) = mean_and_std(model.w.column(k));
        if !(std > T::lit(DEAD_TOPIC_STD)) {
            return Err(Error::DeadTopic { topic: k });
        }
        out.w.column_mut(k).mapv_inplace(|v| v / std);
        out.h.row_mut(k).mapv_inplace(|v| v * std);
    }
    out.normalized = true;
    Ok(out)
}
