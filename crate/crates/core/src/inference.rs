//! Topic loadings for documents outside the training set, against a frozen
//! topic basis, and the persuasiveness predicted from them.
//!
//! Neither inference routine accepts responses: loadings depend on the
//! scaled embeddings alone.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{create_writer, finish_writer, io_err};
use crate::linalg::{all_finite, cholesky_solve, pinv};
use crate::rng::seeded;
use crate::scalar::Scalar;
use crate::sunmodel::{MultiplicativeStep, SunModel, INIT_OFFSET};

pub const DEFAULT_INFER_ITERS: usize = 100;
pub const DEFAULT_KKT_TOL: f64 = 1e-8;
/// Width of the uniform jitter added to the iterative-mode initialization.
pub const INIT_JITTER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    Iterative,
    #[default]
    Converged,
}

impl InferenceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InferenceMode::Iterative => "iterative",
            InferenceMode::Converged => "converged",
        }
    }
}

impl fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterative" => Ok(InferenceMode::Iterative),
            "converged" => Ok(InferenceMode::Converged),
            other => Err(Error::invalid(format!(
                "unknown inference mode {other:?} (expected iterative or converged)"
            ))),
        }
    }
}

/// Nonnegative loadings of new documents, one row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicLoadings<T> {
    pub ids: Vec<String>,
    pub w: Array2<T>,
    pub mode: InferenceMode,
    /// Largest KKT residual over all documents; converged mode only.
    pub kkt_max_violation: Option<T>,
}

impl<T: Scalar> TopicLoadings<T> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn topics(&self) -> usize {
        self.w.ncols()
    }

    /// Rows for the given ids, in that order.
    pub fn select(&self, ids: &[String]) -> Result<TopicLoadings<T>> {
        let rows = ids
            .iter()
            .map(|id| {
                self.ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::invalid(format!("no loadings for document {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TopicLoadings {
            ids: ids.to_vec(),
            w: self.w.select(Axis(0), &rows),
            mode: self.mode,
            kkt_max_violation: self.kkt_max_violation,
        })
    }
}

fn check_inputs<T: Scalar>(m: ArrayView2<T>, ids: &[String], model: &SunModel<T>) -> Result<()> {
    if m.ncols() != model.s() {
        return Err(Error::dimension(format!(
            "embeddings have {} dimensions, topic basis has {}",
            m.ncols(),
            model.s()
        )));
    }
    if ids.len() != m.nrows() {
        return Err(Error::dimension(format!("{} ids for {} embedding rows", ids.len(), m.nrows())));
    }
    if !all_finite(m) {
        return Err(Error::invalid("non-finite value in embeddings"));
    }
    Ok(())
}

/// `n_iters` multiplicative steps on `½‖√α·M − W·√α·B‖²` with the basis held
/// fixed, from `0.2 + U[0, 0.01)`. Rows never interact.
pub fn infer_iterative<T: Scalar>(
    m_scaled: ArrayView2<T>,
    ids: &[String],
    model: &SunModel<T>,
    n_iters: usize,
    seed: u64,
) -> Result<TopicLoadings<T>> {
    check_inputs(m_scaled, ids, model)?;
    let mut rng = seeded(seed);
    let j = model.topics();
    let mut w = Array2::<T>::from_shape_fn((m_scaled.nrows(), j), |_| {
        T::lit(INIT_OFFSET + rng.random_range(0.0..INIT_JITTER))
    });
    let step = MultiplicativeStep::new(model.scaled_basis());
    let wa = model.alpha.sqrt();
    let x = m_scaled.mapv(|v| v * wa);
    let (pos, neg) = step.target(x.view());
    for _ in 0..n_iters {
        w = step.apply(w.view(), &pos, &neg)?;
    }
    Ok(TopicLoadings {
        ids: ids.to_vec(),
        w,
        mode: InferenceMode::Iterative,
        kkt_max_violation: None,
    })
}

/// Solution of `min_{w ≥ 0} ‖m − wB‖²` for one document together with its
/// KKT residual.
#[derive(Debug, Clone)]
pub struct NnlsSolution<T> {
    pub w: Array1<T>,
    pub kkt_violation: T,
    pub iterations: usize,
}

/// `max_j max(−g_j, 0, |g_j·w_j| / (1 + ‖m‖²))` with `g = Gw − c`.
pub fn kkt_violation<T: Scalar>(gram: ArrayView2<T>, c: ArrayView1<T>, w: ArrayView1<T>, m_norm_sq: T) -> T {
    let g = gram.dot(&w) - c;
    let rel = T::one() + m_norm_sq;
    g.iter()
        .zip(w.iter())
        .map(|(&gj, &wj)| (-gj).max(T::zero()).max((gj * wj).abs() / rel))
        .fold(T::zero(), T::max)
}

fn solve_passive<T: Scalar>(gram: ArrayView2<T>, c: ArrayView1<T>, passive: &[usize]) -> Array1<T> {
    let sub = gram.select(Axis(0), passive).select(Axis(1), passive);
    let rhs = c.select(Axis(0), passive);
    cholesky_solve(sub.view(), rhs.view()).unwrap_or_else(|| {
        let rcond = T::lit(1e-12).max(T::epsilon() * T::lit(10.0));
        pinv(sub.view(), rcond).dot(&rhs)
    })
}

/// Lawson-Hanson active-set NNLS on the Gram form `G = BBᵀ`, `c = Bm`.
/// Returns the solution and the number of passive-set solves.
pub fn nnls_gram<T: Scalar>(gram: ArrayView2<T>, c: ArrayView1<T>, tol: T, max_iters: usize) -> (Array1<T>, usize) {
    let j = c.len();
    let mut x = Array1::<T>::zeros(j);
    let mut passive = vec![false; j];
    // a coordinate that was just dropped without moving may not re-enter
    // until the iterate changes
    let mut banned = vec![false; j];
    let mut iters = 0;
    while iters < max_iters {
        let z = &c - &gram.dot(&x);
        let entering = (0..j)
            .filter(|&k| !passive[k] && !banned[k] && z[k] > tol)
            .max_by(|&a, &b| z[a].partial_cmp(&z[b]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(t) = entering else { break };
        passive[t] = true;
        while iters < max_iters {
            iters += 1;
            let idx: Vec<usize> = (0..j).filter(|&k| passive[k]).collect();
            if idx.is_empty() {
                break;
            }
            let sol = solve_passive(gram, c, &idx);
            let mut s = Array1::<T>::zeros(j);
            for (p, &k) in idx.iter().enumerate() {
                s[k] = sol[p];
            }
            if idx.iter().all(|&k| s[k] > T::zero()) {
                x = s;
                banned.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut step = T::infinity();
            let mut blocking = idx[0];
            for &k in &idx {
                if s[k] <= T::zero() {
                    let gap = x[k] - s[k];
                    let ratio = if gap > T::zero() { x[k] / gap } else { T::zero() };
                    if ratio < step {
                        step = ratio;
                        blocking = k;
                    }
                }
            }
            for &k in &idx {
                let xk = x[k];
                x[k] = xk + step * (s[k] - xk);
            }
            x[blocking] = T::zero();
            for &k in &idx {
                if x[k] <= T::zero() {
                    x[k] = T::zero();
                    passive[k] = false;
                }
            }
            if step == T::zero() {
                banned[blocking] = true;
                break;
            }
        }
    }
    (x, iters)
}

/// Solve one document's NNLS problem against basis `B` and certify it.
pub fn solve_document<T: Scalar>(
    gram: ArrayView2<T>,
    basis: ArrayView2<T>,
    m: ArrayView1<T>,
    tol: T,
) -> NnlsSolution<T> {
    let c = basis.dot(&m);
    let m_norm_sq = m.dot(&m);
    let budget = 10 * c.len() + 50;
    let (w, iterations) = nnls_gram(gram, c.view(), tol, budget);
    let kkt_violation = kkt_violation(gram, c.view(), w.view(), m_norm_sq);
    NnlsSolution {
        w,
        kkt_violation,
        iterations,
    }
}

/// Per-document NNLS to a KKT certificate: for every coordinate the
/// gradient `g = wBBᵀ − mBᵀ` satisfies `g_j ≥ −tol` and
/// `|g_j·w_j| ≤ tol·(1 + ‖m‖²)`.
pub fn infer_converged<T: Scalar>(
    m_scaled: ArrayView2<T>,
    ids: &[String],
    model: &SunModel<T>,
    tol: T,
) -> Result<TopicLoadings<T>> {
    check_inputs(m_scaled, ids, model)?;
    if !(tol > T::zero()) {
        return Err(Error::invalid("KKT tolerance must be positive"));
    }
    let basis = model.basis();
    let gram = basis.dot(&basis.t());
    let solutions: Vec<NnlsSolution<T>> = (0..m_scaled.nrows())
        .into_par_iter()
        .map(|i| solve_document(gram.view(), basis.view(), m_scaled.row(i), tol))
        .collect();
    let mut w = Array2::<T>::zeros((m_scaled.nrows(), model.topics()));
    let mut worst: Option<(usize, T)> = None;
    for (i, sol) in solutions.iter().enumerate() {
        w.row_mut(i).assign(&sol.w);
        if worst.is_none_or(|(_, v)| sol.kkt_violation > v || sol.kkt_violation.is_nan()) {
            worst = Some((i, sol.kkt_violation));
        }
    }
    let kkt_max = worst.map(|(_, v)| v).unwrap_or_else(T::zero);
    if let Some((i, v)) = worst {
        if !(v <= tol) {
            return Err(Error::numerical(format!(
                "KKT certificate failed for document {:?}: violation {:e} exceeds tolerance {:e}",
                ids[i],
                v.as_f64(),
                tol.as_f64()
            )));
        }
    }
    Ok(TopicLoadings {
        ids: ids.to_vec(),
        w,
        mode: InferenceMode::Converged,
        kkt_max_violation: Some(kkt_max),
    })
}

/// Dispatch on `mode`; `n_iters` and `seed` only matter for iterative mode.
pub fn infer<T: Scalar>(
    m_scaled: ArrayView2<T>,
    ids: &[String],
    model: &SunModel<T>,
    mode: InferenceMode,
    n_iters: usize,
    seed: u64,
    tol: T,
) -> Result<TopicLoadings<T>> {
    match mode {
        InferenceMode::Iterative => infer_iterative(m_scaled, ids, model, n_iters, seed),
        InferenceMode::Converged => infer_converged(m_scaled, ids, model, tol),
    }
}

/// `½‖m − wB‖²` per document, the objective both modes minimize (up to
/// the factor α).
pub fn reconstruction_objective<T: Scalar>(
    m_scaled: ArrayView2<T>,
    loadings: &TopicLoadings<T>,
    model: &SunModel<T>,
) -> Result<Array1<T>> {
    if loadings.w.nrows() != m_scaled.nrows() || loadings.topics() != model.topics() {
        return Err(Error::dimension("loadings do not match embeddings or model"));
    }
    let resid = &m_scaled - &loadings.w.dot(&model.basis());
    Ok(resid.map_axis(Axis(1), |r| r.dot(&r) / T::lit(2.0)))
}

/// `W·γ` mapped back to the original response units.
pub fn predict_response<T: Scalar>(loadings: &TopicLoadings<T>, model: &SunModel<T>) -> Result<Array1<T>> {
    if loadings.topics() != model.topics() {
        return Err(Error::dimension(format!(
            "loadings have {} topics, model has {}",
            loadings.topics(),
            model.topics()
        )));
    }
    let scaled = loadings.w.dot(&model.gamma());
    Ok(model.scaling.unscale_response(scaled.view()))
}

/// CSV `id,t0,…,t{J-1},predicted_score,mode`.
pub fn write_loadings<T: Scalar>(path: &Path, loadings: &TopicLoadings<T>, predicted: ArrayView1<T>) -> Result<()> {
    if predicted.len() != loadings.len() {
        return Err(Error::dimension("one prediction per document required"));
    }
    let mut out = create_writer(path)?;
    use std::io::Write;
    let mut header = vec!["id".to_string()];
    header.extend((0..loadings.topics()).map(|k| format!("t{k}")));
    header.push("predicted_score".into());
    header.push("mode".into());
    let mut text = header.join(",");
    text.push('\n');
    for (i, id) in loadings.ids.iter().enumerate() {
        text.push_str(id);
        for v in loadings.w.row(i) {
            text.push_str(&format!(",{:?}", v));
        }
        text.push_str(&format!(",{:?},{}\n", predicted[i], loadings.mode));
    }
    out.write_all(text.as_bytes()).map_err(io_err(path))?;
    finish_writer(path, out)
}

/// Parse a loadings CSV back into loadings and predictions.
pub fn load_loadings(path: &Path) -> Result<(TopicLoadings<f64>, Array1<f64>)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?.split(',').collect();
    let j = header.len().saturating_sub(3);
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain((0..j).map(|k| format!("t{k}")))
        .chain(["predicted_score".to_string(), "mode".to_string()])
        .collect();
    if header.len() < 3 || header != expected {
        return Err(parse_err(1, format!("expected header {}", expected.join(","))));
    }
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut pred = Vec::new();
    let mut mode = InferenceMode::Converged;
    for (ln, line) in lines.enumerate() {
        let lineno = ln + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != j + 3 {
            return Err(parse_err(lineno, format!("expected {} fields, got {}", j + 3, fields.len())));
        }
        ids.push(fields[0].to_string());
        for f in &fields[1..=j + 1] {
            let v: f64 = f.parse().map_err(|e| parse_err(lineno, format!("{f:?}: {e}")))?;
            data.push(v);
        }
        pred.push(data.pop().expect("prediction field"));
        mode = fields[j + 2].parse()?;
    }
    let w = Array2::from_shape_vec((ids.len(), j), data).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((
        TopicLoadings {
            ids,
            w,
            mode,
            kkt_max_violation: None,
        },
        Array1::from(pred),
    ))
}
