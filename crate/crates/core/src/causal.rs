//! Average marginal component effects of topics on persuasiveness, by
//! ordinary least squares with nonrobust standard errors.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::inference::TopicLoadings;
use crate::ingest::{create_writer, finish_writer, io_err};
use crate::linalg::{svd, Qr};
use crate::scalar::Scalar;

/// Singular values below this fraction of the largest mark a rank-deficient
/// design.
pub const RANK_RCOND: f64 = 1e-10;
pub const CONFIDENCE_LEVEL: f64 = 0.95;
/// Label of the length-in-characters covariate.
pub const LENGTH_TERM: &str = "Arg. Length";
pub const CONST_TERM: &str = "const";

/// Name of topic column `k` (0-based), as `topic(k+1)`.
pub fn topic_term(k: usize) -> String {
    format!("topic({})", k + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    pub terms: Vec<String>,
    pub values: Array2<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    /// Wrap raw columns, checking full column rank.
    pub fn new(terms: Vec<String>, values: Array2<T>) -> Result<Self> {
        if terms.len() != values.ncols() {
            return Err(Error::dimension(format!(
                "{} term names for {} design columns",
                terms.len(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in design matrix"));
        }
        let design = DesignMatrix { terms, values };
        design.check_rank()?;
        Ok(design)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    fn check_rank(&self) -> Result<()> {
        let k = self.ncols();
        if k == 0 {
            return Err(Error::invalid("design has no columns"));
        }
        let (a, transposed) = if self.nrows() >= k {
            (self.values.clone(), false)
        } else {
            (self.values.t().to_owned(), true)
        };
        let dec = svd(a.view());
        let smax = dec.s.iter().copied().fold(T::zero(), T::max);
        let cutoff = smax * T::lit(RANK_RCOND);
        // right singular vectors of the design live in v, or in u when transposed
        let basis = if transposed { &dec.u } else { &dec.v };
        let mut offending = vec![false; k];
        let mut deficient = self.nrows() < k;
        for (idx, &sv) in dec.s.iter().enumerate() {
            if sv <= cutoff {
                deficient = true;
                mark_null_support(basis.column(idx), &mut offending);
            }
        }
        if self.nrows() < k {
            // directions beyond the row count are null as well; name all of
            // the columns that share them
            for (c, flag) in offending.iter_mut().enumerate() {
                let covered = (0..dec.s.len()).map(|i| basis[[c, i]] * basis[[c, i]]).sum::<T>();
                if covered < T::one() - T::lit(1e-8) {
                    *flag = true;
                }
            }
        }
        if deficient {
            let columns = self
                .terms
                .iter()
                .zip(&offending)
                .filter(|(_, &f)| f)
                .map(|(t, _)| t.clone())
                .collect();
            return Err(Error::RankDeficient { columns });
        }
        Ok(())
    }
}

fn mark_null_support<T: Scalar>(v: ArrayView1<T>, offending: &mut [bool]) {
    let vmax = v.iter().map(|x| x.abs()).fold(T::zero(), T::max);
    for (c, &x) in v.iter().enumerate() {
        if x.abs() > vmax * T::lit(1e-6) {
            offending[c] = true;
        }
    }
}

/// Columns `const, topic(1)..topic(J)`, then the covariates in order.
pub fn build_design<T: Scalar>(
    loadings: &TopicLoadings<T>,
    covariates: &[(String, Array1<T>)],
) -> Result<DesignMatrix<T>> {
    let n = loadings.len();
    let j = loadings.topics();
    let mut terms = vec![CONST_TERM.to_string()];
    terms.extend((0..j).map(topic_term));
    let mut values = Array2::<T>::zeros((n, 1 + j + covariates.len()));
    values.column_mut(0).fill(T::one());
    values.slice_mut(ndarray::s![.., 1..=j]).assign(&loadings.w);
    for (c, (name, col)) in covariates.iter().enumerate() {
        if col.len() != n {
            return Err(Error::dimension(format!(
                "covariate {name:?} has {} values for {n} documents",
                col.len()
            )));
        }
        if terms.contains(name) {
            return Err(Error::invalid(format!("duplicate term name {name:?}")));
        }
        terms.push(name.clone());
        values.column_mut(1 + j + c).assign(col);
    }
    DesignMatrix::new(terms, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceType {
    Nonrobust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub term: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    /// One entry per design column, in design order.
    pub terms: Vec<TermEstimate>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub n_obs: usize,
    pub df_resid: usize,
    pub covariance_type: CovarianceType,
}

impl RegressionResult {
    pub fn get(&self, term: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.term == term)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coef).collect()
    }
}

/// OLS of `y` on the design via Householder QR. Standard errors are
/// `sqrt(diag(s²(XᵀX)⁻¹))` with `s² = RSS/(n−k)`; p-values and intervals
/// use Student's t with `n−k` degrees of freedom.
pub fn estimate_amce<T: Scalar>(design: &DesignMatrix<T>, y: ArrayView1<T>) -> Result<RegressionResult> {
    let (n, k) = design.values.dim();
    if y.len() != n {
        return Err(Error::dimension(format!("{} responses for {n} design rows", y.len())));
    }
    if n <= k {
        return Err(Error::invalid(format!("need more observations ({n}) than terms ({k})")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite response value"));
    }
    design.check_rank()?;
    let qr = Qr::new(design.values.view());
    let beta = qr.solve(y);
    let fitted = design.values.dot(&beta);
    let resid: Array1<f64> = (&y - &fitted).mapv(|v| v.as_f64());
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let yf = y.mapv(|v| v.as_f64());
    let ybar = yf.mean().unwrap_or(0.0);
    let has_const = design
        .values
        .axis_iter(Axis(1))
        .any(|c| c.iter().all(|&v| v == T::one()));
    let tss: f64 = if has_const {
        yf.iter().map(|v| (v - ybar).powi(2)).sum()
    } else {
        yf.iter().map(|v| v * v).sum()
    };
    let df = n - k;
    let s2 = rss / df as f64;
    let cov = qr.gram_inverse().mapv(|v| v.as_f64() * s2);
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::numerical(e.to_string()))?;
    let crit = dist.inverse_cdf(0.5 + CONFIDENCE_LEVEL / 2.0);
    let terms = design
        .terms
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let coef = beta[i].as_f64();
            let se = cov[[i, i]].max(0.0).sqrt();
            let t = coef / se;
            let p = if t.is_nan() { f64::NAN } else { (2.0 * dist.sf(t.abs())).min(1.0) };
            TermEstimate {
                term: name.clone(),
                coef,
                se,
                t,
                p,
                ci_low: coef - crit * se,
                ci_high: coef + crit * se,
            }
        })
        .collect();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { f64::NAN };
    let model_df = if has_const { k - 1 } else { k };
    let centered_n = if has_const { n - 1 } else { n };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * centered_n as f64 / df as f64;
    let f_statistic = if model_df == 0 {
        f64::NAN
    } else {
        ((tss - rss) / model_df as f64) / s2
    };
    Ok(RegressionResult {
        terms,
        r_squared,
        adj_r_squared,
        f_statistic,
        n_obs: n,
        df_resid: df,
        covariance_type: CovarianceType::Nonrobust,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectSign {
    Positive,
    Negative,
    NearZero,
}

/// Sign at the 5% level: significant estimates take the sign of the
/// coefficient, the rest are near zero.
pub fn classify(est: &TermEstimate) -> EffectSign {
    if est.p < 1.0 - CONFIDENCE_LEVEL {
        if est.coef > 0.0 {
            EffectSign::Positive
        } else {
            EffectSign::Negative
        }
    } else {
        EffectSign::NearZero
    }
}

pub const EFFECTS_HEADER: &str = "term,coef,se,t,p,ci_low,ci_high";

/// CSV table `term,coef,se,t,p,ci_low,ci_high`, floats written to round-trip.
pub fn effects_csv(result: &RegressionResult) -> String {
    let mut out = String::from(EFFECTS_HEADER);
    out.push('\n');
    for t in &result.terms {
        out.push_str(&format!(
            "\"{}\",{:?},{:?},{:?},{:?},{:?},{:?}\n",
            t.term.replace('"', "\"\""),
            t.coef,
            t.se,
            t.t,
            t.p,
            t.ci_low,
            t.ci_high
        ));
    }
    out
}

/// Parse a table written by [`effects_csv`].
pub fn parse_effects_csv(text: &str) -> Result<Vec<TermEstimate>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::invalid(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != EFFECTS_HEADER {
        return Err(Error::invalid(format!("expected header {EFFECTS_HEADER}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::invalid(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| Error::invalid(format!("field {:?}: {e}", &rec[i])))
        };
        out.push(TermEstimate {
            term: rec[0].to_string(),
            coef: num(1)?,
            se: num(2)?,
            t: num(3)?,
            p: num(4)?,
            ci_low: num(5)?,
            ci_high: num(6)?,
        });
    }
    Ok(out)
}

/// One point of the coefficient plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectPoint {
    pub term: String,
    pub coef: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p: f64,
    pub sign: EffectSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSeries {
    pub topics: Vec<EffectPoint>,
    pub covariates: Vec<EffectPoint>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub n_obs: usize,
    pub covariance_type: CovarianceType,
}

/// Plot-ready series: topic terms in topic order, then the other
/// non-constant terms.
pub fn effect_series(result: &RegressionResult) -> EffectSeries {
    let point = |t: &TermEstimate| EffectPoint {
        term: t.term.clone(),
        coef: t.coef,
        ci_low: t.ci_low,
        ci_high: t.ci_high,
        p: t.p,
        sign: classify(t),
    };
    let mut topics: Vec<(usize, EffectPoint)> = result
        .terms
        .iter()
        .filter_map(|t| {
            let k = t.term.strip_prefix("topic(")?.strip_suffix(')')?.parse::<usize>().ok()?;
            Some((k, point(t)))
        })
        .collect();
    topics.sort_by_key(|(k, _)| *k);
    let covariates = result
        .terms
        .iter()
        .filter(|t| t.term != CONST_TERM && !t.term.starts_with("topic("))
        .map(point)
        .collect();
    EffectSeries {
        topics: topics.into_iter().map(|(_, p)| p).collect(),
        covariates,
        r_squared: result.r_squared,
        adj_r_squared: result.adj_r_squared,
        f_statistic: result.f_statistic,
        n_obs: result.n_obs,
        covariance_type: result.covariance_type,
    }
}

/// Write `<stem>.csv` and `<stem>.json` into `dir`.
pub fn effect_report(dir: &Path, stem: &str, result: &RegressionResult) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    use std::io::Write;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = create_writer(&csv_path)?;
    w.write_all(effects_csv(result).as_bytes()).map_err(io_err(&csv_path))?;
    finish_writer(&csv_path, w)?;
    let json = serde_json::to_string_pretty(&effect_series(result)).expect("series serializes");
    let mut w = create_writer(&json_path)?;
    w.write_all(json.as_bytes()).map_err(io_err(&json_path))?;
    finish_writer(&json_path, w)?;
    Ok((csv_path, json_path))
}
