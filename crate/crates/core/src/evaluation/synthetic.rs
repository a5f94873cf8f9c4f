use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Comparison, ComparisonSet, Corpus, Document, EmbeddingMatrix, Winner};
use crate::rng::{derive_seed, seeded};

fn default_comparisons() -> usize {
    20
}

fn default_strength_scale() -> f64 {
    0.5
}

fn default_words() -> usize {
    40
}

fn default_vocab() -> usize {
    30
}

fn default_docs_per_root() -> usize {
    4
}

fn default_loading_scale() -> f64 {
    1.0
}

/// Planted instance: half-normal loadings `W*`, standard normal basis `B*`,
/// `M = W*B* + noise`, `Y = W*γ* + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub s: usize,
    #[serde(rename = "J")]
    pub topics: usize,
    pub noise_sd: f64,
    /// Scale of the half-normal loading distribution.
    #[serde(default = "default_loading_scale")]
    pub loading_scale: f64,
    /// Planted response coefficients; evenly spaced from 1 to −1 when empty.
    #[serde(default)]
    pub true_gamma: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_comparisons")]
    pub comparisons_per_doc: usize,
    /// Judges compare strengths `exp(strength_scale·Y)`.
    #[serde(default = "default_strength_scale")]
    pub strength_scale: f64,
    #[serde(default = "default_words")]
    pub words_per_doc: usize,
    #[serde(default = "default_vocab")]
    pub vocab_per_topic: usize,
    #[serde(default = "default_docs_per_root")]
    pub docs_per_root: usize,
}

impl SyntheticSpec {
    pub fn new(n: usize, s: usize, topics: usize, noise_sd: f64, seed: u64) -> Self {
        SyntheticSpec {
            n,
            s,
            topics,
            noise_sd,
            loading_scale: default_loading_scale(),
            true_gamma: Vec::new(),
            seed,
            comparisons_per_doc: default_comparisons(),
            strength_scale: default_strength_scale(),
            words_per_doc: default_words(),
            vocab_per_topic: default_vocab(),
            docs_per_root: default_docs_per_root(),
        }
    }

    pub fn gamma(&self) -> Vec<f64> {
        if !self.true_gamma.is_empty() {
            return self.true_gamma.clone();
        }
        if self.topics == 1 {
            return vec![1.0];
        }
        (0..self.topics)
            .map(|k| 1.0 - 2.0 * k as f64 / (self.topics - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.s == 0 || self.topics == 0 {
            return Err(Error::invalid("synthetic spec needs n ≥ 2, s ≥ 1 and J ≥ 1"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be a nonnegative finite number"));
        }
        if !(self.loading_scale > 0.0 && self.loading_scale.is_finite()) {
            return Err(Error::invalid("loading_scale must be positive"));
        }
        if !self.true_gamma.is_empty() && self.true_gamma.len() != self.topics {
            return Err(Error::invalid(format!(
                "true_gamma has {} entries for J = {}",
                self.true_gamma.len(),
                self.topics
            )));
        }
        if !(self.strength_scale >= 0.0 && self.strength_scale.is_finite()) {
            return Err(Error::invalid("strength_scale must be a nonnegative finite number"));
        }
        if self.docs_per_root == 0 || self.vocab_per_topic == 0 {
            return Err(Error::invalid("docs_per_root and vocab_per_topic must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub embeddings: EmbeddingMatrix<f64>,
    pub y: Array1<f64>,
    pub w_true: Array2<f64>,
    pub b_true: Array2<f64>,
    pub gamma_true: Array1<f64>,
    /// Pairwise judgements drawn with strengths `exp(strength_scale·Y)`.
    pub comparisons: ComparisonSet,
}

impl SyntheticData {
    /// `n_new` further documents from the same planted basis and
    /// coefficients: fresh loadings and noise drawn from a stream named
    /// `stream`. Returns `(M, Y, W*)`.
    pub fn fresh_documents(
        &self,
        spec: &SyntheticSpec,
        n_new: usize,
        stream: &str,
    ) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
        let mut rng = seeded(derive_seed(spec.seed, &format!("synthetic/fresh/{stream}")));
        let w = Array2::from_shape_fn((n_new, spec.topics), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            spec.loading_scale * z.abs()
        });
        let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
        let m = w.dot(&self.b_true) + Array2::from_shape_fn((n_new, spec.s), |_| noise.sample(&mut rng));
        let y = w.dot(&self.gamma_true) + Array1::from_shape_fn(n_new, |_| noise.sample(&mut rng));
        Ok((m, y, w))
    }
}

pub fn topic_word(topic: usize, i: usize) -> String {
    format!("topic{topic}word{i}")
}

/// Draw a planted instance. Every stream is derived from `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (n, s, j) = (spec.n, spec.s, spec.topics);
    let mut rng = seeded(derive_seed(spec.seed, "synthetic/factors"));
    let w_true = Array2::from_shape_fn((n, j), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        spec.loading_scale * z.abs()
    });
    let b_true = Array2::from_shape_fn((j, s), |_| StandardNormal.sample(&mut rng));
    let gamma_true = Array1::from(spec.gamma());
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seeded(derive_seed(spec.seed, "synthetic/noise"));
    let m = w_true.dot(&b_true) + Array2::from_shape_fn((n, s), |_| noise.sample(&mut rng));
    let y = w_true.dot(&gamma_true) + Array1::from_shape_fn(n, |_| noise.sample(&mut rng));

    let ids: Vec<String> = (0..n).map(|i| format!("doc{i:05}")).collect();
    let mut rng = seeded(derive_seed(spec.seed, "synthetic/text"));
    let documents = (0..n)
        .map(|i| {
            let row = w_true.row(i);
            let total: f64 = row.sum();
            let words: Vec<String> = (0..spec.words_per_doc)
                .map(|_| {
                    let mut u = rng.random::<f64>() * total;
                    let mut k = j - 1;
                    for (t, &v) in row.iter().enumerate() {
                        if u < v {
                            k = t;
                            break;
                        }
                        u -= v;
                    }
                    topic_word(k, rng.random_range(0..spec.vocab_per_topic))
                })
                .collect();
            Document::new(
                ids[i].clone(),
                words.join(" "),
                Some(format!("root{:05}", i / spec.docs_per_root)),
            )
        })
        .collect();
    let corpus = Corpus::new(documents)?;

    let mut rng = seeded(derive_seed(spec.seed, "synthetic/comparisons"));
    let strength = y.mapv(|v| (spec.strength_scale * v).exp());
    let mut records = Vec::new();
    let judge = |a: usize, b: usize, rng: &mut crate::rng::Rng, idx: usize| -> Result<Comparison> {
        let p = strength[a] / (strength[a] + strength[b]);
        let winner = if rng.random::<f64>() < p { Winner::Left } else { Winner::Right };
        Comparison::new(format!("s{:06}", idx / 10), ids[a].clone(), ids[b].clone(), winner)
    };
    // a ring keeps the comparison graph connected
    for a in 0..n {
        let b = (a + 1) % n;
        let idx = records.len();
        records.push(judge(a, b, &mut rng, idx)?);
    }
    let extra = (spec.comparisons_per_doc.saturating_sub(2) * n) / 2;
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let idx = records.len();
        records.push(judge(a, b, &mut rng, idx)?);
    }
    let comparisons = ComparisonSet::new(records)?;
    let embeddings = EmbeddingMatrix::new(ids, m)?;
    Ok(SyntheticData {
        corpus,
        embeddings,
        y,
        w_true,
        b_true,
        gamma_true,
        comparisons,
    })
}
