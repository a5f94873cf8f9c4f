use std::fs;
use std::path::{Path, PathBuf};

use autopersuade::inference::InferenceMode;
use autopersuade::ingest::{DEFAULT_EMBEDDING_DIVISOR, DEFAULT_TRAIN_FRACTION};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const LENGTH_COVARIATE: &str = "length_chars";

fn default_alpha() -> f64 {
    0.5
}
fn default_topics() -> usize {
    10
}
fn default_iters() -> usize {
    100
}
fn default_restarts() -> usize {
    10
}
fn default_folds() -> usize {
    10
}
fn default_divisor() -> f64 {
    DEFAULT_EMBEDDING_DIVISOR
}
fn default_mode() -> String {
    InferenceMode::Converged.as_str().to_string()
}
fn default_covariates() -> Vec<String> {
    vec![LENGTH_COVARIATE.to_string()]
}
fn default_train_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}
fn default_cv_topics() -> Vec<usize> {
    vec![5, 10, 15, 20]
}
fn default_cv_alphas() -> Vec<f64> {
    vec![0.3, 0.5, 0.7]
}
fn default_n_boot() -> usize {
    autopersuade::btrank::DEFAULT_BOOTSTRAPS
}
fn default_kkt_tol() -> f64 {
    autopersuade::inference::DEFAULT_KKT_TOL
}
fn default_bt_max_iters() -> usize {
    autopersuade::btrank::DEFAULT_MAX_ITERS
}
fn default_bt_tol() -> f64 {
    autopersuade::btrank::DEFAULT_TOL
}

/// Flat key/value run configuration. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub embeddings: PathBuf,
    pub comparisons: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(rename = "J", alias = "topics", default = "default_topics")]
    pub topics: usize,
    #[serde(default = "default_iters")]
    pub n_iters: usize,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_divisor")]
    pub embedding_divisor: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub inference_mode: String,
    #[serde(default = "default_covariates")]
    pub covariates: Vec<String>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_cv_topics")]
    pub cv_topics: Vec<usize>,
    #[serde(default = "default_cv_alphas")]
    pub cv_alphas: Vec<f64>,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default = "default_kkt_tol")]
    pub kkt_tol: f64,
    #[serde(default = "default_bt_max_iters")]
    pub bt_max_iters: usize,
    #[serde(default = "default_bt_tol")]
    pub bt_tol: f64,
}

/// Command-line values that replace same-named config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub topics: Option<usize>,
    pub n_iters: Option<usize>,
    pub n_restarts: Option<usize>,
    pub folds: Option<usize>,
    pub inference_mode: Option<String>,
    pub output_dir: Option<PathBuf>,
}

fn open_unit(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::validation(format!("{name} must lie strictly between 0 and 1, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::validation(format!("{name} must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {}", e.message())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.alpha {
            self.alpha = v;
        }
        if let Some(v) = o.topics {
            self.topics = v;
        }
        if let Some(v) = o.n_iters {
            self.n_iters = v;
        }
        if let Some(v) = o.n_restarts {
            self.n_restarts = v;
        }
        if let Some(v) = o.folds {
            self.folds = v;
        }
        if let Some(v) = &o.inference_mode {
            self.inference_mode = v.clone();
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
    }

    pub fn mode(&self) -> CliResult<InferenceMode> {
        self.inference_mode
            .parse()
            .map_err(|e: autopersuade::Error| CliError::validation(e.to_string()))
    }

    pub fn cv_grid(&self) -> Vec<(usize, f64)> {
        self.cv_topics
            .iter()
            .flat_map(|&j| self.cv_alphas.iter().map(move |&a| (j, a)))
            .collect()
    }

    /// Every constraint the downstream modules would enforce.
    pub fn validate(&self) -> CliResult<()> {
        open_unit("alpha", self.alpha)?;
        at_least("J", self.topics, 1)?;
        at_least("n_iters", self.n_iters, 1)?;
        at_least("n_restarts", self.n_restarts, 1)?;
        at_least("folds", self.folds, 2)?;
        at_least("n_boot", self.n_boot, 1)?;
        at_least("bt_max_iters", self.bt_max_iters, 1)?;
        if !(self.embedding_divisor.is_finite() && self.embedding_divisor > 0.0) {
            return Err(CliError::validation("embedding_divisor must be positive and finite"));
        }
        open_unit("train_fraction", self.train_fraction)?;
        if !(self.kkt_tol > 0.0 && self.kkt_tol.is_finite()) {
            return Err(CliError::validation("kkt_tol must be positive and finite"));
        }
        if !(self.bt_tol > 0.0 && self.bt_tol.is_finite()) {
            return Err(CliError::validation("bt_tol must be positive and finite"));
        }
        self.mode()?;
        if let Some(c) = self.covariates.iter().find(|c| c.as_str() != LENGTH_COVARIATE) {
            return Err(CliError::validation(format!(
                "unknown covariate {c:?} (supported: {LENGTH_COVARIATE})"
            )));
        }
        if self.cv_topics.is_empty() || self.cv_alphas.is_empty() {
            return Err(CliError::validation("cv_topics and cv_alphas must be non-empty"));
        }
        for &j in &self.cv_topics {
            at_least("cv_topics entry", j, 1)?;
        }
        for &a in &self.cv_alphas {
            open_unit("cv_alphas entry", a)?;
        }
        Ok(())
    }
}

/// A validated config plus the directory its relative paths hang from.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Context {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = RunConfig::parse(&text)?;
        config.apply(overrides);
        config.validate()?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let output_dir = match &overrides.output_dir {
            Some(dir) => dir.clone(),
            None => base_dir.join(&config.output_dir),
        };
        Ok(Context {
            config,
            base_dir,
            output_dir,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.config.corpus)
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.resolve(&self.config.embeddings)
    }

    pub fn comparisons_path(&self) -> PathBuf {
        self.resolve(&self.config.comparisons)
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.output_dir.join(rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
corpus = "data/corpus.jsonl"
embeddings = "data/embeddings.csv"
comparisons = "data/comparisons.csv"
output_dir = "out"
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.folds, 10);
        assert_eq!(c.n_boot, 500);
        assert_eq!(c.mode().unwrap(), InferenceMode::Converged);
        assert_eq!(c.covariates, vec!["length_chars"]);
        assert!((c.train_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.cv_grid().len(), 12);
        c.validate().unwrap();
    }

    #[test]
    fn flags_win_over_file() {
        let mut c = RunConfig::parse(&format!("{MINIMAL}seed = 4\nJ = 3\n")).unwrap();
        assert_eq!((c.seed, c.topics), (4, 3));
        c.apply(&Overrides {
            seed: Some(9),
            topics: Some(6),
            inference_mode: Some("iterative".into()),
            ..Default::default()
        });
        assert_eq!((c.seed, c.topics), (9, 6));
        assert_eq!(c.mode().unwrap(), InferenceMode::Iterative);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::parse(&format!("{MINIMAL}bogus = 1\n")).is_err());
        for extra in ["alpha = 1.0", "folds = 1", "inference_mode = \"fast\"", "covariates = [\"age\"]"] {
            let c = RunConfig::parse(&format!("{MINIMAL}{extra}\n")).unwrap();
            assert!(c.validate().is_err(), "{extra}");
        }
    }
}
