mod data;
mod estimate;
mod model;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use autopersuade::ingest::{load_corpus, load_embeddings, load_split, Corpus, Split};
use autopersuade::sunmodel::{load_model, RestartPlan, SunModel};
use autopersuade::rng::derive_seed;
use ndarray::{Array1, Array2};

use crate::config::Context;
use crate::error::{CliError, CliResult};
use crate::manifest::{unix_now, RunManifest, StageLog};

pub use data::{read_bt_scores, write_bt_scores, BtRow};
pub use estimate::parse_criteria;

pub const SPLIT_FILE: &str = "split.csv";
pub const BT_SCORES_FILE: &str = "scores/bt_scores.csv";
pub const CV_RESULTS_FILE: &str = "cv/cv_results.csv";
pub const CV_BASELINE_FILE: &str = "cv/baseline.csv";
pub const MODEL_FILE: &str = "models/model.json";
pub const RESTARTS_FILE: &str = "models/restarts.csv";
pub const AMCE_DIR: &str = "amce";
pub const AMCE_STEM: &str = "effects";
pub const COHERENCE_FILE: &str = "reports/coherence.json";
pub const COHERENCE_MSE_FILE: &str = "reports/coherence_vs_mse.csv";
pub const FILTER_FILE: &str = "reports/filter_decisions.csv";
pub const WIN_RATES_FILE: &str = "reports/win_rates.csv";
pub const TRUTH_FILE: &str = "ground_truth/truth.json";

/// Documents to infer loadings for.
#[derive(Debug, Clone, PartialEq)]
pub enum InferTarget {
    Part(Split),
    All,
    /// An embeddings file of documents outside the corpus.
    File(PathBuf),
}

impl InferTarget {
    pub fn label(&self) -> &'static str {
        match self {
            InferTarget::Part(Split::Train) => "train",
            InferTarget::Part(Split::Estimation) => "estimation",
            InferTarget::All => "all",
            InferTarget::File(_) => "new",
        }
    }

    pub fn output_file(&self) -> String {
        format!("scores/loadings_{}.csv", self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Split,
    Bt,
    Cv,
    Fit,
    Infer { target: InferTarget },
    Amce,
    Coherence,
    Filter { candidates: PathBuf, protos: PathBuf, criteria: String },
    Winrates { groups: PathBuf },
    Synth { spec: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Split => "split",
            Command::Bt => "bt",
            Command::Cv => "cv",
            Command::Fit => "fit",
            Command::Infer { .. } => "infer",
            Command::Amce => "amce",
            Command::Coherence => "coherence",
            Command::Filter { .. } => "filter",
            Command::Winrates { .. } => "winrates",
            Command::Synth { .. } => "synth",
        }
    }

    /// Files that must exist before the command may touch the output
    /// directory.
    fn required_inputs(&self, ctx: &Context) -> Vec<(&'static str, PathBuf)> {
        let corpus = ("corpus", ctx.corpus_path());
        let embeddings = ("embeddings", ctx.embeddings_path());
        let comparisons = ("comparisons", ctx.comparisons_path());
        let split = ("split file (run `split` first)", ctx.out(SPLIT_FILE));
        let scores = ("scores file (run `bt` first)", ctx.out(BT_SCORES_FILE));
        let model = ("model file (run `fit` first)", ctx.out(MODEL_FILE));
        match self {
            Command::Split => vec![corpus],
            Command::Bt => vec![corpus, comparisons, split],
            Command::Cv | Command::Fit => vec![corpus, embeddings, split, scores],
            Command::Infer { target } => match target {
                InferTarget::File(p) => vec![model, ("new embeddings", p.clone())],
                _ => vec![model, corpus, embeddings, split],
            },
            Command::Amce | Command::Coherence => vec![corpus, embeddings, split, scores, model],
            Command::Filter { candidates, protos, .. } => vec![
                model,
                embeddings,
                ("candidates", candidates.clone()),
                ("protos", protos.clone()),
            ],
            Command::Winrates { groups } => vec![comparisons, ("groups", groups.clone())],
            Command::Synth { spec } => vec![("synthetic spec", spec.clone())],
        }
    }

    /// Argument checks that need no file contents.
    pub fn precheck(&self, ctx: &Context) -> CliResult<()> {
        for (what, path) in self.required_inputs(ctx) {
            if !path.is_file() {
                return Err(CliError::validation(format!("missing {what}: {}", path.display())));
            }
        }
        match self {
            Command::Filter { criteria, .. } => parse_criteria(criteria)?.validate(ctx.config.topics)?,
            Command::Synth { spec } => {
                data::read_spec(spec)?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Validate, execute, and record the stage in the manifest.
pub fn run(command: &Command, ctx: &Context) -> CliResult<()> {
    command.precheck(ctx)?;
    let started = unix_now();
    let mut log = StageLog::default();
    let result = match command {
        Command::Split => data::split(ctx, &mut log),
        Command::Bt => data::bt(ctx, &mut log),
        Command::Cv => model::cv(ctx, &mut log),
        Command::Fit => model::fit(ctx, &mut log),
        Command::Infer { target } => model::infer(ctx, target, &mut log),
        Command::Amce => estimate::amce(ctx, &mut log),
        Command::Coherence => model::coherence(ctx, &mut log),
        Command::Filter {
            candidates,
            protos,
            criteria,
        } => estimate::filter(ctx, candidates, protos, criteria, &mut log),
        Command::Winrates { groups } => data::winrates(ctx, groups, &mut log),
        Command::Synth { spec } => data::synth(ctx, spec, &mut log),
    };
    let mut manifest = RunManifest::load_or_new(&ctx.output_dir, &ctx.config)?;
    let record = log.record(started, result.as_ref().err().map(|e| e.to_string()))?;
    manifest.stages.insert(command.name().to_string(), record);
    manifest.save(&ctx.output_dir)?;
    match &result {
        Ok(()) => log::info!("stage {} finished", command.name()),
        Err(e) => log::warn!("stage {} failed: {e}", command.name()),
    }
    result
}

fn config_label(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Record an output that lives under the output directory.
fn emit(ctx: &Context, log: &mut StageLog, rel: &str) -> PathBuf {
    let path = ctx.out(rel);
    if let Some(parent) = path.parent() {
        let _ = std::fs::create_dir_all(parent);
    }
    log.output(rel, &path);
    log::debug!("writing {}", path.display());
    path
}

fn corpus_with_split(ctx: &Context, log: &mut StageLog) -> CliResult<Corpus> {
    log.input(config_label(&ctx.config.corpus), &ctx.corpus_path());
    log.input(SPLIT_FILE, &ctx.out(SPLIT_FILE));
    let corpus = load_corpus(&ctx.corpus_path())?;
    Ok(load_split(&ctx.out(SPLIT_FILE), &corpus)?)
}

fn embeddings_for(ctx: &Context, log: &mut StageLog, ids: &[String]) -> CliResult<Array2<f64>> {
    log.input(config_label(&ctx.config.embeddings), &ctx.embeddings_path());
    let emb = load_embeddings::<f64>(&ctx.embeddings_path())?;
    Ok(emb.select(ids)?)
}

fn responses_for(ctx: &Context, log: &mut StageLog, ids: &[String]) -> CliResult<Array1<f64>> {
    log.input(BT_SCORES_FILE, &ctx.out(BT_SCORES_FILE));
    let scores = read_bt_scores(&ctx.out(BT_SCORES_FILE))?;
    let by_id: BTreeMap<&str, f64> = scores.iter().map(|r| (r.id.as_str(), r.score)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::validation(format!("no Bradley-Terry score for document {id:?}")))
        })
        .collect()
}

/// Corpus, training ids, raw embeddings and scores.
type TrainingData = (Corpus, Vec<String>, Array2<f64>, Array1<f64>);

fn training_data(ctx: &Context, log: &mut StageLog) -> CliResult<TrainingData> {
    let corpus = corpus_with_split(ctx, log)?;
    let ids = corpus.ids_in(Split::Train)?;
    let m = embeddings_for(ctx, log, &ids)?;
    let y = responses_for(ctx, log, &ids)?;
    Ok((corpus, ids, m, y))
}

fn load_fitted(ctx: &Context, log: &mut StageLog) -> CliResult<SunModel<f64>> {
    log.input(MODEL_FILE, &ctx.out(MODEL_FILE));
    Ok(load_model::<f64>(&ctx.out(MODEL_FILE))?)
}

/// Shared by `fit` and `coherence` so both see the same restarts.
fn restart_plan(ctx: &Context) -> RestartPlan {
    let c = &ctx.config;
    RestartPlan::new(c.topics, c.n_iters, c.n_restarts, derive_seed(c.seed, "fit"))
}
