use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use autopersuade::btrank::{fit_bt_fixed, fit_bt_over, win_rate_summary, write_win_rates, BtOptions};
use autopersuade::evaluation::{generate_synthetic, SyntheticSpec};
use autopersuade::ingest::{
    load_comparisons, load_corpus, stratified_split, write_comparisons, write_corpus, write_embeddings, write_split,
    Split,
};
use autopersuade::rng::derive_seed;
use ndarray::Array2;
use serde::Serialize;

use super::{config_label, corpus_with_split, emit, BT_SCORES_FILE, SPLIT_FILE, TRUTH_FILE, WIN_RATES_FILE};
use crate::config::Context;
use crate::error::{CliError, CliResult};
use crate::manifest::StageLog;

#[derive(Debug, Clone, PartialEq)]
pub struct BtRow {
    pub id: String,
    pub score: f64,
    pub anchored: bool,
}

/// CSV `id,score,anchored`.
pub fn write_bt_scores(path: &Path, rows: &[BtRow]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::from("id,score,anchored\n");
    for r in rows {
        out.push_str(&format!("{},{:?},{}\n", r.id, r.score, r.anchored));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_bt_scores(path: &Path) -> CliResult<Vec<BtRow>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some("id,score,anchored") {
        return Err(CliError::validation(format!("{}: expected header id,score,anchored", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || CliError::validation(format!("{}:{}: malformed row {line:?}", path.display(), i + 2));
            let mut parts = line.split(',');
            let (id, score, anchored) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c), None) => (a, b, c),
                _ => return Err(bad()),
            };
            let score: f64 = score.parse().map_err(|_| bad())?;
            if !(score.is_finite() && score > 0.0) {
                return Err(bad());
            }
            Ok(BtRow {
                id: id.to_string(),
                score,
                anchored: anchored.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub(super) fn split(ctx: &Context, log: &mut StageLog) -> CliResult<()> {
    log.input(config_label(&ctx.config.corpus), &ctx.corpus_path());
    let corpus = load_corpus(&ctx.corpus_path())?;
    let seed = derive_seed(ctx.config.seed, "split");
    let split = stratified_split(&corpus, ctx.config.train_fraction, seed)?;
    log.detail("n_train", split.ids_in(Split::Train)?.len());
    log.detail("n_estimation", split.ids_in(Split::Estimation)?.len());
    write_split(&emit(ctx, log, SPLIT_FILE), &split)?;
    Ok(())
}

pub(super) fn bt(ctx: &Context, log: &mut StageLog) -> CliResult<()> {
    let corpus = corpus_with_split(ctx, log)?;
    log.input(config_label(&ctx.config.comparisons), &ctx.comparisons_path());
    let all = load_comparisons(&ctx.comparisons_path())?;
    all.validate_against(&corpus)?;
    let opts = BtOptions {
        max_iters: ctx.config.bt_max_iters,
        tol: ctx.config.bt_tol,
    };
    let train = corpus.ids_in(Split::Train)?;
    let est = corpus.ids_in(Split::Estimation)?;
    let split = corpus.split().expect("split attached");
    let train_games = all.filter_by(|id| split.get(id) == Some(&Split::Train));
    let fixed = fit_bt_over::<f64>(&train, &train_games, opts)?;
    let mut rows: Vec<BtRow> = train
        .iter()
        .map(|id| BtRow {
            id: id.clone(),
            score: fixed.scores[id],
            anchored: false,
        })
        .collect();
    if !est.is_empty() {
        let anchored = fit_bt_fixed(&all, &fixed, &est, opts)?;
        rows.extend(est.iter().map(|id| BtRow {
            id: id.clone(),
            score: anchored.scores[id],
            anchored: true,
        }));
    }
    log.detail("n_train", train.len());
    log.detail("n_estimation", est.len());
    log.detail("train_comparisons", train_games.len());
    write_bt_scores(&emit(ctx, log, BT_SCORES_FILE), &rows)
}

fn read_groups(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some("id,group") {
        return Err(CliError::validation(format!("{}: expected header id,group", path.display())));
    }
    let mut groups = HashMap::new();
    for (i, line) in lines.enumerate() {
        let (id, group) = line
            .split_once(',')
            .filter(|(a, b)| !a.is_empty() && !b.is_empty() && !b.contains(','))
            .ok_or_else(|| CliError::validation(format!("{}:{}: malformed row {line:?}", path.display(), i + 2)))?;
        if groups.insert(id.to_string(), group.to_string()).is_some() {
            return Err(CliError::validation(format!("{}: duplicate id {id:?}", path.display())));
        }
    }
    Ok(groups)
}

pub(super) fn winrates(ctx: &Context, groups: &Path, log: &mut StageLog) -> CliResult<()> {
    log.input(config_label(&ctx.config.comparisons), &ctx.comparisons_path());
    log.input(config_label(groups), groups);
    let comparisons = load_comparisons(&ctx.comparisons_path())?;
    let group_of = read_groups(groups)?;
    let seed = derive_seed(ctx.config.seed, "winrates");
    let summary = win_rate_summary(&comparisons, &group_of, ctx.config.n_boot, seed)?;
    log.detail("n_boot", ctx.config.n_boot);
    write_win_rates(&emit(ctx, log, WIN_RATES_FILE), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    spec: &'a SyntheticSpec,
    w_true: Vec<Vec<f64>>,
    b_true: Vec<Vec<f64>>,
    gamma_true: Vec<f64>,
    y: Vec<f64>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

pub(super) fn read_spec(path: &Path) -> CliResult<SyntheticSpec> {
    let text = fs::read_to_string(path)?;
    let spec: SyntheticSpec =
        toml::from_str(&text).map_err(|e| CliError::validation(format!("synthetic spec: {}", e.message())))?;
    spec.validate()?;
    Ok(spec)
}

pub(super) fn synth(ctx: &Context, spec_path: &Path, log: &mut StageLog) -> CliResult<()> {
    log.input(config_label(spec_path), spec_path);
    let spec = read_spec(spec_path)?;
    let data = generate_synthetic(&spec)?;

    let corpus = ctx.corpus_path();
    write_corpus(&corpus, &data.corpus)?;
    log.output(config_label(&ctx.config.corpus), &corpus);
    let emb = ctx.embeddings_path();
    write_embeddings(&emb, &data.embeddings)?;
    log.output(config_label(&ctx.config.embeddings), &emb);
    let comp = ctx.comparisons_path();
    write_comparisons(&comp, &data.comparisons)?;
    log.output(config_label(&ctx.config.comparisons), &comp);

    let truth = GroundTruth {
        spec: &spec,
        w_true: rows(&data.w_true),
        b_true: rows(&data.b_true),
        gamma_true: data.gamma_true.to_vec(),
        y: data.y.to_vec(),
    };
    let path = emit(ctx, log, TRUTH_FILE);
    fs::create_dir_all(path.parent().expect("truth file has a parent"))?;
    let mut f = fs::File::create(&path)?;
    f.write_all(serde_json::to_string_pretty(&truth).expect("truth serializes").as_bytes())?;
    f.write_all(b"\n")?;
    log.detail("n", spec.n);
    log.detail("seed", spec.seed);
    Ok(())
}
