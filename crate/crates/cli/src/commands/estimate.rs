use std::collections::BTreeMap;
use std::path::Path;

use autopersuade::causal::{build_design, effect_report, estimate_amce, LENGTH_TERM};
use autopersuade::evaluation::{
    filter_candidates, load_proto_map, write_decisions, Direction, FilterCriteria, FilterMode, Scored,
};
use autopersuade::ingest::{load_embeddings, Split};
use ndarray::Array1;

use super::model::infer_scaled;
use super::{
    config_label, corpus_with_split, embeddings_for, emit, load_fitted, responses_for, AMCE_DIR, AMCE_STEM,
    FILTER_FILE,
};
use crate::config::{Context, LENGTH_COVARIATE};
use crate::error::{CliError, CliResult};
use crate::manifest::StageLog;

/// `synthesis:A,B`, `emphasis:K` or `topic_shift:K:increase|decrease:THRESHOLD`,
/// topics 0-based.
pub fn parse_criteria(text: &str) -> CliResult<FilterCriteria> {
    let bad = |why: &str| CliError::validation(format!("criteria {text:?}: {why}"));
    let topic = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("topic index must be a non-negative integer"));
    let mut parts = text.split(':');
    let mode: FilterMode = parts.next().unwrap_or("").parse().map_err(|e: autopersuade::Error| bad(&e.to_string()))?;
    let rest: Vec<&str> = parts.collect();
    match (mode, rest.as_slice()) {
        (FilterMode::Synthesis, [pair]) => {
            let (a, b) = pair.split_once(',').ok_or_else(|| bad("synthesis needs two topics A,B"))?;
            Ok(FilterCriteria::synthesis(topic(a)?, topic(b)?))
        }
        (FilterMode::Emphasis, [k]) => Ok(FilterCriteria::emphasis(topic(k)?)),
        (FilterMode::TopicShift, [k, dir, th]) => {
            let direction: Direction = dir.parse().map_err(|e: autopersuade::Error| bad(&e.to_string()))?;
            let threshold: f64 = th.parse().map_err(|_| bad("threshold must be a number"))?;
            if !threshold.is_finite() {
                return Err(bad("threshold must be finite"));
            }
            Ok(FilterCriteria::topic_shift(topic(k)?, direction, threshold))
        }
        _ => Err(bad("wrong number of fields")),
    }
}

pub(super) fn amce(ctx: &Context, log: &mut StageLog) -> CliResult<()> {
    let model = load_fitted(ctx, log)?;
    let corpus = corpus_with_split(ctx, log)?;
    let ids = corpus.ids_in(Split::Estimation)?;
    if ids.is_empty() {
        return Err(CliError::validation("estimation split is empty"));
    }
    let m = embeddings_for(ctx, log, &ids)?;
    let y = responses_for(ctx, log, &ids)?;
    let (loadings, _) = infer_scaled(ctx, &model, &ids, m)?;
    let covariates: Vec<(String, Array1<f64>)> = ctx
        .config
        .covariates
        .iter()
        .map(|c| {
            debug_assert_eq!(c, LENGTH_COVARIATE);
            let lengths = ids
                .iter()
                .map(|id| corpus.get(id).expect("split ids are corpus ids").length_chars as f64)
                .collect();
            (LENGTH_TERM.to_string(), lengths)
        })
        .collect();
    let design = build_design(&loadings, &covariates)?;
    let result = estimate_amce(&design, y.view())?;
    log.detail("n_obs", result.n_obs);
    log.detail("r_squared", result.r_squared);
    log.detail("inference_mode", loadings.mode.as_str());
    let (csv, json) = effect_report(&ctx.out(AMCE_DIR), AMCE_STEM, &result)?;
    for path in [csv, json] {
        let name = path.file_name().expect("report file name").to_string_lossy();
        log.output(format!("{AMCE_DIR}/{name}"), &path);
    }
    Ok(())
}

pub(super) fn filter(
    ctx: &Context,
    candidates: &Path,
    protos: &Path,
    criteria: &str,
    log: &mut StageLog,
) -> CliResult<()> {
    let criteria = parse_criteria(criteria)?;
    let model = load_fitted(ctx, log)?;
    log.input(config_label(candidates), candidates);
    log.input(config_label(protos), protos);
    log.input(config_label(&ctx.config.embeddings), &ctx.embeddings_path());
    let cand = load_embeddings::<f64>(candidates)?;
    let proto_map = load_proto_map(protos)?;
    let proto_ids: Vec<String> = proto_map
        .values()
        .flatten()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let corpus_emb = load_embeddings::<f64>(&ctx.embeddings_path())?;
    let proto_m = corpus_emb.select(&proto_ids)?;

    let scored = |ids: &[String], m| -> CliResult<Vec<Scored>> {
        let (loadings, predicted) = infer_scaled(ctx, &model, ids, m)?;
        Ok(ids
            .iter()
            .enumerate()
            .map(|(i, id)| Scored {
                id: id.clone(),
                loadings: loadings.w.row(i).to_vec(),
                score: predicted[i],
            })
            .collect())
    };
    let cands = scored(cand.ids(), cand.values().clone())?;
    let proto_scores: BTreeMap<String, Scored> =
        scored(&proto_ids, proto_m)?.into_iter().map(|s| (s.id.clone(), s)).collect();
    let protos_by_candidate: BTreeMap<String, Vec<Scored>> = proto_map
        .iter()
        .map(|(c, ps)| (c.clone(), ps.iter().map(|p| proto_scores[p].clone()).collect()))
        .collect();
    let decisions = filter_candidates(&cands, &protos_by_candidate, &criteria)?;
    log.detail("accepted", decisions.iter().filter(|d| d.accepted).count());
    log.detail("rejected", decisions.iter().filter(|d| !d.accepted).count());
    write_decisions(&emit(ctx, log, FILTER_FILE), &decisions)?;
    Ok(())
}
