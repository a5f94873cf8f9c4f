use std::fs;

use autopersuade::evaluation::{coherence_report, cross_validate, CvOptions};
use autopersuade::inference::{infer as infer_loadings, predict_response, write_loadings, InferenceMode, TopicLoadings};
use autopersuade::ingest::load_embeddings;
use autopersuade::rng::derive_seed;
use autopersuade::sunmodel::{evaluate_restart, multi_restart_fit, save_model, SupervisedMatrix};
use ndarray::{Array1, Array2};

use super::{
    config_label, corpus_with_split, emit, load_fitted, restart_plan, training_data, InferTarget, COHERENCE_FILE,
    COHERENCE_MSE_FILE, CV_BASELINE_FILE, CV_RESULTS_FILE, MODEL_FILE, RESTARTS_FILE,
};
use crate::config::Context;
use crate::error::CliResult;
use crate::manifest::StageLog;

pub(super) fn cv(ctx: &Context, log: &mut StageLog) -> CliResult<()> {
    let (_, _, m, y) = training_data(ctx, log)?;
    let c = &ctx.config;
    let mut opts = CvOptions::new(c.cv_grid(), c.folds, derive_seed(c.seed, "cv"));
    opts.n_iters = c.n_iters;
    opts.embedding_divisor = c.embedding_divisor;
    let report = cross_validate(m.view(), y.view(), &opts)?;
    if let Some(best) = report.best() {
        log.detail("best_J", best.topics);
        log.detail("best_alpha", best.alpha);
        log.detail("best_mean_test_mse", best.mean_test_mse);
    }
    log.detail("baseline_mean_test_mse", report.baseline_mean());
    let results = emit(ctx, log, CV_RESULTS_FILE);
    let baseline = emit(ctx, log, CV_BASELINE_FILE);
    report.write(&results, &baseline)?;
    Ok(())
}

pub(super) fn fit(ctx: &Context, log: &mut StageLog) -> CliResult<()> {
    let (_, ids, m, y) = training_data(ctx, log)?;
    let c = &ctx.config;
    let x = SupervisedMatrix::from_raw(m.view(), y.view(), c.alpha, c.embedding_divisor)?;
    let outcome = multi_restart_fit(&x, restart_plan(ctx))?;
    let model = outcome.model.with_ids(ids)?;
    log.detail("winning_seed", outcome.report.best_seed);
    log.detail("final_loss", model.final_loss());
    log.detail("dead_topics", model.dead_topics());
    save_model(&emit(ctx, log, MODEL_FILE), &model)?;
    let mut table = String::from("restart,seed,holdout_mse,final_loss\n");
    for e in &outcome.report.entries {
        table.push_str(&format!("{},{},{:?},{:?}\n", e.restart, e.seed, e.holdout_mse, e.final_loss));
    }
    fs::write(emit(ctx, log, RESTARTS_FILE), table)?;
    Ok(())
}

pub(super) fn infer(ctx: &Context, target: &InferTarget, log: &mut StageLog) -> CliResult<()> {
    let model = load_fitted(ctx, log)?;
    let (ids, m) = match target {
        InferTarget::File(path) => {
            log.input(config_label(path), path);
            let emb = load_embeddings::<f64>(path)?;
            (emb.ids().to_vec(), emb.values().clone())
        }
        InferTarget::Part(part) => {
            let corpus = corpus_with_split(ctx, log)?;
            let ids = corpus.ids_in(*part)?;
            let m = super::embeddings_for(ctx, log, &ids)?;
            (ids, m)
        }
        InferTarget::All => {
            let corpus = corpus_with_split(ctx, log)?;
            let ids: Vec<String> = corpus.ids().map(str::to_string).collect();
            let m = super::embeddings_for(ctx, log, &ids)?;
            (ids, m)
        }
    };
    let (loadings, predicted) = infer_scaled(ctx, &model, &ids, m)?;
    log.detail("mode", loadings.mode.as_str());
    log.detail("n_documents", ids.len());
    if let Some(v) = loadings.kkt_max_violation {
        log.detail("kkt_max_violation", v);
    }
    write_loadings(&emit(ctx, log, &target.output_file()), &loadings, predicted.view())?;
    Ok(())
}

/// Scale raw embeddings with the model's stored parameters, infer in the
/// configured mode, and predict responses in original units.
pub(super) fn infer_scaled(
    ctx: &Context,
    model: &autopersuade::sunmodel::SunModel<f64>,
    ids: &[String],
    m_raw: Array2<f64>,
) -> CliResult<(TopicLoadings<f64>, Array1<f64>)> {
    let c = &ctx.config;
    let m = model.scaling.scale_embeddings(m_raw.view())?;
    let loadings = infer_loadings(
        m.view(),
        ids,
        model,
        c.mode()?,
        c.n_iters,
        derive_seed(c.seed, "infer"),
        c.kkt_tol,
    )?;
    let predicted = predict_response(&loadings, model)?;
    Ok((loadings, predicted))
}

pub(super) fn coherence(ctx: &Context, log: &mut StageLog) -> CliResult<()> {
    let model = load_fitted(ctx, log)?;
    let (corpus, ids, m, y) = training_data(ctx, log)?;
    let train_corpus = corpus.subset(&ids)?;
    if model.ids.is_empty() {
        return Err(crate::error::CliError::validation("model file lists no training ids"));
    }
    let fitted = TopicLoadings {
        ids: model.ids.clone(),
        w: model.w.clone(),
        mode: InferenceMode::Iterative,
        kkt_max_violation: None,
    };
    let report = coherence_report(&fitted, &train_corpus)?;
    log.detail("average_coherence", report.average_coherence);
    report.write(&emit(ctx, log, COHERENCE_FILE))?;

    // Each restart again, pairing its coherence with its holdout error.
    let c = &ctx.config;
    let x = SupervisedMatrix::from_raw(m.view(), y.view(), c.alpha, c.embedding_divisor)?;
    let plan = restart_plan(ctx);
    let (train, hold) = plan.partition(ids.len())?;
    let train_ids: Vec<String> = train.iter().map(|&i| ids[i].clone()).collect();
    let mut table = String::from("restart,seed,holdout_mse,average_coherence\n");
    for r in 0..plan.n_restarts {
        let seed = plan.restart_seed(r);
        let (restart_model, mse) = evaluate_restart(&x, &train, &hold, plan.topics, plan.n_iters, seed)?;
        let loadings = TopicLoadings {
            ids: train_ids.clone(),
            w: restart_model.w,
            mode: InferenceMode::Iterative,
            kkt_max_violation: None,
        };
        let rep = coherence_report(&loadings, &train_corpus)?;
        table.push_str(&format!("{r},{seed},{mse:?},{:?}\n", rep.average_coherence));
    }
    fs::write(emit(ctx, log, COHERENCE_MSE_FILE), table)?;
    Ok(())
}
