use std::path::PathBuf;
use std::process::ExitCode;

use autopersuade::ingest::Split;
use autopersuade_cli::{run, CliError, Command, Context, InferTarget, Overrides, EXIT_VALIDATION};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "autopersuade", version, about = "Supervised topic modeling pipeline for persuasive arguments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Run configuration (TOML, flat keys).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Number of topics J.
    #[arg(long, global = true)]
    topics: Option<usize>,
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Output directory (relative to the working directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Iterative,
    Converged,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Train,
    Estimation,
    All,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stratified train/estimation split.
    Split,
    /// Bradley-Terry scores: training fit, then anchored estimation scores.
    Bt,
    /// Cross-validate the (J, alpha) grid on the training split.
    Cv,
    /// Multi-restart model fit on the training split.
    Fit,
    /// Topic loadings and predicted scores for documents.
    Infer {
        #[arg(long, value_enum, default_value = "estimation", conflicts_with = "new_embeddings")]
        target: Part,
        /// Embeddings CSV of documents outside the corpus.
        #[arg(long, value_name = "PATH")]
        new_embeddings: Option<PathBuf>,
    },
    /// Topic effects on the estimation split.
    Amce,
    /// Topic coherence of the fitted model, plus per-restart coherence and holdout error.
    Coherence,
    /// Accept or reject generated candidates against their proto-arguments.
    Filter {
        /// Embeddings CSV of the candidates.
        #[arg(long, value_name = "PATH")]
        candidates: PathBuf,
        /// CSV `candidate_id,proto_id`.
        #[arg(long, value_name = "PATH")]
        protos: PathBuf,
        /// `synthesis:A,B`, `emphasis:K` or `topic_shift:K:increase|decrease:THRESHOLD`.
        #[arg(long)]
        criteria: String,
    },
    /// Group win rates with bootstrap intervals.
    Winrates {
        /// CSV `id,group`.
        #[arg(long, value_name = "PATH")]
        groups: PathBuf,
    },
    /// Planted synthetic dataset written to the configured input paths.
    Synth {
        /// TOML synthetic spec.
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
    },
}

fn command(cmd: Cmd) -> Command {
    match cmd {
        Cmd::Split => Command::Split,
        Cmd::Bt => Command::Bt,
        Cmd::Cv => Command::Cv,
        Cmd::Fit => Command::Fit,
        Cmd::Infer { target, new_embeddings } => Command::Infer {
            target: match (new_embeddings, target) {
                (Some(p), _) => InferTarget::File(p),
                (None, Part::Train) => InferTarget::Part(Split::Train),
                (None, Part::Estimation) => InferTarget::Part(Split::Estimation),
                (None, Part::All) => InferTarget::All,
            },
        },
        Cmd::Amce => Command::Amce,
        Cmd::Coherence => Command::Coherence,
        Cmd::Filter {
            candidates,
            protos,
            criteria,
        } => Command::Filter {
            candidates,
            protos,
            criteria,
        },
        Cmd::Winrates { groups } => Command::Winrates { groups },
        Cmd::Synth { spec } => Command::Synth { spec },
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json_line());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail(&CliError::validation(first.to_string()));
        }
    };
    let Some(config) = cli.flags.config.clone() else {
        return fail(&CliError::validation("--config PATH is required"));
    };
    let f = cli.flags;
    let overrides = Overrides {
        seed: f.seed,
        alpha: f.alpha,
        topics: f.topics,
        n_iters: f.iters,
        n_restarts: f.restarts,
        folds: f.folds,
        inference_mode: f.mode.map(|m| match m {
            Mode::Iterative => "iterative".to_string(),
            Mode::Converged => "converged".to_string(),
        }),
        output_dir: f.out,
    };
    let ctx = match Context::load(&config, &overrides) {
        Ok(ctx) => ctx,
        Err(e) => return fail(&e),
    };
    let cmd = command(cli.command);
    match run(&cmd, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            debug_assert!(e.exit_code() >= EXIT_VALIDATION);
            fail(&e)
        }
    }
}
