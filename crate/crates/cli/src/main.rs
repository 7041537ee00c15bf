//! `stms` — batch pipeline for the multi-attribute style transfer lab.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 training or model error.

mod commands;
mod config;
mod rundir;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stms_core::corpus::Split;
use stms_core::error::Error;

use commands::{AuditArgs, Ctx, EvaluateArgs, PrepArgs, TrainStage, TransferArgs};
use config::RunConfig;
use rundir::RunDir;

#[derive(Parser)]
#[command(name = "stms", version, about = "multi-attribute text style transfer pipeline")]
struct Cli {
    /// key=value run configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// master seed override
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// run directory (defaults to $STMS_RUN_DIR, then ./run)
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or ingest the two styled corpora, audit them, optionally
    /// rectify the mutual bias
    Prep(PrepCli),
    /// Train one pipeline stage
    Train(TrainCli),
    /// Run a trained model over a corpus split and emit a TSV
    Transfer(TransferCli),
    /// Score transfer TSVs: content preservation + style strength
    Evaluate(EvaluateCli),
    /// Print a corpus audit as JSON
    Audit(AuditCli),
}

#[derive(Args)]
struct PrepCli {
    /// synthetic corpus spec (key=value); omit for the committed default
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// attribute-1 class files: class0 then class1
    #[arg(long, num_args = 2)]
    class_files_attr1: Option<Vec<PathBuf>>,
    /// attribute-2 class files: class0 then class1
    #[arg(long, num_args = 2)]
    class_files_attr2: Option<Vec<PathBuf>>,
    /// balance each corpus's train split with the cross-attribute
    /// classifier before writing archives
    #[arg(long)]
    rectify: bool,
}

#[derive(Args)]
struct TrainCli {
    /// pivot | classifier | eval-classifier | stms | seq2seq
    stage: String,
    /// fusion loss weight for attribute 1 (stms)
    #[arg(long)]
    alpha: Option<f64>,
    /// fusion loss weight for attribute 2 (stms)
    #[arg(long)]
    beta: Option<f64>,
    /// artifact name suffix (stms defaults to `main`)
    #[arg(long)]
    name: Option<String>,
    /// source class for stms/seq2seq training sentences
    #[arg(long, default_value_t = 1)]
    source_class: u8,
    /// stms target class for attribute 1
    #[arg(long, default_value_t = 0)]
    target_class1: u8,
    /// stms target class for attribute 2
    #[arg(long, default_value_t = 0)]
    target_class2: u8,
    /// which attribute a seq2seq baseline converts (1 or 2)
    #[arg(long, default_value_t = 1)]
    attribute: usize,
    /// seq2seq conversion target class
    #[arg(long, default_value_t = 0)]
    target_class: u8,
}

#[derive(Args)]
struct TransferCli {
    /// identity | stms[-name] | seq2seq-<name>
    #[arg(long, required_unless_present = "sequential")]
    model: Option<String>,
    /// two stage names composed in order
    #[arg(long, num_args = 2)]
    sequential: Option<Vec<String>>,
    #[arg(long, default_value_t = 1)]
    source_corpus: usize,
    #[arg(long, default_value_t = 1)]
    source_class: u8,
    /// corpus split to transfer (train | test | dev | classifier)
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateCli {
    /// transfer TSVs (source<TAB>output[<TAB>intermediate])
    #[arg(long, num_args = 1.., required = true)]
    tsv: Vec<PathBuf>,
    /// report directory (defaults to <run>/reports)
    #[arg(long)]
    out: Option<PathBuf>,
    /// conversion label stamped into the reports
    #[arg(long, default_value = "")]
    conversion: String,
}

#[derive(Args)]
struct AuditCli {
    #[arg(long, default_value_t = 1)]
    corpus: usize,
    /// clf1 | clf2 | evalclf1 | evalclf2
    #[arg(long)]
    cross_classifier: Option<String>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Io { .. }
        | Error::MalformedLine { .. }
        | Error::EmptySentence
        | Error::EmptyCorpus
        | Error::EmptyMinority { .. }
        | Error::TokenOutOfRange { .. }
        | Error::Invalid(_) => 3,
        Error::TrainingFailed { .. }
        | Error::NonFiniteGradient { .. }
        | Error::FrozenViolation
        | Error::VocabMismatch { .. }
        | Error::Checkpoint(_)
        | Error::ShapeMismatch { .. }
        | Error::AttributeCollision(_) => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let root = cli
        .run_dir
        .or_else(|| std::env::var_os("STMS_RUN_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("run"));

    let mut overrides = BTreeMap::new();
    if let Some(seed) = cli.seed {
        overrides.insert("seed".to_string(), seed.to_string());
    }
    let cfg = RunConfig::from_file(cli.config.as_deref(), &overrides)?;
    let run = RunDir::open(&root)?;
    let ctx = Ctx { run, cfg };

    match cli.command {
        Command::Prep(args) => {
            let two = |v: Option<Vec<PathBuf>>| v.map(|v| (v[0].clone(), v[1].clone()));
            commands::cmd_prep(
                &ctx,
                &PrepArgs {
                    synthetic_spec: args.synthetic,
                    class_files_attr1: two(args.class_files_attr1),
                    class_files_attr2: two(args.class_files_attr2),
                    rectify: args.rectify,
                },
            )
        }
        Command::Train(args) => {
            let stage = match args.stage.as_str() {
                "pivot" => TrainStage::Pivot,
                "classifier" => TrainStage::Classifier,
                "eval-classifier" => TrainStage::EvalClassifier,
                "stms" => TrainStage::Stms {
                    alpha: args.alpha,
                    beta: args.beta,
                    name: args.name.unwrap_or_else(|| "main".to_string()),
                    source_class: args.source_class,
                    target_class1: args.target_class1,
                    target_class2: args.target_class2,
                },
                "seq2seq" => TrainStage::Seq2Seq {
                    attribute: args.attribute,
                    source_class: args.source_class,
                    target_class: args.target_class,
                    name: args.name,
                },
                other => {
                    return Err(Error::Config(format!(
                        "unknown stage `{other}` (pivot, classifier, eval-classifier, stms, seq2seq)"
                    )))
                }
            };
            commands::cmd_train(&ctx, &stage)
        }
        Command::Transfer(args) => {
            let sequential = args.sequential.map(|v| (v[0].clone(), v[1].clone()));
            let model = args.model.unwrap_or_else(|| "identity".to_string());
            commands::cmd_transfer(
                &ctx,
                &TransferArgs {
                    model,
                    sequential,
                    source_corpus: args.source_corpus,
                    source_class: args.source_class,
                    split: Split::parse(&args.split).map_err(|e| Error::Config(e.to_string()))?,
                    out: args.out,
                },
            )
        }
        Command::Evaluate(args) => commands::cmd_evaluate(
            &ctx,
            &EvaluateArgs {
                tsvs: args.tsv,
                out_dir: args.out,
                conversion: args.conversion,
            },
        ),
        Command::Audit(args) => commands::cmd_audit(
            &ctx,
            &AuditArgs {
                corpus: args.corpus,
                cross_classifier: args.cross_classifier,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
