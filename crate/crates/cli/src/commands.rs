//! Implementations behind the subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use stms_core::baselines::{
    export_outputs, sequential_transfer, train_seq2seq_single, IdentityTransfer, PairStrategy,
    SentenceTransfer,
};
use stms_core::classifiers::train_style_classifier;
use stms_core::corpus::synthetic::{generate_synthetic, SyntheticStyleSpec};
use stms_core::corpus::{archive, audit, bias_rectify, Split, StyledCorpus, TokenSequence};
use stms_core::error::{Error, Result};
use stms_core::evaluation::{
    build_report, render_text_tables, train_eval_classifier, EmbeddingTable, EvaluationReport,
};
use stms_core::normalizer::{make_cipher, train_pivot_translators};
use stms_core::stms::{train_stms, StmsSystem, TargetStyleRequest};
use stms_core::{corpus::tokenize, corpus::Vocabulary};

use crate::config::RunConfig;
use crate::rundir::{write_epoch_csv, RunDir};

pub struct Ctx {
    pub run: RunDir,
    pub cfg: RunConfig,
}

impl Ctx {
    fn write_config_stamp(&self) -> Result<()> {
        let path = self.run.root.join("config");
        let mut text = self.cfg.canonical_text();
        text.push_str(&format!("# config_hash={}\n", self.cfg.hash()));
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    fn stage_meta(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join("meta");
        std::fs::write(&path, format!("config_hash={}\n", self.cfg.hash()))
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

// --------------------------------------------------------------------- prep

pub struct PrepArgs {
    pub synthetic_spec: Option<PathBuf>,
    pub class_files_attr1: Option<(PathBuf, PathBuf)>,
    pub class_files_attr2: Option<(PathBuf, PathBuf)>,
    pub rectify: bool,
}

pub fn cmd_prep(ctx: &Ctx, args: &PrepArgs) -> Result<()> {
    ctx.write_config_stamp()?;
    let cfg = &ctx.cfg;

    let (vocab, mut corpus1, mut corpus2, oracle) = match (&args.class_files_attr1, &args.class_files_attr2) {
        (Some((a0, a1)), Some((b0, b1))) => {
            let read = |p: &PathBuf| -> Result<String> {
                std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))
            };
            let texts = [read(a0)?, read(a1)?, read(b0)?, read(b1)?];
            let vocab =
                stms_core::corpus::build_vocab(texts.iter().map(|t| t.as_str()), 1, 50_000)?;
            let attr1 = stms_core::corpus::StyleAttribute::new("attribute1", "class0", "class1")?;
            let attr2 = stms_core::corpus::StyleAttribute::new("attribute2", "class0", "class1")?;
            let corpus1 = stms_core::corpus::load_class_files(
                a0, a1, attr1, &vocab, &cfg.ratios, cfg.seed, cfg.l_max,
            )?;
            let corpus2 = stms_core::corpus::load_class_files(
                b0, b1, attr2, &vocab, &cfg.ratios, cfg.seed ^ 1, cfg.l_max,
            )?;
            (vocab, corpus1, corpus2, None)
        }
        (None, None) => {
            let spec = match &args.synthetic_spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::io(path.display().to_string(), e))?;
                    SyntheticStyleSpec::from_kv_text(&text)?
                }
                None => SyntheticStyleSpec::default_benchmark(),
            };
            let bundle = generate_synthetic(&spec, cfg.n_per_class, &cfg.ratios, cfg.l_max)?;
            (
                bundle.vocab,
                bundle.corpus1,
                bundle.corpus2,
                Some(bundle.oracle),
            )
        }
        _ => {
            return Err(Error::Config(
                "class-file ingestion needs files for both attributes".into(),
            ))
        }
    };

    vocab.save(&ctx.run.vocab_path())?;
    if let Some(oracle) = &oracle {
        let json = serde_json::to_string_pretty(oracle)
            .map_err(|e| Error::Invalid(format!("markers encode: {e}")))?;
        std::fs::write(ctx.run.markers_path(), json)
            .map_err(|e| Error::io(ctx.run.markers_path().display().to_string(), e))?;
    }

    // the bias rectifier labels each corpus with a classifier of the
    // OTHER attribute, trained here on that corpus's classifier split
    if args.rectify {
        let clf2 = train_style_classifier(&corpus2, &cfg.clf, &vocab, |_, _, _| {})?;
        let clf1 = train_style_classifier(&corpus1, &cfg.clf, &vocab, |_, _, _| {})?;
        let train1 = corpus1.filter_split(Split::Train);
        let rect1 = bias_rectify(&train1, &clf2, cfg.seed ^ 0xb1a5)?;
        corpus1 = corpus1.replace_split(Split::Train, &rect1);
        let train2 = corpus2.filter_split(Split::Train);
        let rect2 = bias_rectify(&train2, &clf1, cfg.seed ^ 0xb1a6)?;
        corpus2 = corpus2.replace_split(Split::Train, &rect2);

        for (n, corpus, cross) in [(1usize, &corpus1, &clf2), (2usize, &corpus2, &clf1)] {
            write_corpus(ctx, n, corpus, &vocab)?;
            let full = audit(corpus, &vocab, Some(cross))?;
            let train_view = corpus.filter_split(Split::Train);
            let train_audit = audit(&train_view, &vocab, Some(cross))?;
            write_audit(ctx, n, &full, Some(&train_audit))?;
        }
    } else {
        for (n, corpus) in [(1usize, &corpus1), (2usize, &corpus2)] {
            write_corpus(ctx, n, corpus, &vocab)?;
            let full = audit(corpus, &vocab, None)?;
            write_audit(ctx, n, &full, None)?;
        }
    }
    println!(
        "prep: corpus1 {} sentences, corpus2 {} sentences, vocab {}",
        corpus1.len(),
        corpus2.len(),
        vocab.len()
    );
    Ok(())
}

fn write_corpus(ctx: &Ctx, n: usize, corpus: &StyledCorpus, vocab: &Vocabulary) -> Result<()> {
    let mut meta = BTreeMap::new();
    meta.insert("config_hash".to_string(), ctx.cfg.hash());
    meta.insert("seed".to_string(), ctx.cfg.seed.to_string());
    meta.insert("vocab_hash".to_string(), vocab.hash());
    meta.insert(
        "ratios".to_string(),
        format!(
            "{}/{}/{}/{}",
            ctx.cfg.ratios.train, ctx.cfg.ratios.test, ctx.cfg.ratios.dev, ctx.cfg.ratios.classifier
        ),
    );
    archive::write_archive(&ctx.run.corpus_dir(n), corpus, &meta)
}

fn write_audit(
    ctx: &Ctx,
    n: usize,
    full: &stms_core::corpus::CorpusAudit,
    train: Option<&stms_core::corpus::CorpusAudit>,
) -> Result<()> {
    #[derive(serde::Serialize)]
    struct AuditFile<'a> {
        full: &'a stms_core::corpus::CorpusAudit,
        #[serde(skip_serializing_if = "Option::is_none")]
        train: Option<&'a stms_core::corpus::CorpusAudit>,
    }
    let path = ctx.run.corpus_dir(n).join("audit.json");
    let json = serde_json::to_string_pretty(&AuditFile { full, train })
        .map_err(|e| Error::Invalid(format!("audit encode: {e}")))?;
    std::fs::write(&path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

// -------------------------------------------------------------------- train

pub enum TrainStage {
    Pivot,
    Classifier,
    EvalClassifier,
    Stms {
        alpha: Option<f64>,
        beta: Option<f64>,
        name: String,
        source_class: u8,
        target_class1: u8,
        target_class2: u8,
    },
    Seq2Seq {
        attribute: usize,
        source_class: u8,
        target_class: u8,
        name: Option<String>,
    },
}

pub fn cmd_train(ctx: &Ctx, stage: &TrainStage) -> Result<()> {
    let vocab = ctx.run.load_vocab()?;
    match stage {
        TrainStage::Pivot => {
            let corpus1 = ctx.run.load_corpus(1, &vocab)?;
            let corpus2 = ctx.run.load_corpus(2, &vocab)?;
            let dir = ctx.run.pivot_dir();
            ctx.stage_meta(&dir)?;
            let cipher = make_cipher(&vocab, ctx.cfg.seed);
            cipher.save(&dir.join("cipher.tsv"))?;

            let mut train: Vec<&TokenSequence> = corpus1.seqs_in_split(Split::Train);
            train.extend(corpus2.seqs_in_split(Split::Train));
            let mut dev: Vec<&TokenSequence> = corpus1.seqs_in_split(Split::Dev);
            dev.extend(corpus2.seqs_in_split(Split::Dev));

            let oracle = if ctx.cfg.pivot_style_strip {
                match ctx.run.load_markers() {
                    Ok(o) => Some(o),
                    Err(_) => None, // ingested corpora have no oracle
                }
            } else {
                None
            };
            let mut rows = Vec::new();
            let (fwd, bwd) = train_pivot_translators(
                &train,
                &dev,
                &cipher,
                &ctx.cfg.pivot,
                &vocab,
                oracle.as_ref(),
                |stage, log| {
                    println!(
                        "pivot/{stage} epoch {} loss {:.4} dev {:.4} exact {:.3}",
                        log.epoch, log.train_loss, log.dev_loss, log.dev_exact
                    );
                    rows.push((
                        stage.to_string(),
                        log.epoch,
                        log.train_loss,
                        log.dev_exact,
                        log.lr,
                    ));
                },
            )?;
            fwd.save(&dir.join("fwd.ckpt"))?;
            bwd.save(&dir.join("bwd.ckpt"))?;
            write_epoch_csv(&dir.join("losses.csv"), &rows)?;
            Ok(())
        }
        TrainStage::Classifier => {
            let dir = ctx.run.classifiers_dir();
            ctx.stage_meta(&dir)?;
            for n in [1usize, 2] {
                let corpus = ctx.run.load_corpus(n, &vocab)?;
                let mut cfg = ctx.cfg.clf.clone();
                cfg.seed = cfg.seed.wrapping_add(n as u64);
                let mut rows = Vec::new();
                let clf = train_style_classifier(&corpus, &cfg, &vocab, |epoch, loss, acc| {
                    println!("classifier{n} epoch {epoch} loss {loss:.4} dev_acc {acc:.3}");
                    rows.push((format!("clf{n}"), epoch, loss, acc, cfg.lr));
                })?;
                clf.save(
                    &dir.join(format!("clf{n}.ckpt")),
                    &dir.join(format!("clf{n}.json")),
                )?;
                write_epoch_csv(&dir.join(format!("clf{n}.losses.csv")), &rows)?;
            }
            Ok(())
        }
        TrainStage::EvalClassifier => {
            let dir = ctx.run.classifiers_dir();
            ctx.stage_meta(&dir)?;
            for n in [1usize, 2] {
                let corpus = ctx.run.load_corpus(n, &vocab)?;
                let mut cfg = ctx.cfg.evalclf.clone();
                cfg.seed = cfg.seed.wrapping_add(n as u64);
                let mut rows = Vec::new();
                let clf = train_eval_classifier(&corpus, &cfg, &vocab, |epoch, loss, acc| {
                    println!("evalclf{n} epoch {epoch} loss {loss:.4} dev_acc {acc:.3}");
                    rows.push((format!("evalclf{n}"), epoch, loss, acc, cfg.lr));
                })?;
                clf.save(
                    &dir.join(format!("evalclf{n}.ckpt")),
                    &dir.join(format!("evalclf{n}.json")),
                )?;
                write_epoch_csv(&dir.join(format!("evalclf{n}.losses.csv")), &rows)?;
            }
            Ok(())
        }
        TrainStage::Stms {
            alpha,
            beta,
            name,
            source_class,
            target_class1,
            target_class2,
        } => {
            let corpus1 = ctx.run.load_corpus(1, &vocab)?;
            let (fwd, bwd, _) = ctx.run.load_pivot()?;
            let clf1 = ctx.run.load_classifier(1)?;
            let clf2 = ctx.run.load_classifier(2)?;
            let alpha = alpha.unwrap_or(ctx.cfg.alpha());
            let beta = beta.unwrap_or(ctx.cfg.beta());
            let request = TargetStyleRequest::new(*target_class1, *target_class2, alpha, beta)?;
            let sentences = corpus1.seqs(Split::Train, *source_class);
            if sentences.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            let dir = ctx.run.stms_dir(name);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
            // the stage config artifact: resolved run config plus the
            // request actually trained
            let mut text = ctx.cfg.canonical_text();
            text.push_str(&format!("# config_hash={}\n", ctx.cfg.hash()));
            text.push_str(&format!("# request alpha={alpha} beta={beta} target=({target_class1},{target_class2}) source_class={source_class}\n"));
            std::fs::write(dir.join("config"), text)
                .map_err(|e| Error::io(dir.display().to_string(), e))?;

            let out = train_stms(
                &sentences,
                request,
                &fwd,
                &bwd,
                &clf1,
                &clf2,
                &ctx.cfg.stms,
                &vocab,
                Some(&dir),
            )?;
            let last = out.steps.last().unwrap();
            println!(
                "stms-{name}: {} steps, final l_gen {:.4} (dec {:.4} c1 {:.4} c2 {:.4})",
                out.steps.len(),
                last.gen,
                last.decoder,
                last.class1,
                last.class2
            );
            Ok(())
        }
        TrainStage::Seq2Seq {
            attribute,
            source_class,
            target_class,
            name,
        } => {
            if !(*attribute == 1 || *attribute == 2) {
                return Err(Error::Config("attribute must be 1 or 2".into()));
            }
            let corpus = ctx.run.load_corpus(*attribute, &vocab)?;
            let default_name = format!("a{attribute}-{source_class}to{target_class}");
            let name = name.clone().unwrap_or(default_name);
            let dir = ctx.run.seq2seq_dir(&name);
            ctx.stage_meta(&dir)?;

            let oracle = ctx.run.load_markers().ok();
            let table;
            let strategy = match &oracle {
                Some(oracle) => PairStrategy::MarkerSwap {
                    oracle,
                    attribute_index: attribute - 1,
                },
                None => {
                    let emb = match &ctx.cfg.embeddings_file {
                        Some(path) => EmbeddingTable::load(path)?,
                        None => EmbeddingTable::hashed(ctx.cfg.seed),
                    };
                    table = emb.resolve(&vocab);
                    PairStrategy::NearestNeighbor { table: &table }
                }
            };
            let mut cfg = ctx.cfg.pivot.clone();
            cfg.max_epochs = ctx.cfg.seq2seq_epochs;
            cfg.seed = ctx.cfg.seed.wrapping_mul(31).wrapping_add(5 + *attribute as u64);
            let mut rows = Vec::new();
            let model = train_seq2seq_single(
                &corpus,
                *source_class,
                *target_class,
                strategy,
                &cfg,
                &vocab,
                |log| {
                    println!(
                        "seq2seq-{name} epoch {} loss {:.4} dev_exact {:.3}",
                        log.epoch, log.train_loss, log.dev_exact
                    );
                    rows.push((name.clone(), log.epoch, log.train_loss, log.dev_exact, log.lr));
                },
            )?;
            model.save(&dir.join("model.ckpt"))?;
            write_epoch_csv(&dir.join("losses.csv"), &rows)?;
            Ok(())
        }
    }
}

// ----------------------------------------------------------------- transfer

pub struct TransferArgs {
    pub model: String,
    pub sequential: Option<(String, String)>,
    pub source_corpus: usize,
    pub source_class: u8,
    pub split: Split,
    pub out: PathBuf,
}

enum LoadedTransfer {
    Identity(IdentityTransfer),
    Seq2Seq(Box<stms_core::seq2seq::Seq2SeqModel>),
    Stms {
        model: Box<stms_core::stms::StmsModel>,
        fwd: Box<stms_core::seq2seq::Seq2SeqModel>,
        bwd: Box<stms_core::seq2seq::Seq2SeqModel>,
    },
}

fn load_transfer(ctx: &Ctx, name: &str, vocab_hash: &str) -> Result<LoadedTransfer> {
    if name == "identity" {
        return Ok(LoadedTransfer::Identity(IdentityTransfer {
            vocab_hash: vocab_hash.to_string(),
        }));
    }
    if let Some(rest) = name.strip_prefix("stms-") {
        let model = ctx.run.load_stms(rest)?;
        let (fwd, bwd, _) = ctx.run.load_pivot()?;
        return Ok(LoadedTransfer::Stms {
            model: Box::new(model),
            fwd: Box::new(fwd),
            bwd: Box::new(bwd),
        });
    }
    if name == "stms" {
        let model = ctx.run.load_stms("main")?;
        let (fwd, bwd, _) = ctx.run.load_pivot()?;
        return Ok(LoadedTransfer::Stms {
            model: Box::new(model),
            fwd: Box::new(fwd),
            bwd: Box::new(bwd),
        });
    }
    if let Some(rest) = name.strip_prefix("seq2seq-") {
        return Ok(LoadedTransfer::Seq2Seq(Box::new(ctx.run.load_seq2seq(rest)?)));
    }
    Err(Error::Config(format!(
        "unknown model `{name}` (expected identity, stms[-name] or seq2seq-<name>)"
    )))
}

impl LoadedTransfer {
    fn as_transfer(&self) -> Box<dyn SentenceTransfer + '_> {
        match self {
            LoadedTransfer::Identity(t) => Box::new(IdentityTransfer {
                vocab_hash: t.vocab_hash.clone(),
            }),
            LoadedTransfer::Seq2Seq(m) => Box::new((**m).clone()),
            LoadedTransfer::Stms { model, fwd, bwd } => Box::new(StmsSystem {
                model,
                fwd_translator: fwd,
                bwd_translator: bwd,
            }),
        }
    }

    fn vocab_hash(&self) -> &str {
        match self {
            LoadedTransfer::Identity(t) => &t.vocab_hash,
            LoadedTransfer::Seq2Seq(m) => &m.vocab_hash,
            LoadedTransfer::Stms { model, .. } => &model.vocab_hash,
        }
    }
}

pub fn cmd_transfer(ctx: &Ctx, args: &TransferArgs) -> Result<()> {
    let vocab = ctx.run.load_vocab()?;
    let corpus = ctx.run.load_corpus(args.source_corpus, &vocab)?;
    let sources = corpus.seqs(args.split, args.source_class);
    if sources.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    std::fs::create_dir_all(ctx.run.transfers_dir())
        .map_err(|e| Error::io(ctx.run.transfers_dir().display().to_string(), e))?;

    let vocab_hash = vocab.hash();
    let text = match &args.sequential {
        None => {
            let loaded = load_transfer(ctx, &args.model, &vocab_hash)?;
            if loaded.vocab_hash() != vocab_hash {
                return Err(Error::VocabMismatch {
                    model: loaded.vocab_hash().chars().take(12).collect(),
                    corpus: vocab_hash.chars().take(12).collect(),
                });
            }
            let transfer = loaded.as_transfer();
            let mut pairs = Vec::with_capacity(sources.len());
            for s in &sources {
                pairs.push(((*s).clone(), transfer.transfer(s)?));
            }
            export_outputs(&pairs, None, &vocab)
        }
        Some((first, second)) => {
            let l1 = load_transfer(ctx, first, &vocab_hash)?;
            let l2 = load_transfer(ctx, second, &vocab_hash)?;
            let s1 = l1.as_transfer();
            let s2 = l2.as_transfer();
            let mut pairs = Vec::with_capacity(sources.len());
            let mut mids = Vec::with_capacity(sources.len());
            for s in &sources {
                let (out, mid) = sequential_transfer(s, s1.as_ref(), s2.as_ref())?;
                pairs.push(((*s).clone(), out));
                mids.push(mid);
            }
            export_outputs(&pairs, Some(&mids), &vocab)
        }
    };
    std::fs::write(&args.out, text).map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let meta = args.out.with_extension("meta");
    std::fs::write(&meta, format!("config_hash={}\n", ctx.cfg.hash()))
        .map_err(|e| Error::io(meta.display().to_string(), e))?;
    println!("transfer: {} pairs -> {}", sources.len(), args.out.display());
    Ok(())
}

// ----------------------------------------------------------------- evaluate

pub struct EvaluateArgs {
    pub tsvs: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub conversion: String,
}

/// Accepts two- or three-column TSVs (the third is the sequential
/// intermediate); anything else is malformed.
fn read_pairs(
    path: &Path,
    vocab: &Vocabulary,
    l_max: usize,
) -> Result<Vec<(TokenSequence, TokenSequence)>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::MalformedLine {
                path: path.display().to_string(),
                line: i + 1,
                detail: format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let tok = |s: &str| -> Result<TokenSequence> {
            if s.trim().is_empty() {
                // degenerate output: keep the pair evaluable
                return TokenSequence::new(vec![stms_core::corpus::EOS_ID], vocab.len());
            }
            tokenize(s, vocab, l_max)
        };
        pairs.push((tok(fields[0])?, tok(fields[1])?));
    }
    if pairs.is_empty() {
        return Err(Error::Invalid(format!("{} has no pairs", path.display())));
    }
    Ok(pairs)
}

pub fn cmd_evaluate(ctx: &Ctx, args: &EvaluateArgs) -> Result<()> {
    let vocab = ctx.run.load_vocab()?;
    let clf1 = ctx.run.load_eval_classifier(1)?;
    let clf2 = ctx.run.load_eval_classifier(2)?;
    let table = match &ctx.cfg.embeddings_file {
        Some(path) => EmbeddingTable::load(path)?,
        None => EmbeddingTable::hashed(ctx.cfg.seed),
    }
    .resolve(&vocab);

    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| ctx.run.reports_dir());
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let mut reports: Vec<EvaluationReport> = Vec::new();
    for tsv in &args.tsvs {
        let pairs = read_pairs(tsv, &vocab, ctx.cfg.l_max)?;
        let model_name = tsv
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("model")
            .to_string();
        let report = build_report(
            &model_name,
            &args.conversion,
            &pairs,
            &table,
            &clf1,
            &clf2,
            ctx.cfg.strength_mode,
        )?;
        let json_path = out_dir.join(format!("{model_name}.json"));
        std::fs::write(&json_path, report.to_json()?)
            .map_err(|e| Error::io(json_path.display().to_string(), e))?;
        reports.push(report);
    }
    let text = render_text_tables(&reports);
    let table_path = out_dir.join("tables.txt");
    std::fs::write(&table_path, &text)
        .map_err(|e| Error::io(table_path.display().to_string(), e))?;
    let meta = out_dir.join("meta");
    std::fs::write(&meta, format!("config_hash={}\n", ctx.cfg.hash()))
        .map_err(|e| Error::io(meta.display().to_string(), e))?;
    print!("{text}");
    Ok(())
}

// -------------------------------------------------------------------- audit

pub struct AuditArgs {
    pub corpus: usize,
    pub cross_classifier: Option<String>,
}

pub fn cmd_audit(ctx: &Ctx, args: &AuditArgs) -> Result<()> {
    let vocab = ctx.run.load_vocab()?;
    let corpus = ctx.run.load_corpus(args.corpus, &vocab)?;
    let report = match &args.cross_classifier {
        None => audit(&corpus, &vocab, None)?,
        Some(name) => {
            if let Some(n) = name.strip_prefix("clf") {
                let n: usize = n.parse().map_err(|_| Error::Config("bad classifier".into()))?;
                let clf = ctx.run.load_classifier(n)?;
                audit(&corpus, &vocab, Some(&clf))?
            } else if let Some(n) = name.strip_prefix("evalclf") {
                let n: usize = n.parse().map_err(|_| Error::Config("bad classifier".into()))?;
                let clf = ctx.run.load_eval_classifier(n)?;
                audit(&corpus, &vocab, Some(&clf))?
            } else {
                return Err(Error::Config(format!(
                    "unknown cross classifier `{name}` (clf1, clf2, evalclf1 or evalclf2)"
                )));
            }
        }
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Invalid(format!("audit encode: {e}")))?;
    println!("{json}");
    Ok(())
}
