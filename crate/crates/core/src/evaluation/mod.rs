//! The evaluation stack: mean word-vector content preservation, bi-LSTM
//! style-strength classifiers, and the report shapes that mirror the
//! published conversion tables.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    SentenceLabeler, Split, StyleAttribute, StyledCorpus, TokenSequence, Vocabulary,
};
use crate::error::{Error, Result, TrainingCurves};
use crate::nn::checkpoint;
use crate::nn::layers::*;
use crate::nn::params::{sgd_step, GradStore, ParameterStore};
use crate::nn::tensor::{axpy, cosine, Tensor};

pub const EMBED_DIM: usize = 100;

// --------------------------------------------------------------- embeddings

/// Token-to-vector table for the content-preservation metric: either
/// loaded from a standard text embedding file or derived per token from
/// a hash, so everything runs without external downloads.
#[derive(Debug, Clone)]
pub enum EmbeddingTable {
    File {
        vectors: HashMap<String, [f64; EMBED_DIM]>,
    },
    /// Pure function of (token string, seed).
    Hash { seed: u64 },
}

impl EmbeddingTable {
    pub fn hashed(seed: u64) -> Self {
        EmbeddingTable::Hash { seed }
    }

    /// Whitespace-separated text format: token then 100 values per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap().to_string();
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::MalformedLine {
                        path: path.display().to_string(),
                        line: i + 1,
                        detail: format!("bad float `{f}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != EMBED_DIM {
                return Err(Error::MalformedLine {
                    path: path.display().to_string(),
                    line: i + 1,
                    detail: format!("expected {} values, got {}", EMBED_DIM, values.len()),
                });
            }
            let mut arr = [0.0; EMBED_DIM];
            arr.copy_from_slice(&values);
            vectors.insert(token, arr);
        }
        if vectors.is_empty() {
            return Err(Error::Invalid(format!(
                "embedding file {} has no vectors",
                path.display()
            )));
        }
        Ok(EmbeddingTable::File { vectors })
    }

    pub fn vector(&self, token: &str) -> Option<[f64; EMBED_DIM]> {
        match self {
            EmbeddingTable::File { vectors } => vectors.get(token).copied(),
            EmbeddingTable::Hash { seed } => Some(hash_vector(token, *seed)),
        }
    }

    /// Resolve the table against a vocabulary for id-indexed lookups.
    pub fn resolve(&self, vocab: &Vocabulary) -> ResolvedEmbedding {
        let vectors: Vec<Option<[f64; EMBED_DIM]>> = (0..vocab.len())
            .map(|id| self.vector(vocab.token(id).unwrap_or("")))
            .collect();
        let unk = self
            .vector(crate::corpus::RESERVED[crate::corpus::UNK_ID])
            .unwrap_or([0.0; EMBED_DIM]);
        ResolvedEmbedding { vectors, unk }
    }
}

fn hash_vector(token: &str, seed: u64) -> [f64; EMBED_DIM] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut out = [0.0; EMBED_DIM];
    for v in out.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    out
}

#[derive(Debug, Clone)]
pub struct ResolvedEmbedding {
    vectors: Vec<Option<[f64; EMBED_DIM]>>,
    unk: [f64; EMBED_DIM],
}

impl ResolvedEmbedding {
    pub fn by_id(&self, id: usize) -> Option<&[f64; EMBED_DIM]> {
        self.vectors.get(id).and_then(|v| v.as_ref())
    }
}

/// Mean of the per-token vectors, PAD/BOS/EOS dropped; tokens absent
/// from a file-loaded table are skipped, and a sentence of only absent
/// tokens falls back to the UNK vector.
pub fn sentence_vector(
    seq: &TokenSequence,
    table: &ResolvedEmbedding,
) -> Result<[f64; EMBED_DIM]> {
    let content = seq.content_ids();
    if content.is_empty() {
        return Err(Error::EmptySentence);
    }
    let mut sum = [0.0; EMBED_DIM];
    let mut n = 0usize;
    for id in content {
        if let Some(v) = table.by_id(id) {
            axpy(1.0, v, &mut sum);
            n += 1;
        }
    }
    if n == 0 {
        return Ok(table.unk);
    }
    for v in sum.iter_mut() {
        *v /= n as f64;
    }
    Ok(sum)
}

/// Cosine similarity of the two sentence vectors, with a degenerate flag
/// when either mean vector is zero (score 0 in that case).
pub fn content_preservation(
    x: &TokenSequence,
    y: &TokenSequence,
    table: &ResolvedEmbedding,
) -> Result<(f64, bool)> {
    let vx = sentence_vector(x, table)?;
    let vy = sentence_vector(y, table)?;
    let zero_x = vx.iter().all(|v| *v == 0.0);
    let zero_y = vy.iter().all(|v| *v == 0.0);
    if zero_x || zero_y {
        return Ok((0.0, true));
    }
    if vx == vy {
        return Ok((1.0, false));
    }
    Ok((cosine(&vx, &vy), false))
}

pub fn clamp_unit(score: f64) -> f64 {
    score.clamp(0.0, 1.0)
}

// ------------------------------------------------------- eval classifiers

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalClassifierConfig {
    pub d_embed: usize,
    pub d_hidden: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub init_range: f64,
    pub target_accuracy: f64,
    pub min_accuracy: f64,
}

impl Default for EvalClassifierConfig {
    fn default() -> Self {
        EvalClassifierConfig {
            d_embed: 16,
            d_hidden: 24,
            lr: 2.0,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 16,
            max_epochs: 8,
            seed: 5,
            init_range: 0.2,
            target_accuracy: 0.995,
            min_accuracy: 0.7,
        }
    }
}

const P_EMB: &str = "emb";
const P_FWD_W: &str = "lstm.fwd.w";
const P_FWD_B: &str = "lstm.fwd.b";
const P_BWD_W: &str = "lstm.bwd.w";
const P_BWD_B: &str = "lstm.bwd.b";
const P_HEAD_W: &str = "head.w";
const P_HEAD_B: &str = "head.b";

/// Bidirectional-LSTM sentence classifier: final states of both
/// directions feed an affine two-class head. Trained only on the
/// corpus's classifier split.
#[derive(Debug, Clone)]
pub struct EvalClassifier {
    pub attribute: StyleAttribute,
    pub params: ParameterStore,
    pub d_embed: usize,
    pub d_hidden: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub dev_accuracy: f64,
}

impl EvalClassifier {
    pub fn init(
        cfg: &EvalClassifierConfig,
        attribute: StyleAttribute,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let mut params = ParameterStore::new(cfg.seed);
        let r = cfg.init_range;
        let (de, dh) = (cfg.d_embed, cfg.d_hidden);
        params.add_uniform_range(P_EMB, &[vocab.len(), de], r)?;
        params.add_uniform_range(P_FWD_W, &[4 * dh, de + dh], r)?;
        params.add_zeros(P_FWD_B, &[4 * dh])?;
        params.add_uniform_range(P_BWD_W, &[4 * dh, de + dh], r)?;
        params.add_zeros(P_BWD_B, &[4 * dh])?;
        params.add_uniform_range(P_HEAD_W, &[2, 2 * dh], r)?;
        params.add_zeros(P_HEAD_B, &[2])?;
        Ok(EvalClassifier {
            attribute,
            params,
            d_embed: de,
            d_hidden: dh,
            vocab_size: vocab.len(),
            vocab_hash: vocab.hash(),
            dev_accuracy: 0.0,
        })
    }

    fn p(&self, name: &str) -> &Tensor {
        self.params.by_name(name).expect("eval classifier parameter")
    }

    pub fn classify_prob(&self, seq: &TokenSequence) -> Result<[f64; 2]> {
        let emb = embed_forward(seq.ids(), self.p(P_EMB))?;
        let run = bilstm_forward(
            &emb,
            self.p(P_FWD_W),
            self.p(P_FWD_B),
            self.p(P_BWD_W),
            self.p(P_BWD_B),
        )?;
        let mut logits = [0.0; 2];
        affine_forward(&run.final_state, self.p(P_HEAD_W), self.p(P_HEAD_B), &mut logits);
        let probs = softmax(&logits);
        Ok([probs[0], probs[1]])
    }

    fn train_loss_and_grad(
        &self,
        seq: &TokenSequence,
        class: u8,
        grads: &mut GradStore,
    ) -> Result<f64> {
        let emb = embed_forward(seq.ids(), self.p(P_EMB))?;
        let run = bilstm_forward(
            &emb,
            self.p(P_FWD_W),
            self.p(P_FWD_B),
            self.p(P_BWD_W),
            self.p(P_BWD_B),
        )?;
        let mut logits = [0.0; 2];
        affine_forward(&run.final_state, self.p(P_HEAD_W), self.p(P_HEAD_B), &mut logits);
        let (loss, probs) = softmax_xent(&logits, class as usize)?;
        let mut d_logits = probs;
        d_logits[class as usize] -= 1.0;

        let id = |name: &str| self.params.id(name).expect("param id");
        let mut d_final = vec![0.0; 2 * self.d_hidden];
        crate::nn::tensor::outer_acc(grads.get_mut(id(P_HEAD_W)), &d_logits, &run.final_state);
        axpy(1.0, &d_logits, grads.get_mut(id(P_HEAD_B)).data_mut());
        crate::nn::tensor::matvec_transpose_acc(self.p(P_HEAD_W), &d_logits, &mut d_final);

        let mut dw_f = Tensor::zeros(self.p(P_FWD_W).shape());
        let mut db_f = Tensor::zeros(self.p(P_FWD_B).shape());
        let mut dw_b = Tensor::zeros(self.p(P_BWD_W).shape());
        let mut db_b = Tensor::zeros(self.p(P_BWD_B).shape());
        let d_inputs = bilstm_backward(
            &run,
            self.p(P_FWD_W),
            self.p(P_BWD_W),
            None,
            Some(&d_final),
            &mut dw_f,
            &mut db_f,
            &mut dw_b,
            &mut db_b,
        );
        axpy(1.0, dw_f.data(), grads.get_mut(id(P_FWD_W)).data_mut());
        axpy(1.0, db_f.data(), grads.get_mut(id(P_FWD_B)).data_mut());
        axpy(1.0, dw_b.data(), grads.get_mut(id(P_BWD_W)).data_mut());
        axpy(1.0, db_b.data(), grads.get_mut(id(P_BWD_B)).data_mut());
        embed_backward(seq.ids(), &d_inputs, grads.get_mut(id(P_EMB)));
        Ok(loss)
    }

    pub fn accuracy(&self, labeled: &[(&TokenSequence, u8)]) -> Result<f64> {
        if labeled.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for (seq, class) in labeled {
            let p = self.classify_prob(seq)?;
            if (p[1] > p[0]) as u8 == *class {
                hits += 1;
            }
        }
        Ok(hits as f64 / labeled.len() as f64)
    }

    pub fn content_hash(&self) -> String {
        self.params.content_hash()
    }

    pub fn save(&self, ckpt_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut hyper = BTreeMap::new();
        hyper.insert("model".into(), "bilstm-classifier".into());
        hyper.insert("d_embed".into(), self.d_embed.to_string());
        hyper.insert("d_hidden".into(), self.d_hidden.to_string());
        hyper.insert("vocab_size".into(), self.vocab_size.to_string());
        hyper.insert("vocab_hash".into(), self.vocab_hash.clone());
        hyper.insert("dev_accuracy".into(), self.dev_accuracy.to_string());
        checkpoint::save(ckpt_path, &self.params, &hyper)?;
        let sidecar = crate::classifiers::AttributeDescriptor {
            attribute: self.attribute.name.clone(),
            class0_label: self.attribute.class0_label.clone(),
            class1_label: self.attribute.class1_label.clone(),
            vocab_hash: self.vocab_hash.clone(),
            dev_accuracy: self.dev_accuracy,
        };
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Checkpoint(format!("sidecar encode: {e}")))?;
        std::fs::write(sidecar_path, json)
            .map_err(|e| Error::io(sidecar_path.display().to_string(), e))
    }

    pub fn load(ckpt_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let (params, hyper) = checkpoint::load(ckpt_path)?;
        let text = std::fs::read_to_string(sidecar_path)
            .map_err(|e| Error::io(sidecar_path.display().to_string(), e))?;
        let sidecar: crate::classifiers::AttributeDescriptor = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("sidecar decode: {e}")))?;
        let need = |key: &str| -> Result<String> {
            hyper
                .get(key)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("missing hyper `{key}`")))
        };
        Ok(EvalClassifier {
            attribute: StyleAttribute::new(
                &sidecar.attribute,
                &sidecar.class0_label,
                &sidecar.class1_label,
            )?,
            params,
            d_embed: need("d_embed")?.parse().unwrap_or(0),
            d_hidden: need("d_hidden")?.parse().unwrap_or(0),
            vocab_size: need("vocab_size")?.parse().unwrap_or(0),
            vocab_hash: need("vocab_hash")?,
            dev_accuracy: sidecar.dev_accuracy,
        })
    }
}

impl SentenceLabeler for EvalClassifier {
    fn label(&self, seq: &TokenSequence) -> u8 {
        let p = self.classify_prob(seq).unwrap_or([0.5, 0.5]);
        u8::from(p[1] > p[0])
    }
}

/// NLL training on the classifier split with dev-accuracy early stop.
/// The classifier split never overlaps any transfer-model train split.
pub fn train_eval_classifier(
    corpus: &StyledCorpus,
    cfg: &EvalClassifierConfig,
    vocab: &Vocabulary,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<EvalClassifier> {
    let examples: Vec<(&TokenSequence, u8)> = corpus
        .sentences
        .iter()
        .filter(|s| s.split == Split::Classifier)
        .map(|s| (&s.seq, s.class))
        .collect();
    let dev: Vec<(&TokenSequence, u8)> = corpus
        .sentences
        .iter()
        .filter(|s| s.split == Split::Dev)
        .map(|s| (&s.seq, s.class))
        .collect();
    if examples.iter().all(|(_, c)| *c == 0) || examples.iter().all(|(_, c)| *c == 1) {
        return Err(Error::Invalid(
            "classifier split must contain both classes".into(),
        ));
    }
    let mut clf = EvalClassifier::init(cfg, corpus.attribute.clone(), vocab)?;
    let mut curves = TrainingCurves::default();
    let mut lr = cfg.lr;
    let mut best_acc = 0.0f64;
    let mut stale = 0usize;
    let mut grads = GradStore::zeros_like(&clf.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64 + 0xe7a1));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.reset();
            for &i in batch {
                let (seq, class) = examples[i];
                epoch_loss += clf.train_loss_and_grad(seq, class, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            sgd_step(&mut clf.params, &grads, lr, Some(cfg.clip_norm))?;
        }
        let train_loss = epoch_loss / examples.len() as f64;
        let dev_acc = clf.accuracy(&dev)?;
        curves.train_loss.push(train_loss);
        curves.dev_metric.push(dev_acc);
        on_epoch(epoch, train_loss, dev_acc);
        if dev_acc >= cfg.target_accuracy {
            break;
        }
        if dev_acc <= best_acc {
            stale += 1;
            if stale >= 2 {
                lr *= cfg.lr_decay;
                stale = 0;
            }
        } else {
            stale = 0;
        }
        best_acc = best_acc.max(dev_acc);
    }
    clf.dev_accuracy = curves.final_dev_metric();
    if clf.dev_accuracy < cfg.min_accuracy {
        return Err(Error::TrainingFailed {
            reason: format!(
                "eval classifier dev accuracy {:.3} below required {:.3}",
                clf.dev_accuracy, cfg.min_accuracy
            ),
            curves,
        });
    }
    Ok(clf)
}

// ---------------------------------------------------------------- strength

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthMode {
    /// Mean predicted class probability over the sentence set.
    MeanProb,
    /// Fraction of sentences argmax-classified into each class.
    Fraction,
}

impl StrengthMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean_prob" => Ok(StrengthMode::MeanProb),
            "fraction" => Ok(StrengthMode::Fraction),
            other => Err(Error::Config(format!("unknown strength_mode `{other}`"))),
        }
    }
}

/// Per-attribute class scores over a sentence set; each attribute's two
/// entries sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthMatrix {
    pub attr1: [f64; 2],
    pub attr2: [f64; 2],
}

pub fn style_strength(
    outputs: &[&TokenSequence],
    clf1: &EvalClassifier,
    clf2: &EvalClassifier,
    mode: StrengthMode,
) -> Result<StrengthMatrix> {
    if outputs.is_empty() {
        return Err(Error::Invalid("style_strength needs outputs".into()));
    }
    let column = |clf: &EvalClassifier| -> Result<[f64; 2]> {
        let mut acc = [0.0; 2];
        for seq in outputs {
            let p = clf.classify_prob(seq)?;
            match mode {
                StrengthMode::MeanProb => {
                    acc[0] += p[0];
                    acc[1] += p[1];
                }
                StrengthMode::Fraction => {
                    acc[usize::from(p[1] > p[0])] += 1.0;
                }
            }
        }
        let n = outputs.len() as f64;
        Ok([acc[0] / n, acc[1] / n])
    };
    Ok(StrengthMatrix {
        attr1: column(clf1)?,
        attr2: column(clf2)?,
    })
}

// ------------------------------------------------------------------ reports

/// One conversion's evaluation: content preservation plus the four-column
/// style-strength row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub conversion: String,
    /// Mean content preservation, clamped to [0,1].
    pub content_preservation: f64,
    /// Pairs whose cosine was degenerate (zero vector operand).
    pub degenerate_pairs: usize,
    pub attribute1: StyleAttribute,
    pub attribute2: StyleAttribute,
    pub strength: StrengthMatrix,
    pub strength_mode: StrengthMode,
    pub samples: usize,
}

impl EvaluationReport {
    pub fn validate(&self) -> Result<()> {
        let rows = [&self.strength.attr1, &self.strength.attr2];
        for row in rows {
            if (row[0] + row[1] - 1.0).abs() > 1e-6 {
                return Err(Error::Invalid(format!(
                    "strength columns sum to {}, not 1",
                    row[0] + row[1]
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Invalid("strength outside [0,1]".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.content_preservation) {
            return Err(Error::Invalid("preservation outside [0,1]".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid(format!("report encode: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("report decode: {e}")))
    }
}

/// Evaluate (source, output) pairs end to end: mean clamped preservation
/// plus the style strength of the outputs.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    model: &str,
    conversion: &str,
    pairs: &[(TokenSequence, TokenSequence)],
    table: &ResolvedEmbedding,
    clf1: &EvalClassifier,
    clf2: &EvalClassifier,
    mode: StrengthMode,
) -> Result<EvaluationReport> {
    if pairs.is_empty() {
        return Err(Error::Invalid("build_report needs pairs".into()));
    }
    let mut preservation_sum = 0.0;
    let mut degenerate = 0usize;
    for (src, out) in pairs {
        let (score, flag) = match content_preservation(src, out, table) {
            Ok(v) => v,
            // degenerate output (e.g. EOS-only): score 0, never abort a report
            Err(Error::EmptySentence) => (0.0, true),
            Err(e) => return Err(e),
        };
        if flag {
            degenerate += 1;
        }
        preservation_sum += clamp_unit(score);
    }
    let outputs: Vec<&TokenSequence> = pairs.iter().map(|(_, out)| out).collect();
    let strength = style_strength(&outputs, clf1, clf2, mode)?;
    let report = EvaluationReport {
        model: model.to_string(),
        conversion: conversion.to_string(),
        content_preservation: preservation_sum / pairs.len() as f64,
        degenerate_pairs: degenerate,
        attribute1: clf1.attribute.clone(),
        attribute2: clf2.attribute.clone(),
        strength,
        strength_mode: mode,
        samples: pairs.len(),
    };
    report.validate()?;
    Ok(report)
}

/// Render reports as the two aligned text tables of the published layout:
/// a content-preservation table and a four-column style-strength table.
/// Within each attribute the column of the lexicographically smaller
/// class label comes first (Female before Male, Formal before Informal).
pub fn render_text_tables(reports: &[EvaluationReport]) -> String {
    if reports.is_empty() {
        return String::new();
    }
    let a1 = &reports[0].attribute1;
    let a2 = &reports[0].attribute2;
    let columns = [ordered_labels(a1), ordered_labels(a2)];

    let title = |s: &str| {
        let mut t = String::from(s);
        t.push('\n');
        t.push_str(&"-".repeat(s.len()));
        t.push('\n');
        t
    };

    let model_width = reports
        .iter()
        .map(|r| r.model.len())
        .chain(["Model".len()])
        .max()
        .unwrap()
        .max(18);
    let conv_width = reports
        .iter()
        .map(|r| r.conversion.len())
        .chain(["Conversion".len()])
        .max()
        .unwrap()
        .max(10);

    let mut out = title("Content preservation (0-1)");
    out.push_str(&format!(
        "{:<model_width$}  {:<conv_width$}  {}\n",
        "Model", "Conversion", "Content Preservation"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<model_width$}  {:<conv_width$}  {:.3}\n",
            r.model, r.conversion, r.content_preservation
        ));
    }

    out.push('\n');
    out.push_str(&title("Style strength after conversion"));
    out.push_str(&format!("{:<model_width$}", "Model"));
    for (labels, _) in &columns {
        for label in labels {
            out.push_str(&format!("  {:>10}", capitalize(label)));
        }
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!("{:<model_width$}", r.model));
        for (attr_idx, (_, order)) in columns.iter().enumerate() {
            let row = if attr_idx == 0 {
                &r.strength.attr1
            } else {
                &r.strength.attr2
            };
            for &class in order {
                out.push_str(&format!("  {:>10.3}", row[class]));
            }
        }
        out.push('\n');
    }
    out
}

/// (ordered labels, matching class indices), lexicographic.
fn ordered_labels(attr: &StyleAttribute) -> (Vec<String>, Vec<usize>) {
    let mut pairs = [
        (attr.class0_label.clone(), 0usize),
        (attr.class1_label.clone(), 1usize),
    ];
    pairs.sort();
    (
        pairs.iter().map(|(l, _)| l.clone()).collect(),
        pairs.iter().map(|(_, c)| *c).collect(),
    )
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests;
