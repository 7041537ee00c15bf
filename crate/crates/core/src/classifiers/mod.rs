//! Per-attribute CNN sentence classifiers used as decoder feedback, and
//! the arbiter built from two of them.
//!
//! Architecture: own embedding, convolution banks of widths {3,4,5} with
//! max-over-time pooling and ReLU, affine head over the pooled features,
//! two classes. The classifier accepts either hard token ids or a soft
//! pre-embedded sequence; both paths share every parameter, so a one-hot
//! soft input reproduces the hard path bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    SentenceLabeler, Split, StyleAttribute, StyledCorpus, TokenSequence, Vocabulary, PAD_ID,
};
use crate::error::{Error, Result, TrainingCurves};
use crate::nn::checkpoint;
use crate::nn::layers::*;
use crate::nn::params::{sgd_step, GradStore, ParameterStore};
use crate::nn::tensor::{axpy, Tensor};

pub const CONV_WIDTHS: [usize; 3] = [3, 4, 5];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub d_embed: usize,
    pub n_filters: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub init_range: f64,
    /// Stop early once dev accuracy reaches this.
    pub target_accuracy: f64,
    /// Training fails below this after the last epoch.
    pub min_accuracy: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            d_embed: 16,
            n_filters: 64,
            lr: 0.5,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 32,
            max_epochs: 6,
            seed: 2,
            init_range: 0.2,
            target_accuracy: 0.995,
            min_accuracy: 0.7,
        }
    }
}

const P_EMB: &str = "emb";
const P_HEAD_W: &str = "head.w";
const P_HEAD_B: &str = "head.b";

fn conv_w(width: usize) -> String {
    format!("conv{width}.w")
}
fn conv_b(width: usize) -> String {
    format!("conv{width}.b")
}

/// A frozen-after-training two-class style classifier.
#[derive(Debug, Clone)]
pub struct StyleClassifier {
    pub attribute: StyleAttribute,
    pub params: ParameterStore,
    pub d_embed: usize,
    pub n_filters: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub frozen: bool,
    pub dev_accuracy: f64,
}

struct SoftForward {
    padded: Tensor,
    pooled: Vec<f64>,
    caches: Vec<ConvPoolCache>,
    logits: [f64; 2],
    probs: Vec<f64>,
}

impl StyleClassifier {
    pub fn init(
        cfg: &ClassifierConfig,
        attribute: StyleAttribute,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let mut params = ParameterStore::new(cfg.seed);
        let r = cfg.init_range;
        params.add_uniform_range(P_EMB, &[vocab.len(), cfg.d_embed], r)?;
        for w in CONV_WIDTHS {
            params.add_uniform_range(&conv_w(w), &[cfg.n_filters, w * cfg.d_embed], r)?;
            params.add_zeros(&conv_b(w), &[cfg.n_filters])?;
        }
        params.add_uniform_range(P_HEAD_W, &[2, CONV_WIDTHS.len() * cfg.n_filters], r)?;
        params.add_zeros(P_HEAD_B, &[2])?;
        Ok(StyleClassifier {
            attribute,
            params,
            d_embed: cfg.d_embed,
            n_filters: cfg.n_filters,
            vocab_size: vocab.len(),
            vocab_hash: vocab.hash(),
            frozen: false,
            dev_accuracy: 0.0,
        })
    }

    fn p(&self, name: &str) -> &Tensor {
        self.params.by_name(name).expect("classifier parameter")
    }

    /// Strip trailing PADs, embed, and hand to the soft path.
    fn embed_hard(&self, seq: &TokenSequence) -> Result<Tensor> {
        let mut ids = seq.ids().to_vec();
        while ids.len() > 1 && *ids.last().unwrap() == PAD_ID {
            ids.pop();
        }
        if ids.is_empty() || ids.iter().all(|&id| id == PAD_ID) {
            return Err(Error::EmptySentence);
        }
        embed_forward(&ids, self.p(P_EMB))
    }

    /// Pad a (possibly soft) embedded sequence up to the widest filter
    /// with PAD-embedding rows.
    fn pad_soft(&self, seq: &Tensor) -> Tensor {
        let max_w = *CONV_WIDTHS.iter().max().unwrap();
        if seq.rows() >= max_w {
            return seq.clone();
        }
        let mut padded = Tensor::zeros(&[max_w, self.d_embed]);
        for t in 0..seq.rows() {
            padded.row_mut(t).copy_from_slice(seq.row(t));
        }
        let pad_row = self.p(P_EMB).row(PAD_ID).to_vec();
        for t in seq.rows()..max_w {
            padded.row_mut(t).copy_from_slice(&pad_row);
        }
        padded
    }

    fn forward_soft(&self, seq: &Tensor) -> Result<SoftForward> {
        if seq.rows() == 0 {
            return Err(Error::EmptySentence);
        }
        if seq.cols() != self.d_embed {
            return Err(Error::ShapeMismatch {
                op: "classify_prob",
                detail: format!("soft input dim {} vs embed {}", seq.cols(), self.d_embed),
            });
        }
        let padded = self.pad_soft(seq);
        let mut pooled = Vec::with_capacity(CONV_WIDTHS.len() * self.n_filters);
        let mut caches = Vec::with_capacity(CONV_WIDTHS.len());
        for w in CONV_WIDTHS {
            let (mut p, cache) =
                conv_maxpool_forward(&padded, self.p(&conv_w(w)), self.p(&conv_b(w)), w)?;
            pooled.append(&mut p);
            caches.push(cache);
        }
        let mut logits = [0.0; 2];
        affine_forward(&pooled, self.p(P_HEAD_W), self.p(P_HEAD_B), &mut logits);
        let probs = softmax(&logits);
        Ok(SoftForward {
            padded,
            pooled,
            caches,
            logits,
            probs,
        })
    }

    /// Class probabilities for hard token ids.
    pub fn classify_prob(&self, seq: &TokenSequence) -> Result<[f64; 2]> {
        let emb = self.embed_hard(seq)?;
        let fwd = self.forward_soft(&emb)?;
        Ok([fwd.probs[0], fwd.probs[1]])
    }

    /// Class probabilities for a pre-embedded (soft) sequence — the
    /// decoder feedback path. Shares every parameter with the hard path.
    pub fn classify_prob_soft(&self, seq: &Tensor) -> Result<[f64; 2]> {
        let fwd = self.forward_soft(seq)?;
        Ok([fwd.probs[0], fwd.probs[1]])
    }

    /// NLL of `target` for a soft sequence plus the gradient on the soft
    /// input rows. Classifier parameters receive no gradient: this is
    /// the frozen feedback contract.
    pub fn soft_nll_and_input_grad(
        &self,
        seq: &Tensor,
        target: u8,
    ) -> Result<(f64, Tensor)> {
        let fwd = self.forward_soft(seq)?;
        let (loss, probs) = softmax_xent(&fwd.logits, target as usize)?;
        let mut d_logits = probs;
        d_logits[target as usize] -= 1.0;

        let mut d_pooled = vec![0.0; fwd.pooled.len()];
        crate::nn::tensor::matvec_transpose_acc(self.p(P_HEAD_W), &d_logits, &mut d_pooled);
        let mut d_padded = Tensor::zeros(fwd.padded.shape());
        let mut dw_scratch; // discarded: parameters stay frozen
        let mut db_scratch;
        for (i, w) in CONV_WIDTHS.iter().enumerate() {
            dw_scratch = Tensor::zeros(self.p(&conv_w(*w)).shape());
            db_scratch = Tensor::zeros(&[self.n_filters]);
            conv_maxpool_backward(
                &fwd.caches[i],
                &fwd.padded,
                self.p(&conv_w(*w)),
                &d_pooled[i * self.n_filters..(i + 1) * self.n_filters],
                &mut dw_scratch,
                &mut db_scratch,
                &mut d_padded,
            );
        }
        let mut d_seq = Tensor::zeros(seq.shape());
        for t in 0..seq.rows() {
            d_seq.row_mut(t).copy_from_slice(d_padded.row(t));
        }
        Ok((loss, d_seq))
    }

    /// Training loss + parameter gradients for one labeled sentence.
    fn train_loss_and_grad(
        &self,
        seq: &TokenSequence,
        class: u8,
        grads: &mut GradStore,
    ) -> Result<f64> {
        let mut ids = seq.ids().to_vec();
        while ids.len() > 1 && *ids.last().unwrap() == PAD_ID {
            ids.pop();
        }
        let emb = embed_forward(&ids, self.p(P_EMB))?;
        let fwd = self.forward_soft(&emb)?;
        let (loss, probs) = softmax_xent(&fwd.logits, class as usize)?;
        let mut d_logits = probs;
        d_logits[class as usize] -= 1.0;

        let id_of = |name: &str| self.params.id(name).expect("param id");
        let mut d_pooled = vec![0.0; fwd.pooled.len()];
        {
            crate::nn::tensor::outer_acc(grads.get_mut(id_of(P_HEAD_W)), &d_logits, &fwd.pooled);
            axpy(1.0, &d_logits, grads.get_mut(id_of(P_HEAD_B)).data_mut());
            crate::nn::tensor::matvec_transpose_acc(self.p(P_HEAD_W), &d_logits, &mut d_pooled);
        }
        let mut d_padded = Tensor::zeros(fwd.padded.shape());
        for (i, w) in CONV_WIDTHS.iter().enumerate() {
            // split borrows: take each grad tensor in turn
            let mut dw = Tensor::zeros(self.p(&conv_w(*w)).shape());
            let mut db = Tensor::zeros(&[self.n_filters]);
            conv_maxpool_backward(
                &fwd.caches[i],
                &fwd.padded,
                self.p(&conv_w(*w)),
                &d_pooled[i * self.n_filters..(i + 1) * self.n_filters],
                &mut dw,
                &mut db,
                &mut d_padded,
            );
            axpy(1.0, dw.data(), grads.get_mut(id_of(&conv_w(*w))).data_mut());
            axpy(1.0, db.data(), grads.get_mut(id_of(&conv_b(*w))).data_mut());
        }
        // embedding rows: real tokens get their row gradients; PAD fill
        // rows accumulate into the PAD embedding
        {
            let grad_emb = grads.get_mut(id_of(P_EMB));
            for (t, &tok) in ids.iter().enumerate() {
                axpy(1.0, d_padded.row(t), grad_emb.row_mut(tok));
            }
            for t in ids.len()..d_padded.rows() {
                axpy(1.0, d_padded.row(t), grad_emb.row_mut(PAD_ID));
            }
        }
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
        hyper.insert("model".into(), "cnn-classifier".into());
        hyper.insert("d_embed".into(), self.d_embed.to_string());
        hyper.insert("n_filters".into(), self.n_filters.to_string());
        hyper.insert("vocab_size".into(), self.vocab_size.to_string());
        hyper.insert("vocab_hash".into(), self.vocab_hash.clone());
        hyper.insert("dev_accuracy".into(), self.dev_accuracy.to_string());
        checkpoint::save(ckpt_path, &self.params, &hyper)?;
        let sidecar = AttributeDescriptor {
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
        let sidecar: AttributeDescriptor = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("sidecar decode: {e}")))?;
        let need = |key: &str| -> Result<String> {
            hyper
                .get(key)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("missing hyper `{key}`")))
        };
        Ok(StyleClassifier {
            attribute: StyleAttribute::new(
                &sidecar.attribute,
                &sidecar.class0_label,
                &sidecar.class1_label,
            )?,
            params,
            d_embed: need("d_embed")?.parse().unwrap_or(0),
            n_filters: need("n_filters")?.parse().unwrap_or(0),
            vocab_size: need("vocab_size")?.parse().unwrap_or(0),
            vocab_hash: need("vocab_hash")?,
            frozen: true,
            dev_accuracy: sidecar.dev_accuracy,
        })
    }
}

impl SentenceLabeler for StyleClassifier {
    fn label(&self, seq: &TokenSequence) -> u8 {
        let p = self.classify_prob(seq).unwrap_or([0.5, 0.5]);
        u8::from(p[1] > p[0])
    }
}

/// JSON sidecar describing what a classifier checkpoint scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeDescriptor {
    pub attribute: String,
    pub class0_label: String,
    pub class1_label: String,
    pub vocab_hash: String,
    pub dev_accuracy: f64,
}

/// Supervised NLL training on the corpus's classifier split with dev
/// early stopping; the returned classifier is frozen.
pub fn train_style_classifier(
    corpus: &StyledCorpus,
    cfg: &ClassifierConfig,
    vocab: &Vocabulary,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<StyleClassifier> {
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

    let mut clf = StyleClassifier::init(cfg, corpus.attribute.clone(), vocab)?;
    let mut curves = TrainingCurves::default();
    let mut lr = cfg.lr;
    let mut best_acc = 0.0f64;
    let mut stale = 0usize;
    let mut grads = GradStore::zeros_like(&clf.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64 + 0xc1a55));
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
                "classifier dev accuracy {:.3} below required {:.3}",
                clf.dev_accuracy, cfg.min_accuracy
            ),
            curves,
        });
    }
    clf.frozen = true;
    Ok(clf)
}

/// The pair of per-attribute strengths returned by the arbiter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleTuple {
    pub a1: f64,
    pub a2: f64,
}

/// Score a sentence with one classifier per attribute: component i is
/// that classifier's class-0 probability.
pub fn arbiter(
    x: &TokenSequence,
    clf1: &StyleClassifier,
    clf2: &StyleClassifier,
) -> Result<StyleTuple> {
    if clf1.attribute.name == clf2.attribute.name {
        return Err(Error::AttributeCollision(clf1.attribute.name.clone()));
    }
    let p1 = clf1.classify_prob(x)?;
    let p2 = clf2.classify_prob(x)?;
    Ok(StyleTuple {
        a1: p1[0],
        a2: p2[0],
    })
}
