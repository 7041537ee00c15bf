//! The style-fusion decoder: one decoder trained to reconstruct
//! back-translated content while two frozen style classifiers score its
//! soft outputs against a requested style pair. The training objective
//! is the weighted joint loss
//!
//! ```text
//! l_gen = l_decoder + alpha * l_class1 + beta * l_class2
//! ```
//!
//! whose decomposition is logged at every step.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::StyleClassifier;
use crate::corpus::{TokenSequence, Vocabulary, BOS_ID, EOS_ID};
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::nn::layers::*;
use crate::nn::params::{sgd_step, GradStore, ParameterStore};
use crate::nn::tensor::{axpy, Tensor};
use crate::normalizer::{back_translate, encode_latent, LatentContent};
use crate::seq2seq::{argmax, Seq2SeqModel};

/// Which corner of style space to steer toward, and how hard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStyleRequest {
    pub class_attr1: u8,
    pub class_attr2: u8,
    pub alpha: f64,
    pub beta: f64,
}

impl TargetStyleRequest {
    pub fn new(class_attr1: u8, class_attr2: u8, alpha: f64, beta: f64) -> Result<Self> {
        if class_attr1 > 1 || class_attr2 > 1 {
            return Err(Error::Invalid("target classes must be 0 or 1".into()));
        }
        if alpha < 0.0 || beta < 0.0 || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Invalid("loss weights must be non-negative".into()));
        }
        Ok(TargetStyleRequest {
            class_attr1,
            class_attr2,
            alpha,
            beta,
        })
    }
}

/// The canonical composition of the joint generative loss. Every logger
/// and every test recomputes the sum through this one expression, so
/// the identity holds bit-for-bit.
#[inline]
pub fn compose_gen(l_decoder: f64, l_class1: f64, l_class2: f64, alpha: f64, beta: f64) -> f64 {
    l_decoder + alpha * l_class1 + beta * l_class2
}

/// One training step's loss decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub decoder: f64,
    pub class1: f64,
    pub class2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gen: f64,
}

pub fn joint_loss(
    l_decoder: f64,
    l_class1: f64,
    l_class2: f64,
    alpha: f64,
    beta: f64,
) -> Result<LossBreakdown> {
    for (name, v) in [
        ("l_decoder", l_decoder),
        ("l_class1", l_class1),
        ("l_class2", l_class2),
        ("alpha", alpha),
        ("beta", beta),
    ] {
        if !v.is_finite() {
            return Err(Error::Invalid(format!("{name} is not finite: {v}")));
        }
    }
    Ok(LossBreakdown {
        decoder: l_decoder,
        class1: l_class1,
        class2: l_class2,
        alpha,
        beta,
        gen: compose_gen(l_decoder, l_class1, l_class2, alpha, beta),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StmsConfig {
    pub d_embed: usize,
    pub d_hidden: usize,
    pub l_max: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub init_range: f64,
}

impl Default for StmsConfig {
    fn default() -> Self {
        StmsConfig {
            d_embed: 24,
            d_hidden: 48,
            l_max: crate::corpus::DEFAULT_L_MAX,
            lr: 2.0,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 8,
            max_epochs: 3,
            seed: 11,
            init_range: 0.25,
        }
    }
}

const P_EMB: &str = "dec.emb";
const P_DEC_W: &str = "dec.w";
const P_DEC_B: &str = "dec.b";
const P_INIT_H_W: &str = "dec.init_h.w";
const P_INIT_H_B: &str = "dec.init_h.b";
const P_INIT_C_W: &str = "dec.init_c.w";
const P_INIT_C_B: &str = "dec.init_c.b";
const P_PROJ_W: &str = "dec.proj.w";
const P_PROJ_B: &str = "dec.proj.b";

/// The trained style-fusion decoder. Holds decoder parameters only; the
/// content encoder and the two classifiers it was trained against are
/// referenced by hash and wired back in at generation time.
#[derive(Debug, Clone)]
pub struct StmsModel {
    pub params: ParameterStore,
    pub d_embed: usize,
    pub d_hidden: usize,
    pub z_dim: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub l_max: usize,
    pub request: TargetStyleRequest,
    pub clf1_hash: String,
    pub clf2_hash: String,
}

struct DecoderForward {
    loss: f64,
    probs: Vec<Vec<f64>>,
    dec_run: LstmRun,
    h0: Vec<f64>,
    c0: Vec<f64>,
}

impl StmsModel {
    pub fn init(
        cfg: &StmsConfig,
        z_dim: usize,
        vocab: &Vocabulary,
        request: TargetStyleRequest,
        clf1_hash: &str,
        clf2_hash: &str,
    ) -> Result<Self> {
        let (de, dh) = (cfg.d_embed, cfg.d_hidden);
        let v = vocab.len();
        let r = cfg.init_range;
        let mut params = ParameterStore::new(cfg.seed);
        params.add_uniform_range(P_EMB, &[v, de], r)?;
        params.add_uniform_range(P_DEC_W, &[4 * dh, de + z_dim + dh], r)?;
        params.add_zeros(P_DEC_B, &[4 * dh])?;
        params.add_uniform_range(P_INIT_H_W, &[dh, z_dim], r)?;
        params.add_zeros(P_INIT_H_B, &[dh])?;
        params.add_uniform_range(P_INIT_C_W, &[dh, z_dim], r)?;
        params.add_zeros(P_INIT_C_B, &[dh])?;
        params.add_uniform_range(P_PROJ_W, &[v, dh], r)?;
        params.add_zeros(P_PROJ_B, &[v])?;
        Ok(StmsModel {
            params,
            d_embed: de,
            d_hidden: dh,
            z_dim,
            vocab_size: v,
            vocab_hash: vocab.hash(),
            l_max: cfg.l_max,
            request,
            clf1_hash: clf1_hash.to_string(),
            clf2_hash: clf2_hash.to_string(),
        })
    }

    fn p(&self, name: &str) -> &Tensor {
        self.params.by_name(name).expect("decoder parameter")
    }

    fn decoder_init(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dh = self.d_hidden;
        let mut pre_h0 = vec![0.0; dh];
        let mut pre_c0 = vec![0.0; dh];
        affine_forward(z, self.p(P_INIT_H_W), self.p(P_INIT_H_B), &mut pre_h0);
        affine_forward(z, self.p(P_INIT_C_W), self.p(P_INIT_C_B), &mut pre_c0);
        (
            pre_h0.iter().map(|v| v.tanh()).collect(),
            pre_c0.iter().map(|v| v.tanh()).collect(),
        )
    }

    fn forward(&self, z: &[f64], target: &TokenSequence) -> Result<DecoderForward> {
        if z.len() != self.z_dim {
            return Err(Error::ShapeMismatch {
                op: "decoder_reconstruct",
                detail: format!("z dim {} vs expected {}", z.len(), self.z_dim),
            });
        }
        let steps = target.len();
        let de = self.d_embed;
        let emb = self.p(P_EMB);
        let mut dec_inputs = Tensor::zeros(&[steps, de + self.z_dim]);
        let mut prev = BOS_ID;
        for (t, &tok) in target.ids().iter().enumerate() {
            let row = dec_inputs.row_mut(t);
            row[..de].copy_from_slice(emb.row(prev));
            row[de..].copy_from_slice(z);
            prev = tok;
        }
        let (h0, c0) = self.decoder_init(z);
        let dec_run = lstm_seq_forward(
            &dec_inputs,
            self.p(P_DEC_W),
            self.p(P_DEC_B),
            Some((&h0, &c0)),
        )?;
        let mut loss = 0.0;
        let mut probs = Vec::with_capacity(steps);
        for (t, &tok) in target.ids().iter().enumerate() {
            let mut logits = vec![0.0; self.vocab_size];
            affine_forward(&dec_run.hidden[t], self.p(P_PROJ_W), self.p(P_PROJ_B), &mut logits);
            let (step_loss, p) = softmax_xent(&logits, tok)?;
            loss += step_loss;
            probs.push(p);
        }
        loss /= steps as f64;
        let _ = dec_inputs;
        Ok(DecoderForward {
            loss,
            probs,
            dec_run,
            h0,
            c0,
        })
    }

    /// Teacher-forced reconstruction of `d` from content state `z`:
    /// the mean per-step cross-entropy and the per-step soft output
    /// distributions for the feedback path.
    pub fn decoder_reconstruct(
        &self,
        z: &LatentContent,
        d: &TokenSequence,
    ) -> Result<(f64, Tensor)> {
        let fwd = self.forward(&z.final_state, d)?;
        let steps = fwd.probs.len();
        let mut soft = Tensor::zeros(&[steps, self.vocab_size]);
        for (t, p) in fwd.probs.iter().enumerate() {
            soft.row_mut(t).copy_from_slice(p);
        }
        Ok((fwd.loss, soft))
    }

    /// Greedy decode from a content state.
    pub fn greedy_from_state(&self, z: &[f64]) -> Result<TokenSequence> {
        let de = self.d_embed;
        let (mut h, mut c) = self.decoder_init(z);
        let emb = self.p(P_EMB);
        let mut out = Vec::new();
        let mut prev = BOS_ID;
        let mut input = vec![0.0; de + z.len()];
        for _ in 0..self.l_max.saturating_sub(1) {
            input[..de].copy_from_slice(emb.row(prev));
            input[de..].copy_from_slice(z);
            let (h_new, c_new, _) =
                lstm_cell_forward(&input, &h, &c, self.p(P_DEC_W), self.p(P_DEC_B))?;
            h = h_new;
            c = c_new;
            let mut logits = vec![0.0; self.vocab_size];
            affine_forward(&h, self.p(P_PROJ_W), self.p(P_PROJ_B), &mut logits);
            let next = argmax(&logits);
            if next == EOS_ID {
                break;
            }
            out.push(next);
            prev = next;
        }
        out.push(EOS_ID);
        TokenSequence::new(out, self.vocab_size)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut hyper = BTreeMap::new();
        hyper.insert("model".into(), "stms-decoder".into());
        hyper.insert("d_embed".into(), self.d_embed.to_string());
        hyper.insert("d_hidden".into(), self.d_hidden.to_string());
        hyper.insert("z_dim".into(), self.z_dim.to_string());
        hyper.insert("vocab_size".into(), self.vocab_size.to_string());
        hyper.insert("vocab_hash".into(), self.vocab_hash.clone());
        hyper.insert("l_max".into(), self.l_max.to_string());
        hyper.insert("target_class_attr1".into(), self.request.class_attr1.to_string());
        hyper.insert("target_class_attr2".into(), self.request.class_attr2.to_string());
        hyper.insert("alpha".into(), self.request.alpha.to_string());
        hyper.insert("beta".into(), self.request.beta.to_string());
        hyper.insert("clf1_hash".into(), self.clf1_hash.clone());
        hyper.insert("clf2_hash".into(), self.clf2_hash.clone());
        checkpoint::save(path, &self.params, &hyper)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, hyper) = checkpoint::load(path)?;
        let need = |key: &str| -> Result<String> {
            hyper
                .get(key)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("missing hyper `{key}`")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            need(key)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad hyper `{key}`")))
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            need(key)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad hyper `{key}`")))
        };
        Ok(StmsModel {
            params,
            d_embed: parse_usize("d_embed")?,
            d_hidden: parse_usize("d_hidden")?,
            z_dim: parse_usize("z_dim")?,
            vocab_size: parse_usize("vocab_size")?,
            vocab_hash: need("vocab_hash")?,
            l_max: parse_usize("l_max")?,
            request: TargetStyleRequest::new(
                need("target_class_attr1")?.parse().map_err(|_| {
                    Error::Checkpoint("bad target_class_attr1".into())
                })?,
                need("target_class_attr2")?.parse().map_err(|_| {
                    Error::Checkpoint("bad target_class_attr2".into())
                })?,
                parse_f64("alpha")?,
                parse_f64("beta")?,
            )?,
            clf1_hash: need("clf1_hash")?,
            clf2_hash: need("clf2_hash")?,
        })
    }
}

/// Expected-embedding feedback: each soft row becomes a convex mixture
/// of the classifier's embedding rows, the classifier scores the mixed
/// sequence, and the NLL of the requested class flows back into the
/// soft distributions only. Classifier parameters receive nothing.
pub fn soft_feedback_loss(
    soft: &Tensor,
    clf: &StyleClassifier,
    target_class: u8,
) -> Result<(f64, Tensor)> {
    if !clf.frozen {
        return Err(Error::Invalid(
            "feedback classifiers must be frozen before decoder training".into(),
        ));
    }
    let steps = soft.rows();
    let v = soft.cols();
    if v != clf.vocab_size {
        return Err(Error::ShapeMismatch {
            op: "soft_feedback_loss",
            detail: format!("soft vocab {} vs classifier {}", v, clf.vocab_size),
        });
    }
    let emb = clf.params.by_name("emb")?;
    let de = emb.cols();
    // expected embeddings: soft [L x V] times emb [V x de]
    let mut mixed = Tensor::zeros(&[steps, de]);
    for t in 0..steps {
        let row = soft.row(t);
        let out = mixed.row_mut(t);
        for (vid, &w) in row.iter().enumerate() {
            if w != 0.0 {
                axpy(w, emb.row(vid), out);
            }
        }
    }
    let (loss, d_mixed) = clf.soft_nll_and_input_grad(&mixed, target_class)?;
    // d_soft[t][v] = d_mixed[t] . emb[v]
    let mut d_soft = Tensor::zeros(&[steps, v]);
    for t in 0..steps {
        let dm = d_mixed.row(t);
        let out = d_soft.row_mut(t);
        for vid in 0..v {
            out[vid] = crate::nn::tensor::dot(dm, emb.row(vid));
        }
    }
    Ok((loss, d_soft))
}

/// Per-sentence joint forward/backward. Gradients flow into the decoder
/// parameters only; `z` is а constant from the frozen encoder.
fn sentence_loss_and_grad(
    model: &StmsModel,
    z: &[f64],
    target: &TokenSequence,
    feedback: Option<(&StyleClassifier, &StyleClassifier)>,
    request: &TargetStyleRequest,
    grads: &mut GradStore,
) -> Result<(f64, f64, f64)> {
    let fwd = model.forward(z, target)?;
    let steps = target.len();
    let (de, dh, v) = (model.d_embed, model.d_hidden, model.vocab_size);
    let scale = 1.0 / steps as f64;

    // soft outputs as a tensor for the feedback path
    let mut soft = Tensor::zeros(&[steps, v]);
    for (t, p) in fwd.probs.iter().enumerate() {
        soft.row_mut(t).copy_from_slice(p);
    }
    let (l_class1, l_class2, d_soft1, d_soft2) = match feedback {
        Some((clf1, clf2)) => {
            let (l1, d1) = soft_feedback_loss(&soft, clf1, request.class_attr1)?;
            let (l2, d2) = soft_feedback_loss(&soft, clf2, request.class_attr2)?;
            (l1, l2, Some(d1), Some(d2))
        }
        None => (0.0, 0.0, None, None),
    };

    // combined upstream on the logits
    let mut d_hidden_steps: Vec<Vec<f64>> = vec![vec![0.0; dh]; steps];
    {
        let id = |name: &str| model.params.id(name).expect("param id");
        let proj_w = model.p(P_PROJ_W);
        for t in 0..steps {
            let mut d_logits = vec![0.0; v];
            // reconstruction: (p - onehot) / steps
            axpy(scale, &fwd.probs[t], &mut d_logits);
            d_logits[target.ids()[t]] -= scale;
            // feedback through the softmax jacobian, weighted
            if request.alpha > 0.0 {
                if let Some(d1) = &d_soft1 {
                    let mut dp = d1.row(t).to_vec();
                    dp.iter_mut().for_each(|x| *x *= request.alpha);
                    softmax_backward(&fwd.probs[t], &dp, &mut d_logits);
                }
            }
            if request.beta > 0.0 {
                if let Some(d2) = &d_soft2 {
                    let mut dp = d2.row(t).to_vec();
                    dp.iter_mut().for_each(|x| *x *= request.beta);
                    softmax_backward(&fwd.probs[t], &dp, &mut d_logits);
                }
            }
            crate::nn::tensor::outer_acc(
                grads.get_mut(id(P_PROJ_W)),
                &d_logits,
                &fwd.dec_run.hidden[t],
            );
            axpy(1.0, &d_logits, grads.get_mut(id(P_PROJ_B)).data_mut());
            crate::nn::tensor::matvec_transpose_acc(proj_w, &d_logits, &mut d_hidden_steps[t]);
        }
    }

    // decoder BPTT and input/init backward
    let id = |name: &str| model.params.id(name).expect("param id");
    let mut dh0 = vec![0.0; dh];
    let mut dc0 = vec![0.0; dh];
    let d_dec_inputs = {
        let mut dw = Tensor::zeros(model.p(P_DEC_W).shape());
        let mut db = Tensor::zeros(model.p(P_DEC_B).shape());
        let d_in = lstm_seq_backward(
            &fwd.dec_run,
            model.p(P_DEC_W),
            &d_hidden_steps,
            None,
            &mut dw,
            &mut db,
            Some((&mut dh0, &mut dc0)),
        );
        axpy(1.0, dw.data(), grads.get_mut(id(P_DEC_W)).data_mut());
        axpy(1.0, db.data(), grads.get_mut(id(P_DEC_B)).data_mut());
        d_in
    };
    {
        let mut prev = BOS_ID;
        let mut d_emb_rows = Tensor::zeros(&[steps, de]);
        let mut input_ids = Vec::with_capacity(steps);
        for (t, &tok) in target.ids().iter().enumerate() {
            input_ids.push(prev);
            d_emb_rows
                .row_mut(t)
                .copy_from_slice(&d_dec_inputs.row(t)[..de]);
            prev = tok;
        }
        embed_backward(&input_ids, &d_emb_rows, grads.get_mut(id(P_EMB)));
    }
    {
        let mut d_pre_h0 = vec![0.0; dh];
        let mut d_pre_c0 = vec![0.0; dh];
        for k in 0..dh {
            d_pre_h0[k] = dh0[k] * (1.0 - fwd.h0[k] * fwd.h0[k]);
            d_pre_c0[k] = dc0[k] * (1.0 - fwd.c0[k] * fwd.c0[k]);
        }
        crate::nn::tensor::outer_acc(grads.get_mut(id(P_INIT_H_W)), &d_pre_h0, z);
        axpy(1.0, &d_pre_h0, grads.get_mut(id(P_INIT_H_B)).data_mut());
        crate::nn::tensor::outer_acc(grads.get_mut(id(P_INIT_C_W)), &d_pre_c0, z);
        axpy(1.0, &d_pre_c0, grads.get_mut(id(P_INIT_C_B)).data_mut());
    }

    Ok((fwd.loss, l_class1, l_class2))
}

/// Forward-only joint loss of one sentence under the current decoder.
pub fn sentence_joint_loss(
    model: &StmsModel,
    z: &[f64],
    target: &TokenSequence,
    clf1: &StyleClassifier,
    clf2: &StyleClassifier,
    request: &TargetStyleRequest,
) -> Result<LossBreakdown> {
    let fwd = model.forward(z, target)?;
    let steps = target.len();
    let mut soft = Tensor::zeros(&[steps, model.vocab_size]);
    for (t, p) in fwd.probs.iter().enumerate() {
        soft.row_mut(t).copy_from_slice(p);
    }
    let (l1, _) = soft_feedback_loss(&soft, clf1, request.class_attr1)?;
    let (l2, _) = soft_feedback_loss(&soft, clf2, request.class_attr2)?;
    joint_loss(fwd.loss, l1, l2, request.alpha, request.beta)
}

/// Everything `train_stms` leaves behind.
pub struct StmsTraining {
    pub model: StmsModel,
    pub steps: Vec<LossBreakdown>,
    /// (sentence, its back-translation) pairs used for training.
    pub normalized: Vec<(TokenSequence, TokenSequence)>,
}

/// Train the fusion decoder on source-style sentences. Per sentence the
/// pipeline precomputes its back-translation d' and the frozen encoder
/// state z; each step reconstructs d' from z under the joint loss with
/// both feedback classifiers aimed at the request's target classes.
/// Deterministic under the config seed; classifier parameters are
/// hash-verified untouched.
#[allow(clippy::too_many_arguments)]
pub fn train_stms(
    sentences: &[&TokenSequence],
    request: TargetStyleRequest,
    fwd_translator: &Seq2SeqModel,
    bwd_translator: &Seq2SeqModel,
    clf1: &StyleClassifier,
    clf2: &StyleClassifier,
    cfg: &StmsConfig,
    vocab: &Vocabulary,
    artifacts_dir: Option<&Path>,
) -> Result<StmsTraining> {
    if !clf1.frozen || !clf2.frozen {
        return Err(Error::Invalid("feedback classifiers must be frozen".into()));
    }
    if clf1.attribute.name == clf2.attribute.name {
        return Err(Error::AttributeCollision(clf1.attribute.name.clone()));
    }
    let clf1_hash = clf1.content_hash();
    let clf2_hash = clf2.content_hash();

    train_decoder_impl(
        sentences,
        request,
        fwd_translator,
        bwd_translator,
        Some((clf1, clf2)),
        cfg,
        vocab,
        artifacts_dir,
        (&clf1_hash, &clf2_hash),
    )
    .and_then(|out| {
        if clf1.content_hash() != clf1_hash || clf2.content_hash() != clf2_hash {
            return Err(Error::FrozenViolation);
        }
        Ok(out)
    })
}

/// The bare reconstruction trainer: the same loop with the feedback path
/// disabled. With alpha = beta = 0 `train_stms` runs the identical
/// arithmetic, so both produce bit-identical parameters under one seed.
pub fn train_decoder_only(
    sentences: &[&TokenSequence],
    fwd_translator: &Seq2SeqModel,
    bwd_translator: &Seq2SeqModel,
    cfg: &StmsConfig,
    vocab: &Vocabulary,
) -> Result<StmsTraining> {
    let request = TargetStyleRequest::new(0, 0, 0.0, 0.0)?;
    train_decoder_impl(
        sentences,
        request,
        fwd_translator,
        bwd_translator,
        None,
        cfg,
        vocab,
        None,
        ("", ""),
    )
}

#[allow(clippy::too_many_arguments)]
fn train_decoder_impl(
    sentences: &[&TokenSequence],
    request: TargetStyleRequest,
    fwd_translator: &Seq2SeqModel,
    bwd_translator: &Seq2SeqModel,
    feedback: Option<(&StyleClassifier, &StyleClassifier)>,
    cfg: &StmsConfig,
    vocab: &Vocabulary,
    artifacts_dir: Option<&Path>,
    clf_hashes: (&str, &str),
) -> Result<StmsTraining> {
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    // content normalization, precomputed: the translators and encoder
    // stay frozen through decoder training
    let mut normalized = Vec::with_capacity(sentences.len());
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(sentences.len());
    for s in sentences {
        let d_prime = back_translate(s, fwd_translator, bwd_translator)?;
        let z = encode_latent(&d_prime, bwd_translator)?;
        states.push(z.final_state);
        normalized.push(((*s).clone(), d_prime));
    }
    let z_dim = states[0].len();

    let mut model = StmsModel::init(
        cfg,
        z_dim,
        vocab,
        request,
        clf_hashes.0,
        clf_hashes.1,
    )?;
    if let Some(dir) = artifacts_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }

    let mut steps_log: Vec<LossBreakdown> = Vec::new();
    let mut grads = GradStore::zeros_like(&model.params);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut lr = cfg.lr;
    let mut best_loss = f64::INFINITY;
    let mut stale = 0usize;
    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64 + 0x57e9));
        order.shuffle(&mut rng);
        let mut epoch_gen = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grads.reset();
            let mut sum_dec = 0.0;
            let mut sum_c1 = 0.0;
            let mut sum_c2 = 0.0;
            for &i in batch {
                let (l_dec, l1, l2) = sentence_loss_and_grad(
                    &model,
                    &states[i],
                    &normalized[i].1,
                    feedback,
                    &request,
                    &mut grads,
                )?;
                sum_dec += l_dec;
                sum_c1 += l1;
                sum_c2 += l2;
            }
            let n = batch.len() as f64;
            grads.scale(1.0 / n);
            sgd_step(&mut model.params, &grads, lr, Some(cfg.clip_norm))?;
            let step = joint_loss(sum_dec / n, sum_c1 / n, sum_c2 / n, request.alpha, request.beta)
                .map_err(|_| Error::TrainingFailed {
                    reason: format!("non-finite loss at step {}", steps_log.len()),
                    curves: Default::default(),
                })?;
            epoch_gen += step.gen;
            batches += 1;
            steps_log.push(step);
        }
        let epoch_loss = epoch_gen / batches.max(1) as f64;
        if let Some(dir) = artifacts_dir {
            model.save(&dir.join(format!("epoch-{epoch}.ckpt")))?;
        }
        if epoch_loss > best_loss - 1e-3 {
            stale += 1;
            if stale >= 2 {
                lr *= cfg.lr_decay;
                stale = 0;
            }
        } else {
            stale = 0;
        }
        best_loss = best_loss.min(epoch_loss);
    }
    if let Some(dir) = artifacts_dir {
        model.save(&dir.join("final.ckpt"))?;
        write_losses_csv(&dir.join("losses.csv"), &steps_log)?;
    }
    Ok(StmsTraining {
        model,
        steps: steps_log,
        normalized,
    })
}

/// `losses.csv`: step, l_decoder, l_class1, l_class2, l_gen. Floats are
/// written in shortest round-trip form so the composition identity can
/// be re-verified bit-exactly from the file.
pub fn write_losses_csv(path: &Path, steps: &[LossBreakdown]) -> Result<()> {
    let mut text = String::from("step,l_decoder,l_class1,l_class2,l_gen\n");
    for (i, s) in steps.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            i, s.decoder, s.class1, s.class2, s.gen
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Transfer one sentence: normalize it through the pivot round trip,
/// encode, then greedy-decode with the fusion decoder.
pub fn generate(
    model: &StmsModel,
    x: &TokenSequence,
    fwd_translator: &Seq2SeqModel,
    bwd_translator: &Seq2SeqModel,
) -> Result<TokenSequence> {
    let d_prime = back_translate(x, fwd_translator, bwd_translator)?;
    let z = encode_latent(&d_prime, bwd_translator)?;
    model.greedy_from_state(&z.final_state)
}

/// A fusion decoder wired to its normalizer, ready to transfer.
pub struct StmsSystem<'a> {
    pub model: &'a StmsModel,
    pub fwd_translator: &'a Seq2SeqModel,
    pub bwd_translator: &'a Seq2SeqModel,
}

impl<'a> StmsSystem<'a> {
    pub fn transfer(&self, x: &TokenSequence) -> Result<TokenSequence> {
        generate(self.model, x, self.fwd_translator, self.bwd_translator)
    }
}

#[cfg(test)]
mod tests;
