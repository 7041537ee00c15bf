//! Encoder-decoder sequence transducer: bidirectional LSTM encoder into a
//! fixed content state, unidirectional LSTM decoder conditioned on that
//! state at every step, teacher-forced cross-entropy training and greedy
//! decoding. Used by the pivot translators and the transfer baselines.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenSequence, Vocabulary, BOS_ID, EOS_ID};
use crate::error::{Error, Result, TrainingCurves};
use crate::nn::layers::*;
use crate::nn::params::{sgd_step, GradStore, ParameterStore};
use crate::nn::tensor::{axpy, Tensor};
use crate::nn::checkpoint;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub d_embed: usize,
    pub d_hidden: usize,
    pub init_range: f64,
    pub l_max: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop early once dev exact-match reaches this.
    pub target_exact: f64,
    /// Below this after the last epoch, training counts as failed.
    pub min_exact: f64,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Seq2SeqConfig {
            d_embed: 20,
            d_hidden: 48,
            init_range: 0.08,
            l_max: crate::corpus::DEFAULT_L_MAX,
            lr: 0.5,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 16,
            max_epochs: 12,
            seed: 1,
            target_exact: 0.97,
            min_exact: 0.5,
        }
    }
}

/// Which conversion a trained model performs, when it is a style baseline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferTag {
    pub attribute: String,
    pub source_class: u8,
    pub target_class: u8,
}

const P_EMB: &str = "emb";
const P_ENC_FWD_W: &str = "enc.fwd.w";
const P_ENC_FWD_B: &str = "enc.fwd.b";
const P_ENC_BWD_W: &str = "enc.bwd.w";
const P_ENC_BWD_B: &str = "enc.bwd.b";
const P_DEC_W: &str = "dec.w";
const P_DEC_B: &str = "dec.b";
const P_INIT_H_W: &str = "dec.init_h.w";
const P_INIT_H_B: &str = "dec.init_h.b";
const P_INIT_C_W: &str = "dec.init_c.w";
const P_INIT_C_B: &str = "dec.init_c.b";
const P_PROJ_W: &str = "dec.proj.w";
const P_PROJ_B: &str = "dec.proj.b";

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub params: ParameterStore,
    pub d_embed: usize,
    pub d_hidden: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub l_max: usize,
    pub tag: Option<TransferTag>,
}

pub struct EncoderOutput {
    pub final_state: Vec<f64>, // 2h
    pub per_position: Tensor,  // L x 2h
}

struct DecodeForward {
    loss: f64,
    probs: Vec<Vec<f64>>,
    dec_run: LstmRun,
    h0: Vec<f64>,
    c0: Vec<f64>,
}

impl Seq2SeqModel {
    pub fn init(cfg: &Seq2SeqConfig, vocab: &Vocabulary, tag: Option<TransferTag>) -> Result<Self> {
        let v = vocab.len();
        let (de, dh) = (cfg.d_embed, cfg.d_hidden);
        let r = cfg.init_range;
        let mut params = ParameterStore::new(cfg.seed);
        params.add_uniform_range(P_EMB, &[v, de], r)?;
        params.add_uniform_range(P_ENC_FWD_W, &[4 * dh, de + dh], r)?;
        params.add_zeros(P_ENC_FWD_B, &[4 * dh])?;
        params.add_uniform_range(P_ENC_BWD_W, &[4 * dh, de + dh], r)?;
        params.add_zeros(P_ENC_BWD_B, &[4 * dh])?;
        params.add_uniform_range(P_DEC_W, &[4 * dh, de + 2 * dh + dh], r)?;
        params.add_zeros(P_DEC_B, &[4 * dh])?;
        params.add_uniform_range(P_INIT_H_W, &[dh, 2 * dh], r)?;
        params.add_zeros(P_INIT_H_B, &[dh])?;
        params.add_uniform_range(P_INIT_C_W, &[dh, 2 * dh], r)?;
        params.add_zeros(P_INIT_C_B, &[dh])?;
        params.add_uniform_range(P_PROJ_W, &[v, dh], r)?;
        params.add_zeros(P_PROJ_B, &[v])?;
        Ok(Seq2SeqModel {
            params,
            d_embed: de,
            d_hidden: dh,
            vocab_size: v,
            vocab_hash: vocab.hash(),
            l_max: cfg.l_max,
            tag,
        })
    }

    fn p(&self, name: &str) -> &Tensor {
        self.params.by_name(name).expect("model parameter")
    }

    /// Bidirectional encoding of a sentence; the final state doubles as
    /// the latent content representation.
    pub fn encode(&self, seq: &TokenSequence) -> Result<EncoderOutput> {
        let run = self.encode_run(seq)?;
        Ok(EncoderOutput {
            final_state: run.final_state.clone(),
            per_position: run.outputs.clone(),
        })
    }

    fn encode_run(&self, seq: &TokenSequence) -> Result<BiLstmRun> {
        let emb = embed_forward(seq.ids(), self.p(P_EMB))?;
        bilstm_forward(
            &emb,
            self.p(P_ENC_FWD_W),
            self.p(P_ENC_FWD_B),
            self.p(P_ENC_BWD_W),
            self.p(P_ENC_BWD_B),
        )
    }

    fn decoder_init(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let dh = self.d_hidden;
        let mut pre_h0 = vec![0.0; dh];
        let mut pre_c0 = vec![0.0; dh];
        affine_forward(z, self.p(P_INIT_H_W), self.p(P_INIT_H_B), &mut pre_h0);
        affine_forward(z, self.p(P_INIT_C_W), self.p(P_INIT_C_B), &mut pre_c0);
        let h0: Vec<f64> = pre_h0.iter().map(|v| v.tanh()).collect();
        let c0: Vec<f64> = pre_c0.iter().map(|v| v.tanh()).collect();
        (h0, c0, pre_h0, pre_c0)
    }

    /// Teacher-forced decode of `target` from content state `z`;
    /// loss is the mean per-step cross-entropy.
    fn decode_teacher_forced(&self, z: &[f64], target: &TokenSequence) -> Result<DecodeForward> {
        let steps = target.len();
        let de = self.d_embed;
        let z_dim = z.len();
        let emb = self.p(P_EMB);
        let mut dec_inputs = Tensor::zeros(&[steps, de + z_dim]);
        let mut prev = BOS_ID;
        for (t, &tok) in target.ids().iter().enumerate() {
            let row = dec_inputs.row_mut(t);
            row[..de].copy_from_slice(emb.row(prev));
            row[de..].copy_from_slice(z);
            prev = tok;
        }
        let (h0, c0, pre_h0, pre_c0) = self.decoder_init(z);
        let dec_run = lstm_seq_forward(
            &dec_inputs,
            self.p(P_DEC_W),
            self.p(P_DEC_B),
            Some((&h0, &c0)),
        )?;
        let mut loss = 0.0;
        let mut probs = Vec::with_capacity(steps);
        for (t, &tok) in target.ids().iter().enumerate() {
            let mut l = vec![0.0; self.vocab_size];
            affine_forward(&dec_run.hidden[t], self.p(P_PROJ_W), self.p(P_PROJ_B), &mut l);
            let (step_loss, p) = softmax_xent(&l, tok)?;
            loss += step_loss;
            probs.push(p);
        }
        loss /= steps as f64;
        let _ = (pre_h0, pre_c0, dec_inputs);
        Ok(DecodeForward {
            loss,
            probs,
            dec_run,
            h0,
            c0,
        })
    }

    /// Forward + backward for one (source, target) pair; accumulates into
    /// `grads` and returns the mean per-step loss.
    pub fn pair_loss_and_grad(
        &self,
        src: &TokenSequence,
        tgt: &TokenSequence,
        grads: &mut GradStore,
    ) -> Result<f64> {
        let enc_run = self.encode_run(src)?;
        let fwd = self.decode_teacher_forced(&enc_run.final_state, tgt)?;
        let steps = tgt.len();
        let dh = self.d_hidden;
        let de = self.d_embed;
        let z_dim = 2 * dh;
        let scale = 1.0 / steps as f64;

        let id = |name: &str| self.params.id(name).expect("param id");

        // projection backward per step -> d_hidden stream
        let mut d_hidden_steps: Vec<Vec<f64>> = vec![vec![0.0; dh]; steps];
        {
            let proj_w = self.p(P_PROJ_W);
            for t in 0..steps {
                let mut d_logits = fwd.probs[t].clone();
                d_logits[tgt.ids()[t]] -= 1.0;
                for v in d_logits.iter_mut() {
                    *v *= scale;
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

        // decoder BPTT
        let mut dh0 = vec![0.0; dh];
        let mut dc0 = vec![0.0; dh];
        let d_dec_inputs = {
            let mut dw = Tensor::zeros(self.p(P_DEC_W).shape());
            let mut db = Tensor::zeros(self.p(P_DEC_B).shape());
            let d_in = lstm_seq_backward(
                &fwd.dec_run,
                self.p(P_DEC_W),
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

        // split decoder input grads: embedding rows + z feed
        let mut dz = vec![0.0; z_dim];
        {
            let mut prev = BOS_ID;
            let mut d_emb_rows = Tensor::zeros(&[steps, de]);
            let mut input_ids = Vec::with_capacity(steps);
            for (t, &tok) in tgt.ids().iter().enumerate() {
                input_ids.push(prev);
                d_emb_rows
                    .row_mut(t)
                    .copy_from_slice(&d_dec_inputs.row(t)[..de]);
                axpy(1.0, &d_dec_inputs.row(t)[de..], &mut dz);
                prev = tok;
            }
            embed_backward(&input_ids, &d_emb_rows, grads.get_mut(id(P_EMB)));
        }

        // init-state backward through tanh(affine(z))
        {
            let mut d_pre_h0 = vec![0.0; dh];
            let mut d_pre_c0 = vec![0.0; dh];
            for k in 0..dh {
                d_pre_h0[k] = dh0[k] * (1.0 - fwd.h0[k] * fwd.h0[k]);
                d_pre_c0[k] = dc0[k] * (1.0 - fwd.c0[k] * fwd.c0[k]);
            }
            let init_h_w = self.p(P_INIT_H_W);
            crate::nn::tensor::outer_acc(grads.get_mut(id(P_INIT_H_W)), &d_pre_h0, &enc_run.final_state);
            axpy(1.0, &d_pre_h0, grads.get_mut(id(P_INIT_H_B)).data_mut());
            crate::nn::tensor::matvec_transpose_acc(init_h_w, &d_pre_h0, &mut dz);
            let init_c_w = self.p(P_INIT_C_W);
            crate::nn::tensor::outer_acc(grads.get_mut(id(P_INIT_C_W)), &d_pre_c0, &enc_run.final_state);
            axpy(1.0, &d_pre_c0, grads.get_mut(id(P_INIT_C_B)).data_mut());
            crate::nn::tensor::matvec_transpose_acc(init_c_w, &d_pre_c0, &mut dz);
        }

        // encoder backward
        {
            let mut dw_f = Tensor::zeros(self.p(P_ENC_FWD_W).shape());
            let mut db_f = Tensor::zeros(self.p(P_ENC_FWD_B).shape());
            let mut dw_b = Tensor::zeros(self.p(P_ENC_BWD_W).shape());
            let mut db_b = Tensor::zeros(self.p(P_ENC_BWD_B).shape());
            let d_enc_inputs = bilstm_backward(
                &enc_run,
                self.p(P_ENC_FWD_W),
                self.p(P_ENC_BWD_W),
                None,
                Some(&dz),
                &mut dw_f,
                &mut db_f,
                &mut dw_b,
                &mut db_b,
            );
            axpy(1.0, dw_f.data(), grads.get_mut(id(P_ENC_FWD_W)).data_mut());
            axpy(1.0, db_f.data(), grads.get_mut(id(P_ENC_FWD_B)).data_mut());
            axpy(1.0, dw_b.data(), grads.get_mut(id(P_ENC_BWD_W)).data_mut());
            axpy(1.0, db_b.data(), grads.get_mut(id(P_ENC_BWD_B)).data_mut());
            embed_backward(src.ids(), &d_enc_inputs, grads.get_mut(id(P_EMB)));
        }

        Ok(fwd.loss)
    }

    /// Mean per-step teacher-forced loss without touching gradients.
    pub fn pair_loss(&self, src: &TokenSequence, tgt: &TokenSequence) -> Result<f64> {
        let enc = self.encode_run(src)?;
        Ok(self.decode_teacher_forced(&enc.final_state, tgt)?.loss)
    }

    /// Greedy decode from a source sentence. Always ends with EOS and
    /// never exceeds `l_max` tokens.
    pub fn greedy(&self, src: &TokenSequence) -> Result<TokenSequence> {
        let enc = self.encode_run(src)?;
        self.greedy_from_state(&enc.final_state)
    }

    pub fn greedy_from_state(&self, z: &[f64]) -> Result<TokenSequence> {
        let de = self.d_embed;
        let (mut h, mut c, _, _) = self.decoder_init(z);
        let emb = self.p(P_EMB);
        let mut out: Vec<usize> = Vec::new();
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
        hyper.insert("model".into(), "seq2seq".into());
        hyper.insert("d_embed".into(), self.d_embed.to_string());
        hyper.insert("d_hidden".into(), self.d_hidden.to_string());
        hyper.insert("vocab_size".into(), self.vocab_size.to_string());
        hyper.insert("vocab_hash".into(), self.vocab_hash.clone());
        hyper.insert("l_max".into(), self.l_max.to_string());
        if let Some(tag) = &self.tag {
            hyper.insert("tag.attribute".into(), tag.attribute.clone());
            hyper.insert("tag.source_class".into(), tag.source_class.to_string());
            hyper.insert("tag.target_class".into(), tag.target_class.to_string());
        }
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
        let tag = match hyper.get("tag.attribute") {
            Some(attr) => Some(TransferTag {
                attribute: attr.clone(),
                source_class: need("tag.source_class")?
                    .parse()
                    .map_err(|_| Error::Checkpoint("bad tag.source_class".into()))?,
                target_class: need("tag.target_class")?
                    .parse()
                    .map_err(|_| Error::Checkpoint("bad tag.target_class".into()))?,
            }),
            None => None,
        };
        Ok(Seq2SeqModel {
            params,
            d_embed: parse_usize("d_embed")?,
            d_hidden: parse_usize("d_hidden")?,
            vocab_size: parse_usize("vocab_size")?,
            vocab_hash: need("vocab_hash")?,
            l_max: parse_usize("l_max")?,
            tag,
        })
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of pairs whose greedy decode equals the target exactly.
pub fn exact_match(model: &Seq2SeqModel, pairs: &[(TokenSequence, TokenSequence)]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (src, tgt) in pairs {
        if &model.greedy(src)? == tgt {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Per-epoch progress handed to the caller's logger.
#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_exact: f64,
    pub lr: f64,
}

/// Teacher-forced SGD training over (source, target) pairs with seeded
/// shuffling, global-norm clipping, plateau lr decay and early stopping
/// on dev exact-match. Fails (curves attached) when the final dev
/// exact-match is below `cfg.min_exact`.
pub fn train_seq2seq(
    pairs: &[(TokenSequence, TokenSequence)],
    dev_pairs: &[(TokenSequence, TokenSequence)],
    cfg: &Seq2SeqConfig,
    vocab: &Vocabulary,
    tag: Option<TransferTag>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Seq2SeqModel> {
    let mut model = Seq2SeqModel::init(cfg, vocab, tag)?;
    let mut curves = TrainingCurves::default();
    let mut lr = cfg.lr;
    let mut best_dev_loss = f64::INFINITY;
    let mut stale_epochs = 0usize;
    let mut grads = GradStore::zeros_like(&model.params);
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64 + 0x5eed));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grads.reset();
            let mut batch_loss = 0.0;
            for &i in batch {
                let (src, tgt) = &pairs[i];
                batch_loss += model.pair_loss_and_grad(src, tgt, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            sgd_step(&mut model.params, &grads, lr, Some(cfg.clip_norm))?;
            epoch_loss += batch_loss;
            seen += batch.len();
        }
        let train_loss = epoch_loss / seen.max(1) as f64;
        if !train_loss.is_finite() {
            return Err(Error::TrainingFailed {
                reason: format!("non-finite training loss at epoch {epoch}"),
                curves,
            });
        }
        let mut dev_loss = 0.0;
        for (src, tgt) in dev_pairs {
            dev_loss += model.pair_loss(src, tgt)?;
        }
        dev_loss /= dev_pairs.len().max(1) as f64;
        let dev_exact = exact_match(&model, dev_pairs)?;
        curves.train_loss.push(train_loss);
        curves.dev_metric.push(dev_exact);
        on_epoch(&EpochLog {
            epoch,
            train_loss,
            dev_loss,
            dev_exact,
            lr,
        });
        if dev_exact >= cfg.target_exact {
            break;
        }
        // dev-loss plateau: halve the rate after two epochs without
        // meaningful improvement
        if dev_loss > best_dev_loss - 1e-3 {
            stale_epochs += 1;
            if stale_epochs >= 2 {
                lr *= cfg.lr_decay;
                stale_epochs = 0;
            }
        } else {
            stale_epochs = 0;
        }
        best_dev_loss = best_dev_loss.min(dev_loss);
    }

    let final_exact = if cfg.max_epochs == 0 {
        let m = exact_match(&model, dev_pairs)?;
        curves.dev_metric.push(m);
        m
    } else {
        curves.final_dev_metric()
    };
    if final_exact < cfg.min_exact {
        return Err(Error::TrainingFailed {
            reason: format!(
                "dev exact-match {final_exact:.3} below required {:.3} after {} epochs",
                cfg.min_exact, cfg.max_epochs
            ),
            curves,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::nn::gradcheck::{grad_check, DEFAULT_STEP};

    fn tiny_vocab(n: usize) -> Vocabulary {
        let words: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        build_vocab([words.join(" ").as_str()], 1, 1000).unwrap()
    }

    fn tiny_cfg() -> Seq2SeqConfig {
        Seq2SeqConfig {
            d_embed: 4,
            d_hidden: 5,
            l_max: 10,
            seed: 3,
            ..Seq2SeqConfig::default()
        }
    }

    #[test]
    fn full_pair_gradients_match_central_differences() {
        let vocab = tiny_vocab(8);
        let cfg = tiny_cfg();
        let model = Seq2SeqModel::init(&cfg, &vocab, None).unwrap();
        let src = TokenSequence::new(vec![4, 6, 5, EOS_ID], vocab.len()).unwrap();
        let tgt = TokenSequence::new(vec![5, 4, 7, EOS_ID], vocab.len()).unwrap();

        let mut grads = GradStore::zeros_like(&model.params);
        model.pair_loss_and_grad(&src, &tgt, &mut grads).unwrap();

        let mut store = model.params.clone();
        let report = grad_check(
            &mut store,
            &grads,
            |s: &ParameterStore| {
                let mut m = model.clone();
                m.params = s.clone();
                m.pair_loss(&src, &tgt).unwrap()
            },
            DEFAULT_STEP,
            17,
        );
        assert!(report.max_error() < 1e-4, "worst: {:?}", report.worst());
    }

    #[test]
    fn untrained_loss_is_near_ln_v() {
        let vocab = tiny_vocab(60);
        let cfg = tiny_cfg();
        let model = Seq2SeqModel::init(&cfg, &vocab, None).unwrap();
        let src = TokenSequence::new(vec![10, 11, EOS_ID], vocab.len()).unwrap();
        let loss = model.pair_loss(&src, &src).unwrap();
        let ln_v = (vocab.len() as f64).ln();
        assert!((loss - ln_v).abs() < 0.2, "loss {loss} vs ln V {ln_v}");
    }

    #[test]
    fn greedy_is_deterministic_and_bounded() {
        let vocab = tiny_vocab(12);
        let cfg = tiny_cfg();
        let model = Seq2SeqModel::init(&cfg, &vocab, None).unwrap();
        let src = TokenSequence::new(vec![4, 5, 6, EOS_ID], vocab.len()).unwrap();
        let a = model.greedy(&src).unwrap();
        let b = model.greedy(&src).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= cfg.l_max);
        assert_eq!(*a.ids().last().unwrap(), EOS_ID);
    }

    #[test]
    fn checkpoint_round_trip_preserves_model() {
        let vocab = tiny_vocab(10);
        let cfg = tiny_cfg();
        let tag = Some(TransferTag {
            attribute: "tone".into(),
            source_class: 1,
            target_class: 0,
        });
        let model = Seq2SeqModel::init(&cfg, &vocab, tag.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        model.save(&path).unwrap();
        let loaded = Seq2SeqModel::load(&path).unwrap();
        assert_eq!(loaded.tag, tag);
        assert_eq!(loaded.vocab_hash, model.vocab_hash);
        let src = TokenSequence::new(vec![4, 5, EOS_ID], vocab.len()).unwrap();
        assert_eq!(model.greedy(&src).unwrap(), loaded.greedy(&src).unwrap());
    }
}
