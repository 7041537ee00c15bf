//! Back-translation content normalization through a trainable pivot.
//!
//! The pivot "language" is a deterministic cipher: a seeded bijection
//! over the non-reserved vocabulary plus a one-token left rotation of
//! the sentence body. Two sequence models are trained against it — one
//! into the pivot, one back — and a round trip through both rephrases a
//! sentence while its exact inverse stays available as a test oracle.

use std::path::Path;

use crate::corpus::synthetic::MarkerOracle;
use crate::corpus::{TokenSequence, Vocabulary, EOS_ID, UNK_ID};
use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::seq2seq::{train_seq2seq, EpochLog, Seq2SeqConfig, Seq2SeqModel};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded token bijection (reserved ids fixed) plus a deterministic
/// one-content-token left rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotCipher {
    map: Vec<usize>,
    inv: Vec<usize>,
}

impl PivotCipher {
    pub fn vocab_size(&self) -> usize {
        self.map.len()
    }

    pub fn map_of(&self, id: usize) -> usize {
        self.map[id]
    }

    /// Rotate the body left by one token, then substitute every id.
    pub fn apply(&self, seq: &TokenSequence) -> TokenSequence {
        let mut ids = seq.ids().to_vec();
        let body_len = seq.body().len();
        if body_len > 1 {
            ids[..body_len].rotate_left(1);
        }
        for id in ids.iter_mut() {
            *id = self.map[*id];
        }
        TokenSequence::new(ids, self.map.len()).expect("cipher keeps sequences valid")
    }

    /// Exact inverse of `apply`.
    pub fn invert(&self, seq: &TokenSequence) -> TokenSequence {
        let mut ids: Vec<usize> = seq.ids().iter().map(|&id| self.inv[id]).collect();
        let body_len = ids
            .iter()
            .position(|&id| id == EOS_ID)
            .unwrap_or(ids.len());
        if body_len > 1 {
            ids[..body_len].rotate_right(1);
        }
        TokenSequence::new(ids, self.map.len()).expect("cipher keeps sequences valid")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::from("v1\n");
        for (src, dst) in self.map.iter().enumerate() {
            text.push_str(&format!("{src}\t{dst}\n"));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut lines = text.lines();
        match lines.next() {
            Some("v1") => {}
            other => {
                return Err(Error::Invalid(format!(
                    "cipher file {}: bad version line {:?}",
                    path.display(),
                    other
                )))
            }
        }
        let mut map = Vec::new();
        for (i, line) in lines.enumerate() {
            let (src, dst) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                path: path.display().to_string(),
                line: i + 2,
                detail: "expected src<TAB>dst".into(),
            })?;
            let src: usize = src.parse().map_err(|_| Error::MalformedLine {
                path: path.display().to_string(),
                line: i + 2,
                detail: "bad source id".into(),
            })?;
            if src != map.len() {
                return Err(Error::MalformedLine {
                    path: path.display().to_string(),
                    line: i + 2,
                    detail: "source ids must be dense and ordered".into(),
                });
            }
            map.push(dst.parse().map_err(|_| Error::MalformedLine {
                path: path.display().to_string(),
                line: i + 2,
                detail: "bad destination id".into(),
            })?);
        }
        build_cipher(map)
    }
}

fn build_cipher(map: Vec<usize>) -> Result<PivotCipher> {
    let n = map.len();
    let mut inv = vec![usize::MAX; n];
    for (src, &dst) in map.iter().enumerate() {
        if dst >= n || inv[dst] != usize::MAX {
            return Err(Error::Invalid("cipher map is not a bijection".into()));
        }
        inv[dst] = src;
    }
    for reserved in 0..=UNK_ID {
        if map[reserved] != reserved {
            return Err(Error::Invalid("cipher must fix reserved ids".into()));
        }
    }
    Ok(PivotCipher { map, inv })
}

/// Seeded bijection over the vocabulary with reserved ids fixed.
pub fn make_cipher(vocab: &Vocabulary, seed: u64) -> PivotCipher {
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let n = vocab.len();
    let mut targets: Vec<usize> = (UNK_ID + 1..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xc1fe);
    targets.shuffle(&mut rng);
    let mut map: Vec<usize> = (0..=UNK_ID).collect();
    map.extend(targets);
    build_cipher(map).expect("construction yields a bijection")
}

/// The style-free content representation of a sentence: the encoder's
/// final state plus its per-position outputs.
#[derive(Debug, Clone)]
pub struct LatentContent {
    pub final_state: Vec<f64>,
    pub per_position: Tensor,
}

/// Train the two pivot translators, teacher-forced and early-stopped on
/// dev exact-match.
///
/// Plain mode (`strip: None`): `fwd` learns (x -> cipher(x)) and `bwd`
/// the inverse. With a marker oracle the pivot side is style-free: the
/// `fwd` target becomes `cipher(strip(x))` — the pivot cannot express
/// the marker tokens — while `bwd` trains on a seeded half-and-half mix
/// of faithful pairs and stripped-consistent pairs, so it reproduces
/// styled sentences exactly yet passes style-free pivot text through
/// unchanged.
pub fn train_pivot_translators(
    sentences: &[&TokenSequence],
    dev_sentences: &[&TokenSequence],
    cipher: &PivotCipher,
    cfg: &Seq2SeqConfig,
    vocab: &Vocabulary,
    strip: Option<&MarkerOracle>,
    mut on_epoch: impl FnMut(&str, &EpochLog),
) -> Result<(Seq2SeqModel, Seq2SeqModel)> {
    if sentences.len() < 1000 {
        return Err(Error::Invalid(format!(
            "pivot training needs at least 1000 sentences, got {}",
            sentences.len()
        )));
    }
    let v = vocab.len();
    let fwd_pairs: Vec<(TokenSequence, TokenSequence)> = sentences
        .iter()
        .map(|s| {
            let pivot_side = match strip {
                Some(oracle) => cipher.apply(&oracle.strip_markers(s, v)),
                None => cipher.apply(s),
            };
            ((*s).clone(), pivot_side)
        })
        .collect();
    let fwd_dev: Vec<(TokenSequence, TokenSequence)> = dev_sentences
        .iter()
        .map(|s| {
            let pivot_side = match strip {
                Some(oracle) => cipher.apply(&oracle.strip_markers(s, v)),
                None => cipher.apply(s),
            };
            ((*s).clone(), pivot_side)
        })
        .collect();

    let bwd_pairs: Vec<(TokenSequence, TokenSequence)> = match strip {
        None => sentences
            .iter()
            .map(|s| (cipher.apply(s), (*s).clone()))
            .collect(),
        Some(oracle) => {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5712);
            sentences
                .iter()
                .map(|s| {
                    if rng.random_range(0.0..1.0) < 0.5 {
                        let stripped = oracle.strip_markers(s, v);
                        (cipher.apply(&stripped), stripped)
                    } else {
                        (cipher.apply(s), (*s).clone())
                    }
                })
                .collect()
        }
    };
    // the bwd dev target is always the faithful inverse: that is the
    // exact-match the acceptance gate measures
    let bwd_dev: Vec<(TokenSequence, TokenSequence)> = dev_sentences
        .iter()
        .map(|s| (cipher.apply(s), (*s).clone()))
        .collect();

    let fwd = train_seq2seq(&fwd_pairs, &fwd_dev, cfg, vocab, None, |log| {
        on_epoch("fwd", log)
    })?;
    let mut bwd_cfg = cfg.clone();
    bwd_cfg.seed = cfg.seed.wrapping_add(1);
    let bwd = train_seq2seq(&bwd_pairs, &bwd_dev, &bwd_cfg, vocab, None, |log| {
        on_epoch("bwd", log)
    })?;
    Ok((fwd, bwd))
}

/// Round trip through the pivot: greedy decode into the pivot language,
/// then greedy decode back.
pub fn back_translate(
    x: &TokenSequence,
    fwd: &Seq2SeqModel,
    bwd: &Seq2SeqModel,
) -> Result<TokenSequence> {
    let pivot = fwd.greedy(x)?;
    bwd.greedy(&pivot)
}

/// Encode a sentence with the back-translator's encoder (the content
/// encoder of the whole system).
pub fn encode_latent(d: &TokenSequence, bwd: &Seq2SeqModel) -> Result<LatentContent> {
    let enc = bwd.encode(d)?;
    Ok(LatentContent {
        final_state: enc.final_state,
        per_position: enc.per_position,
    })
}
