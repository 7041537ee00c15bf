//! Synthetic styled corpora with known ground truth.
//!
//! Content is a strided run through a shared content vocabulary (so the
//! sequence models can learn it without rote memorization), and style is
//! carried entirely by marker tokens inserted at random positions: each
//! sentence gets one marker of its own attribute's class and one marker
//! of the other attribute. The other-attribute class is where the mutual
//! bias lives: in the attribute-1 corpus it is class 1 with probability
//! `bias_rate`, while the attribute-2 corpus draws it uniformly.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    assign_splits, build_vocab, tokenize, SplitRatios, StyleAttribute, StyledCorpus,
    TokenSequence, Vocabulary,
};
use crate::error::{Error, Result};
use crate::kvcfg;

#[derive(Debug, Clone)]
pub struct SyntheticStyleSpec {
    pub seed: u64,
    /// Size of the shared content vocabulary.
    pub content_vocab: usize,
    /// Content tokens per sentence (inclusive range, markers excluded).
    pub len_min: usize,
    pub len_max: usize,
    /// Per-attribute probability that a sentence carries a marker.
    pub marker_rate: f64,
    /// Probability that a sentence of the attribute-1 corpus carries an
    /// attribute-2 *class-1* marker (the mutual bias).
    pub bias_rate: f64,
    pub attr1: StyleAttribute,
    pub attr2: StyleAttribute,
    /// Marker token strings, indexed [attribute][class].
    pub markers: [[Vec<String>; 2]; 2],
}

pub const DEFAULT_MARKERS_PER_CLASS: usize = 4;

impl SyntheticStyleSpec {
    /// The committed desk-scale benchmark: V ≈ 300 with 280 content
    /// words, 16 markers and the 4 reserved ids.
    pub fn default_benchmark() -> Self {
        let attr1 = StyleAttribute::new("gender", "male", "female").unwrap();
        let attr2 = StyleAttribute::new("formality", "formal", "informal").unwrap();
        let markers = [
            [
                default_markers(&attr1.class0_label),
                default_markers(&attr1.class1_label),
            ],
            [
                default_markers(&attr2.class0_label),
                default_markers(&attr2.class1_label),
            ],
        ];
        SyntheticStyleSpec {
            seed: 17,
            content_vocab: 280,
            len_min: 8,
            len_max: 14,
            marker_rate: 1.0,
            bias_rate: 0.881,
            attr1,
            attr2,
            markers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.content_vocab == 0 {
            return Err(Error::Config("content_vocab must be positive".into()));
        }
        if self.len_min == 0 || self.len_min > self.len_max {
            return Err(Error::Config(format!(
                "bad content length range {}..{}",
                self.len_min, self.len_max
            )));
        }
        for (name, rate) in [("marker_rate", self.marker_rate), ("bias_rate", self.bias_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} {rate} outside [0,1]")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for set in self.markers.iter().flatten() {
            if set.is_empty() {
                return Err(Error::Config("every marker set needs tokens".into()));
            }
            for m in set {
                if !seen.insert(m.clone()) {
                    return Err(Error::Config(format!("marker `{m}` appears in two sets")));
                }
                if m.starts_with('w') && m[1..].chars().all(|c| c.is_ascii_digit()) {
                    return Err(Error::Config(format!(
                        "marker `{m}` collides with the content word pattern"
                    )));
                }
            }
        }
        Ok(())
    }

    pub const CONFIG_KEYS: [&'static str; 16] = [
        "seed",
        "content_vocab",
        "content_len_min",
        "content_len_max",
        "marker_rate",
        "bias_rate",
        "attr1_name",
        "attr1_class0",
        "attr1_class1",
        "attr2_name",
        "attr2_class0",
        "attr2_class1",
        "attr1_class0_markers",
        "attr1_class1_markers",
        "attr2_class0_markers",
        "attr2_class1_markers",
    ];

    /// Parse the key=value spec file; unknown keys are an error and
    /// every omitted key falls back to the committed benchmark value.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let map = kvcfg::parse_checked(text, &Self::CONFIG_KEYS)?;
        let mut spec = Self::default_benchmark();
        if let Some(v) = kvcfg::get_parsed(&map, "seed")? {
            spec.seed = v;
        }
        if let Some(v) = kvcfg::get_parsed(&map, "content_vocab")? {
            spec.content_vocab = v;
        }
        if let Some(v) = kvcfg::get_parsed(&map, "content_len_min")? {
            spec.len_min = v;
        }
        if let Some(v) = kvcfg::get_parsed(&map, "content_len_max")? {
            spec.len_max = v;
        }
        if let Some(v) = kvcfg::get_parsed(&map, "marker_rate")? {
            spec.marker_rate = v;
        }
        if let Some(v) = kvcfg::get_parsed(&map, "bias_rate")? {
            spec.bias_rate = v;
        }
        let attr = |name: Option<String>, c0: Option<String>, c1: Option<String>,
                    base: &StyleAttribute| {
            StyleAttribute::new(
                &name.unwrap_or_else(|| base.name.clone()),
                &c0.unwrap_or_else(|| base.class0_label.clone()),
                &c1.unwrap_or_else(|| base.class1_label.clone()),
            )
        };
        spec.attr1 = attr(
            map.get("attr1_name").cloned(),
            map.get("attr1_class0").cloned(),
            map.get("attr1_class1").cloned(),
            &spec.attr1,
        )?;
        spec.attr2 = attr(
            map.get("attr2_name").cloned(),
            map.get("attr2_class0").cloned(),
            map.get("attr2_class1").cloned(),
            &spec.attr2,
        )?;
        spec.markers = [
            [
                marker_list(&map, "attr1_class0_markers", &spec.attr1.class0_label),
                marker_list(&map, "attr1_class1_markers", &spec.attr1.class1_label),
            ],
            [
                marker_list(&map, "attr2_class0_markers", &spec.attr2.class0_label),
                marker_list(&map, "attr2_class1_markers", &spec.attr2.class1_label),
            ],
        ];
        spec.validate()?;
        Ok(spec)
    }

    fn content_word(&self, idx: usize) -> String {
        format!("w{:03}", idx)
    }
}

fn default_markers(label: &str) -> Vec<String> {
    (0..DEFAULT_MARKERS_PER_CLASS)
        .map(|i| format!("{label}{i}"))
        .collect()
}

fn marker_list(
    map: &BTreeMap<String, String>,
    key: &str,
    label: &str,
) -> Vec<String> {
    match map.get(key) {
        Some(raw) => raw
            .split(',')
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect(),
        None => default_markers(label),
    }
}

// ----------------------------------------------------------- marker oracle

/// Ground-truth knowledge about which token ids are style markers.
/// Only synthetic corpora have one; it backs tests, audits and the
/// oracle pseudo-pair construction for the seq2seq baselines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerOracle {
    /// Marker token ids, indexed [attribute][class]; parallel arrays by
    /// marker index, so swapping a class keeps the marker index.
    pub ids: [[Vec<usize>; 2]; 2],
    /// The marker strings, for readability of dumps.
    pub tokens: [[Vec<String>; 2]; 2],
}

impl MarkerOracle {
    pub fn from_spec(spec: &SyntheticStyleSpec, vocab: &Vocabulary) -> Self {
        let resolve = |set: &Vec<String>| -> (Vec<usize>, Vec<String>) {
            let mut ids = Vec::new();
            let mut toks = Vec::new();
            for t in set {
                if let Some(id) = vocab.id(t) {
                    ids.push(id);
                    toks.push(t.clone());
                }
            }
            (ids, toks)
        };
        let mut ids: [[Vec<usize>; 2]; 2] = Default::default();
        let mut tokens: [[Vec<String>; 2]; 2] = Default::default();
        for a in 0..2 {
            for c in 0..2 {
                let (i, t) = resolve(&spec.markers[a][c]);
                ids[a][c] = i;
                tokens[a][c] = t;
            }
        }
        MarkerOracle { ids, tokens }
    }

    /// (attribute, class) of a marker id, if it is one.
    pub fn classify_id(&self, id: usize) -> Option<(usize, u8)> {
        for a in 0..2 {
            for c in 0..2u8 {
                if self.ids[a][c as usize].contains(&id) {
                    return Some((a, c));
                }
            }
        }
        None
    }

    pub fn count_markers(&self, seq: &TokenSequence, attr: usize, class: u8) -> usize {
        seq.ids()
            .iter()
            .filter(|&&id| self.ids[attr][class as usize].contains(&id))
            .count()
    }

    pub fn count_any_marker(&self, seq: &TokenSequence) -> usize {
        seq.ids()
            .iter()
            .filter(|&&id| self.classify_id(id).is_some())
            .count()
    }

    pub fn count_content(&self, seq: &TokenSequence) -> usize {
        seq.body()
            .iter()
            .filter(|&&id| id > crate::corpus::UNK_ID && self.classify_id(id).is_none())
            .count()
    }

    /// Remove every marker token; the content body always survives.
    pub fn strip_markers(&self, seq: &TokenSequence, vocab_size: usize) -> TokenSequence {
        let ids: Vec<usize> = seq
            .ids()
            .iter()
            .copied()
            .filter(|&id| self.classify_id(id).is_none())
            .collect();
        TokenSequence::new(ids, vocab_size).expect("content body survives stripping")
    }

    /// Swap every marker of `attr` to the same-index marker of the other
    /// class — the exact supervision for single-attribute transfer.
    pub fn swap_attr(&self, seq: &TokenSequence, attr: usize, vocab_size: usize) -> TokenSequence {
        let ids = seq
            .ids()
            .iter()
            .map(|&id| {
                for c in 0..2usize {
                    if let Some(pos) = self.ids[attr][c].iter().position(|&m| m == id) {
                        let other = &self.ids[attr][1 - c];
                        if pos < other.len() {
                            return other[pos];
                        }
                    }
                }
                id
            })
            .collect();
        TokenSequence::new(ids, vocab_size).expect("swap keeps sequences valid")
    }

    /// Among sentences carrying a marker of `attr`, the fraction whose
    /// marker is class 1 — the counting oracle for the mutual bias.
    pub fn class1_fraction(&self, seqs: &[&TokenSequence], attr: usize) -> f64 {
        let mut with_marker = 0usize;
        let mut class1 = 0usize;
        for seq in seqs {
            let c0 = self.count_markers(seq, attr, 0);
            let c1 = self.count_markers(seq, attr, 1);
            if c0 + c1 > 0 {
                with_marker += 1;
                if c1 > c0 {
                    class1 += 1;
                }
            }
        }
        if with_marker == 0 {
            0.0
        } else {
            class1 as f64 / with_marker as f64
        }
    }
}

// -------------------------------------------------------------- generation

#[derive(Debug)]
pub struct SyntheticBundle {
    pub vocab: Vocabulary,
    pub corpus1: StyledCorpus,
    pub corpus2: StyledCorpus,
    pub oracle: MarkerOracle,
}

/// Deterministic generation of the two styled corpora under the spec's
/// seed. `n_per_class` sentences per class per corpus.
pub fn generate_synthetic(
    spec: &SyntheticStyleSpec,
    n_per_class: usize,
    ratios: &SplitRatios,
    l_max: usize,
) -> Result<SyntheticBundle> {
    spec.validate()?;
    ratios.validate()?;
    if n_per_class == 0 {
        return Err(Error::Invalid("n_per_class must be at least 1".into()));
    }
    if spec.len_max + 3 > l_max {
        return Err(Error::Config(format!(
            "content_len_max {} plus markers exceeds l_max {}",
            spec.len_max, l_max
        )));
    }

    // raw sentence text per (corpus, class); duplicates are rejected
    // (seeded) so sentences cannot straddle split boundaries
    let mut raw: [[Vec<String>; 2]; 2] = Default::default();
    for corpus_idx in 0..2usize {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(corpus_idx as u64 + 1));
        let mut seen = std::collections::HashSet::new();
        for class in 0..2usize {
            for _ in 0..n_per_class {
                let mut sentence = generate_sentence(spec, corpus_idx, class as u8, &mut rng);
                for _ in 0..200 {
                    if seen.insert(sentence.clone()) {
                        break;
                    }
                    sentence = generate_sentence(spec, corpus_idx, class as u8, &mut rng);
                }
                raw[corpus_idx][class].push(sentence);
            }
        }
    }

    let all_text = raw.iter().flatten().flatten().map(|s| s.as_str());
    let vocab = build_vocab(all_text, 1, usize::MAX)?;
    let oracle = MarkerOracle::from_spec(spec, &vocab);

    let mut corpora = Vec::new();
    for (corpus_idx, attr) in [(0usize, &spec.attr1), (1usize, &spec.attr2)] {
        let mut corpus = StyledCorpus::new(attr.clone());
        for class in 0..2u8 {
            let sentences = &raw[corpus_idx][class as usize];
            let splits = assign_splits(
                sentences.len(),
                ratios,
                spec.seed ^ (corpus_idx as u64 * 2 + class as u64 + 11),
            );
            for (text, split) in sentences.iter().zip(splits) {
                corpus.push(tokenize(text, &vocab, l_max)?, class, split)?;
            }
        }
        corpora.push(corpus);
    }
    let corpus2 = corpora.pop().unwrap();
    let corpus1 = corpora.pop().unwrap();
    Ok(SyntheticBundle {
        vocab,
        corpus1,
        corpus2,
        oracle,
    })
}

fn generate_sentence(
    spec: &SyntheticStyleSpec,
    corpus_idx: usize,
    class: u8,
    rng: &mut ChaCha8Rng,
) -> String {
    let len = rng.random_range(spec.len_min..=spec.len_max);
    let start = rng.random_range(0..spec.content_vocab);
    let mut tokens: Vec<String> = (0..len)
        .map(|i| spec.content_word((start + i) % spec.content_vocab))
        .collect();

    // own-attribute marker near the front: the class label carrier.
    // Markers sit near the sentence edges so their recall load stays
    // small at desk scale; the class signal itself is positionless.
    let own_attr = corpus_idx;
    if rng.random_range(0.0..1.0) < spec.marker_rate {
        let set = &spec.markers[own_attr][class as usize];
        let marker = set[rng.random_range(0..set.len())].clone();
        let pos = rng.random_range(1..=2usize).min(tokens.len());
        tokens.insert(pos, marker);
    }

    // other-attribute marker near the back: biased in corpus 1,
    // uniform in corpus 2
    let other_attr = 1 - corpus_idx;
    if rng.random_range(0.0..1.0) < spec.marker_rate {
        let other_class: usize = if corpus_idx == 0 {
            if rng.random_range(0.0..1.0) < spec.bias_rate {
                1
            } else {
                0
            }
        } else {
            rng.random_range(0..2)
        };
        let set = &spec.markers[other_attr][other_class];
        let marker = set[rng.random_range(0..set.len())].clone();
        let back = rng.random_range(1..=2usize).min(tokens.len());
        let pos = tokens.len() - back;
        tokens.insert(pos, marker);
    }

    tokens.join(" ")
}
