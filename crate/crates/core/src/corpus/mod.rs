//! Corpus ingestion, tokenization, vocabulary construction, synthetic
//! styled-corpus generation, bias auditing and the bias rectifier.

pub mod archive;
pub mod synthetic;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Default cap on tokenized sentence length (EOS included).
pub const DEFAULT_L_MAX: usize = 24;

// ------------------------------------------------------------------- tokens

/// Ordered token ids for one sentence. Always non-empty; sentences built
/// by `tokenize` and by the decoders end with EOS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<usize>,
}

impl TokenSequence {
    pub fn new(ids: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptySentence);
        }
        for &id in &ids {
            if id >= vocab_size {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab: vocab_size,
                });
            }
        }
        Ok(TokenSequence { ids })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Tokens before the first EOS (the sentence body).
    pub fn body(&self) -> &[usize] {
        match self.ids.iter().position(|&id| id == EOS_ID) {
            Some(pos) => &self.ids[..pos],
            None => &self.ids,
        }
    }

    pub fn is_eos_only(&self) -> bool {
        self.ids.iter().all(|&id| id == EOS_ID)
    }

    /// Ids stripped of PAD/BOS/EOS, as used by the evaluation metrics.
    pub fn content_ids(&self) -> Vec<usize> {
        self.ids
            .iter()
            .copied()
            .filter(|&id| id != PAD_ID && id != BOS_ID && id != EOS_ID)
            .collect()
    }
}

// --------------------------------------------------------------- vocabulary

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for t in &self.tokens {
            text.push_str(t);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let tokens: Vec<String> = text.lines().map(|l| l.to_string()).collect();
        if tokens.len() < 4 || tokens[..4] != RESERVED.map(|s| s.to_string()) {
            return Err(Error::Invalid(format!(
                "vocabulary file {} lacks the reserved header",
                path.display()
            )));
        }
        Ok(Vocabulary::from_tokens(tokens))
    }

    /// SHA-256 over the serialized token list; stamps models so that
    /// checkpoints and corpora can be cross-checked.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        crate::nn::params::hex(&hasher.finalize())
    }
}

/// Lowercase and split into word/punctuation tokens: alphanumeric runs
/// stay together, every other non-whitespace character stands alone.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.to_lowercase().split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() {
                word.push(ch);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(ch.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Frequency-ordered vocabulary over raw sentence text. Ties break
/// lexicographically; the four reserved ids come first. `max_size` caps
/// the total size (reserved slots included).
pub fn build_vocab<'a, I>(texts: I, min_count: usize, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut saw_any = false;
    for text in texts {
        saw_any = true;
        for token in split_words(text) {
            if RESERVED.contains(&token.as_str()) {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    if !saw_any {
        return Err(Error::EmptyCorpus);
    }
    let mut entries: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    for (token, _) in entries {
        if tokens.len() >= max_size {
            break;
        }
        tokens.push(token);
    }
    Ok(Vocabulary::from_tokens(tokens))
}

/// Lowercased, whitespace/punctuation split, UNK-mapped, truncated to
/// `l_max` with EOS appended (so at most `l_max - 1` body tokens).
pub fn tokenize(text: &str, vocab: &Vocabulary, l_max: usize) -> Result<TokenSequence> {
    let words = split_words(text);
    if words.is_empty() {
        return Err(Error::EmptySentence);
    }
    let mut ids: Vec<usize> = words
        .iter()
        .map(|w| vocab.id(w).unwrap_or(UNK_ID))
        .collect();
    ids.truncate(l_max.saturating_sub(1));
    ids.push(EOS_ID);
    TokenSequence::new(ids, vocab.len())
}

/// Sentence body joined with single spaces (PAD/BOS skipped, EOS stops).
pub fn detokenize(seq: &TokenSequence, vocab: &Vocabulary) -> String {
    let mut parts = Vec::new();
    for &id in seq.ids() {
        if id == EOS_ID {
            break;
        }
        if id == PAD_ID || id == BOS_ID {
            continue;
        }
        parts.push(vocab.token(id).unwrap_or(RESERVED[UNK_ID]));
    }
    parts.join(" ")
}

// ------------------------------------------------------------------- styles

/// One binary style axis (e.g. a gender proxy or a formality proxy).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleAttribute {
    pub name: String,
    pub class0_label: String,
    pub class1_label: String,
}

impl StyleAttribute {
    pub fn new(name: &str, class0_label: &str, class1_label: &str) -> Result<Self> {
        if name.is_empty() || class0_label.is_empty() || class1_label.is_empty() {
            return Err(Error::Invalid("attribute labels must be non-empty".into()));
        }
        if class0_label == class1_label {
            return Err(Error::Invalid("attribute class labels must differ".into()));
        }
        Ok(StyleAttribute {
            name: name.to_string(),
            class0_label: class0_label.to_string(),
            class1_label: class1_label.to_string(),
        })
    }

    pub fn label(&self, class: u8) -> &str {
        if class == 0 {
            &self.class0_label
        } else {
            &self.class1_label
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Dev,
    Classifier,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Test, Split::Dev, Split::Classifier];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Dev => "dev",
            Split::Classifier => "classifier",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "dev" => Ok(Split::Dev),
            "classifier" => Ok(Split::Classifier),
            other => Err(Error::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fractions per split; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub dev: f64,
    pub classifier: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.50,
            test: 0.01,
            dev: 0.02,
            classifier: 0.47,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.test, self.dev, self.classifier];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Invalid("split ratios must lie in [0,1]".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSentence {
    pub seq: TokenSequence,
    pub class: u8,
    pub split: Split,
}

/// Labeled sentences for one style attribute, partitioned into
/// train/test/dev/classifier splits.
#[derive(Debug, Clone)]
pub struct StyledCorpus {
    pub attribute: StyleAttribute,
    pub sentences: Vec<CorpusSentence>,
}

impl StyledCorpus {
    pub fn new(attribute: StyleAttribute) -> Self {
        StyledCorpus {
            attribute,
            sentences: Vec::new(),
        }
    }

    pub fn push(&mut self, seq: TokenSequence, class: u8, split: Split) -> Result<()> {
        if class > 1 {
            return Err(Error::Invalid(format!("class {class} out of range")));
        }
        self.sentences.push(CorpusSentence { seq, class, split });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.sentences.iter().filter(|s| s.class == class).count()
    }

    pub fn count(&self, split: Split, class: u8) -> usize {
        self.sentences
            .iter()
            .filter(|s| s.split == split && s.class == class)
            .count()
    }

    /// Sentences of one split and class, in corpus order.
    pub fn seqs(&self, split: Split, class: u8) -> Vec<&TokenSequence> {
        self.sentences
            .iter()
            .filter(|s| s.split == split && s.class == class)
            .map(|s| &s.seq)
            .collect()
    }

    pub fn seqs_in_split(&self, split: Split) -> Vec<&TokenSequence> {
        self.sentences
            .iter()
            .filter(|s| s.split == split)
            .map(|s| &s.seq)
            .collect()
    }

    /// Sub-corpus holding only one split.
    pub fn filter_split(&self, split: Split) -> StyledCorpus {
        StyledCorpus {
            attribute: self.attribute.clone(),
            sentences: self
                .sentences
                .iter()
                .filter(|s| s.split == split)
                .cloned()
                .collect(),
        }
    }

    /// Replace all sentences of `split` with the sentences of `sub`
    /// (re-tagged to `split`). Order: untouched splits keep their
    /// positions, the replacement block is appended.
    pub fn replace_split(&self, split: Split, sub: &StyledCorpus) -> StyledCorpus {
        let mut sentences: Vec<CorpusSentence> = self
            .sentences
            .iter()
            .filter(|s| s.split != split)
            .cloned()
            .collect();
        for s in &sub.sentences {
            sentences.push(CorpusSentence {
                seq: s.seq.clone(),
                class: s.class,
                split,
            });
        }
        StyledCorpus {
            attribute: self.attribute.clone(),
            sentences,
        }
    }
}

// ---------------------------------------------------------------- ingestion

/// Deterministic split assignment: a seeded shuffle of the class indices,
/// then contiguous segments sized by cumulative rounding of the ratios.
pub fn assign_splits(n: usize, ratios: &SplitRatios, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let nf = n as f64;
    let c1 = (ratios.train * nf).round() as usize;
    let c2 = ((ratios.train + ratios.test) * nf).round() as usize;
    let c3 = ((ratios.train + ratios.test + ratios.dev) * nf).round() as usize;
    let mut splits = vec![Split::Train; n];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < c1 {
            Split::Train
        } else if rank < c2 {
            Split::Test
        } else if rank < c3 {
            Split::Dev
        } else {
            Split::Classifier
        };
    }
    splits
}

/// Read one UTF-8 sentence-per-line file per class and assemble a corpus.
/// Blank lines are skipped; invalid UTF-8 is reported with its line number.
pub fn load_class_files(
    path_class0: &Path,
    path_class1: &Path,
    attribute: StyleAttribute,
    vocab: &Vocabulary,
    ratios: &SplitRatios,
    seed: u64,
    l_max: usize,
) -> Result<StyledCorpus> {
    ratios.validate()?;
    let mut corpus = StyledCorpus::new(attribute);
    for (class, path) in [(0u8, path_class0), (1u8, path_class1)] {
        let seqs = read_sentence_file(path, vocab, l_max)?;
        let splits = assign_splits(seqs.len(), ratios, seed ^ (class as u64 + 1));
        for (seq, split) in seqs.into_iter().zip(splits) {
            corpus.push(seq, class, split)?;
        }
    }
    Ok(corpus)
}

pub fn read_sentence_file(
    path: &Path,
    vocab: &Vocabulary,
    l_max: usize,
) -> Result<Vec<TokenSequence>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut seqs = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        if raw.is_empty() {
            continue;
        }
        let line = std::str::from_utf8(raw).map_err(|e| Error::MalformedLine {
            path: path.display().to_string(),
            line: i + 1,
            detail: format!("invalid UTF-8: {e}"),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        seqs.push(tokenize(line, vocab, l_max)?);
    }
    Ok(seqs)
}

// ------------------------------------------------------------------- audits

/// Something that can assign a binary class to a sentence — in practice a
/// trained style classifier for the *other* attribute.
pub trait SentenceLabeler {
    fn label(&self, seq: &TokenSequence) -> u8;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassAudit {
    pub class: u8,
    pub label: String,
    pub count: usize,
    /// Fraction of sentences whose final body token is `!` / `.`.
    pub exclamation_final_rate: f64,
    pub period_final_rate: f64,
    /// Fraction labeled class 0 / class 1 by the cross-attribute
    /// classifier, when one was supplied. The two sum to 1.
    pub cross_proportions: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusAudit {
    pub attribute: String,
    pub per_class: Vec<ClassAudit>,
}

pub fn audit(
    corpus: &StyledCorpus,
    vocab: &Vocabulary,
    cross_classifier: Option<&dyn SentenceLabeler>,
) -> Result<CorpusAudit> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let exclaim = vocab.id("!");
    let period = vocab.id(".");
    let mut per_class = Vec::new();
    for class in [0u8, 1u8] {
        let members: Vec<&CorpusSentence> = corpus
            .sentences
            .iter()
            .filter(|s| s.class == class)
            .collect();
        let count = members.len();
        let mut n_exclaim = 0usize;
        let mut n_period = 0usize;
        let mut cross = [0usize; 2];
        for s in &members {
            if let Some(&last) = s.seq.body().last() {
                if Some(last) == exclaim {
                    n_exclaim += 1;
                }
                if Some(last) == period {
                    n_period += 1;
                }
            }
            if let Some(clf) = cross_classifier {
                cross[clf.label(&s.seq) as usize] += 1;
            }
        }
        let rate = |n: usize| if count == 0 { 0.0 } else { n as f64 / count as f64 };
        per_class.push(ClassAudit {
            class,
            label: corpus.attribute.label(class).to_string(),
            count,
            exclamation_final_rate: rate(n_exclaim),
            period_final_rate: rate(n_period),
            cross_proportions: cross_classifier
                .map(|_| [rate(cross[0]), rate(cross[1])]),
        });
    }
    Ok(CorpusAudit {
        attribute: corpus.attribute.name.clone(),
        per_class,
    })
}

// ----------------------------------------------------------- bias rectifier

/// Within each class, label every sentence with the cross-attribute
/// classifier and duplicate (seeded, with replacement) members of the
/// smaller cross-label group until both groups match. All original
/// sentences are retained; duplicates are appended class 0 first.
pub fn bias_rectify(
    corpus: &StyledCorpus,
    cross_classifier: &dyn SentenceLabeler,
    seed: u64,
) -> Result<StyledCorpus> {
    let mut out = corpus.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in [0u8, 1u8] {
        let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, s) in corpus.sentences.iter().enumerate() {
            if s.class == class {
                groups[cross_classifier.label(&s.seq) as usize].push(i);
            }
        }
        if groups[0].is_empty() || groups[1].is_empty() {
            return Err(Error::EmptyMinority { class });
        }
        let (minority, majority) = if groups[0].len() < groups[1].len() {
            (&groups[0], &groups[1])
        } else {
            (&groups[1], &groups[0])
        };
        let deficit = majority.len() - minority.len();
        for _ in 0..deficit {
            let pick = minority[rng.random_range(0..minority.len())];
            out.sentences.push(corpus.sentences[pick].clone());
        }
    }
    Ok(out)
}
