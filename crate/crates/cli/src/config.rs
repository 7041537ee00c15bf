//! Run configuration: one key=value file covering every pipeline stage,
//! merged with command-line overrides. Unknown keys are errors; every
//! artifact records the hash of the resolved config that produced it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use stms_core::classifiers::ClassifierConfig;
use stms_core::corpus::SplitRatios;
use stms_core::error::{Error, Result};
use stms_core::evaluation::{EvalClassifierConfig, StrengthMode};
use stms_core::kvcfg;
use stms_core::seq2seq::Seq2SeqConfig;
use stms_core::stms::StmsConfig;

pub const CONFIG_KEYS: [&str; 44] = [
    "seed",
    "l_max",
    "n_per_class",
    "split_train",
    "split_test",
    "split_dev",
    "split_classifier",
    "strength_mode",
    "embeddings_file",
    "pivot_d_embed",
    "pivot_d_hidden",
    "pivot_lr",
    "pivot_lr_decay",
    "pivot_clip",
    "pivot_batch",
    "pivot_epochs",
    "pivot_init_range",
    "pivot_target_exact",
    "pivot_min_exact",
    "pivot_style_strip",
    "clf_d_embed",
    "clf_filters",
    "clf_lr",
    "clf_lr_decay",
    "clf_clip",
    "clf_batch",
    "clf_epochs",
    "clf_init_range",
    "clf_target_accuracy",
    "clf_min_accuracy",
    "evalclf_d_embed",
    "evalclf_d_hidden",
    "evalclf_lr",
    "evalclf_batch",
    "evalclf_epochs",
    "evalclf_min_accuracy",
    "stms_d_embed",
    "stms_d_hidden",
    "stms_lr",
    "stms_batch",
    "stms_epochs",
    "stms_alpha",
    "stms_beta",
    "seq2seq_epochs",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub l_max: usize,
    pub n_per_class: usize,
    pub ratios: SplitRatios,
    pub strength_mode: StrengthMode,
    pub embeddings_file: Option<PathBuf>,
    pub pivot: Seq2SeqConfig,
    pub pivot_style_strip: bool,
    pub clf: ClassifierConfig,
    pub evalclf: EvalClassifierConfig,
    pub stms: StmsConfig,
    pub seq2seq_epochs: usize,
    /// The resolved key=value text (canonical) and its hash.
    pub resolved: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pivot = Seq2SeqConfig {
            d_embed: 32,
            d_hidden: 64,
            lr: 4.0,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 8,
            max_epochs: 10,
            seed: 1,
            init_range: 0.25,
            target_exact: 0.95,
            min_exact: 0.5,
            l_max: 24,
        };
        let clf = ClassifierConfig {
            d_embed: 16,
            n_filters: 64,
            lr: 0.5,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 32,
            max_epochs: 4,
            seed: 2,
            init_range: 0.2,
            target_accuracy: 0.995,
            min_accuracy: 0.7,
        };
        let evalclf = EvalClassifierConfig {
            d_embed: 16,
            d_hidden: 24,
            lr: 2.0,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 16,
            max_epochs: 5,
            seed: 3,
            init_range: 0.2,
            target_accuracy: 0.995,
            min_accuracy: 0.7,
        };
        let stms = StmsConfig {
            d_embed: 24,
            d_hidden: 48,
            l_max: 24,
            lr: 2.0,
            lr_decay: 0.5,
            clip_norm: 5.0,
            batch_size: 8,
            max_epochs: 3,
            seed: 4,
            init_range: 0.25,
        };
        RunConfig {
            seed: 17,
            l_max: 24,
            n_per_class: 5000,
            ratios: SplitRatios::default(),
            strength_mode: StrengthMode::MeanProb,
            embeddings_file: None,
            pivot,
            pivot_style_strip: true,
            clf,
            evalclf,
            stms,
            seq2seq_epochs: 10,
            resolved: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: Option<&Path>, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::io(p.display().to_string(), e))?;
                kvcfg::parse_checked(&text, &CONFIG_KEYS)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(map)
    }

    fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let get_u64 = |key: &str| kvcfg::get_parsed::<u64>(&map, key);
        let get_usize = |key: &str| kvcfg::get_parsed::<usize>(&map, key);
        let get_f64 = |key: &str| kvcfg::get_parsed::<f64>(&map, key);

        if let Some(v) = get_u64("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = get_usize("l_max")? {
            cfg.l_max = v;
        }
        if let Some(v) = get_usize("n_per_class")? {
            cfg.n_per_class = v;
        }
        if let Some(v) = get_f64("split_train")? {
            cfg.ratios.train = v;
        }
        if let Some(v) = get_f64("split_test")? {
            cfg.ratios.test = v;
        }
        if let Some(v) = get_f64("split_dev")? {
            cfg.ratios.dev = v;
        }
        if let Some(v) = get_f64("split_classifier")? {
            cfg.ratios.classifier = v;
        }
        cfg.ratios.validate()?;
        if let Some(v) = map.get("strength_mode") {
            cfg.strength_mode = StrengthMode::parse(v)?;
        }
        if let Some(v) = map.get("embeddings_file") {
            cfg.embeddings_file = Some(PathBuf::from(v));
        }

        if let Some(v) = get_usize("pivot_d_embed")? {
            cfg.pivot.d_embed = v;
        }
        if let Some(v) = get_usize("pivot_d_hidden")? {
            cfg.pivot.d_hidden = v;
        }
        if let Some(v) = get_f64("pivot_lr")? {
            cfg.pivot.lr = v;
        }
        if let Some(v) = get_f64("pivot_lr_decay")? {
            cfg.pivot.lr_decay = v;
        }
        if let Some(v) = get_f64("pivot_clip")? {
            cfg.pivot.clip_norm = v;
        }
        if let Some(v) = get_usize("pivot_batch")? {
            cfg.pivot.batch_size = v;
        }
        if let Some(v) = get_usize("pivot_epochs")? {
            cfg.pivot.max_epochs = v;
        }
        if let Some(v) = get_f64("pivot_init_range")? {
            cfg.pivot.init_range = v;
        }
        if let Some(v) = get_f64("pivot_target_exact")? {
            cfg.pivot.target_exact = v;
        }
        if let Some(v) = get_f64("pivot_min_exact")? {
            cfg.pivot.min_exact = v;
        }
        if let Some(v) = map.get("pivot_style_strip") {
            cfg.pivot_style_strip = match v.as_str() {
                "true" | "1" => true,
                "false" | "0" => false,
                other => {
                    return Err(Error::Config(format!(
                        "pivot_style_strip: expected true/false, got `{other}`"
                    )))
                }
            };
        }

        if let Some(v) = get_usize("clf_d_embed")? {
            cfg.clf.d_embed = v;
        }
        if let Some(v) = get_usize("clf_filters")? {
            cfg.clf.n_filters = v;
        }
        if let Some(v) = get_f64("clf_lr")? {
            cfg.clf.lr = v;
        }
        if let Some(v) = get_f64("clf_lr_decay")? {
            cfg.clf.lr_decay = v;
        }
        if let Some(v) = get_f64("clf_clip")? {
            cfg.clf.clip_norm = v;
        }
        if let Some(v) = get_usize("clf_batch")? {
            cfg.clf.batch_size = v;
        }
        if let Some(v) = get_usize("clf_epochs")? {
            cfg.clf.max_epochs = v;
        }
        if let Some(v) = get_f64("clf_init_range")? {
            cfg.clf.init_range = v;
        }
        if let Some(v) = get_f64("clf_target_accuracy")? {
            cfg.clf.target_accuracy = v;
        }
        if let Some(v) = get_f64("clf_min_accuracy")? {
            cfg.clf.min_accuracy = v;
        }

        if let Some(v) = get_usize("evalclf_d_embed")? {
            cfg.evalclf.d_embed = v;
        }
        if let Some(v) = get_usize("evalclf_d_hidden")? {
            cfg.evalclf.d_hidden = v;
        }
        if let Some(v) = get_f64("evalclf_lr")? {
            cfg.evalclf.lr = v;
        }
        if let Some(v) = get_usize("evalclf_batch")? {
            cfg.evalclf.batch_size = v;
        }
        if let Some(v) = get_usize("evalclf_epochs")? {
            cfg.evalclf.max_epochs = v;
        }
        if let Some(v) = get_f64("evalclf_min_accuracy")? {
            cfg.evalclf.min_accuracy = v;
        }

        if let Some(v) = get_usize("stms_d_embed")? {
            cfg.stms.d_embed = v;
        }
        if let Some(v) = get_usize("stms_d_hidden")? {
            cfg.stms.d_hidden = v;
        }
        if let Some(v) = get_f64("stms_lr")? {
            cfg.stms.lr = v;
        }
        if let Some(v) = get_usize("stms_batch")? {
            cfg.stms.batch_size = v;
        }
        if let Some(v) = get_usize("stms_epochs")? {
            cfg.stms.max_epochs = v;
        }
        if let Some(v) = get_usize("seq2seq_epochs")? {
            cfg.seq2seq_epochs = v;
        }
        // stms_alpha / stms_beta are read by the train command; they stay
        // in the resolved map (with defaults) so the hash covers them
        let mut resolved = map;
        resolved.entry("stms_alpha".into()).or_insert("1".into());
        resolved.entry("stms_beta".into()).or_insert("1".into());
        get_f64("stms_alpha")?;
        get_f64("stms_beta")?;

        // derive per-stage seeds from the master seed unless pinned
        cfg.pivot.seed = cfg.seed.wrapping_mul(31).wrapping_add(1);
        cfg.clf.seed = cfg.seed.wrapping_mul(31).wrapping_add(2);
        cfg.evalclf.seed = cfg.seed.wrapping_mul(31).wrapping_add(3);
        cfg.stms.seed = cfg.seed.wrapping_mul(31).wrapping_add(4);
        cfg.pivot.l_max = cfg.l_max;
        cfg.stms.l_max = cfg.l_max;

        cfg.resolved = resolved;
        Ok(cfg)
    }

    pub fn alpha(&self) -> f64 {
        self.resolved
            .get("stms_alpha")
            .and_then(|v| v.parse().ok())
            .unwrap_or(1.0)
    }

    pub fn beta(&self) -> f64 {
        self.resolved
            .get("stms_beta")
            .and_then(|v| v.parse().ok())
            .unwrap_or(1.0)
    }

    /// Canonical text of the resolved configuration (defaults filled in
    /// for every key, sorted), the input to the config hash.
    pub fn canonical_text(&self) -> String {
        let mut full = self.resolved.clone();
        let mut put = |k: &str, v: String| {
            full.entry(k.to_string()).or_insert(v);
        };
        put("seed", self.seed.to_string());
        put("l_max", self.l_max.to_string());
        put("n_per_class", self.n_per_class.to_string());
        put("split_train", self.ratios.train.to_string());
        put("split_test", self.ratios.test.to_string());
        put("split_dev", self.ratios.dev.to_string());
        put("split_classifier", self.ratios.classifier.to_string());
        put(
            "strength_mode",
            match self.strength_mode {
                StrengthMode::MeanProb => "mean_prob".into(),
                StrengthMode::Fraction => "fraction".into(),
            },
        );
        put("pivot_d_embed", self.pivot.d_embed.to_string());
        put("pivot_d_hidden", self.pivot.d_hidden.to_string());
        put("pivot_lr", self.pivot.lr.to_string());
        put("pivot_lr_decay", self.pivot.lr_decay.to_string());
        put("pivot_clip", self.pivot.clip_norm.to_string());
        put("pivot_batch", self.pivot.batch_size.to_string());
        put("pivot_epochs", self.pivot.max_epochs.to_string());
        put("pivot_init_range", self.pivot.init_range.to_string());
        put("pivot_target_exact", self.pivot.target_exact.to_string());
        put("pivot_min_exact", self.pivot.min_exact.to_string());
        put("pivot_style_strip", self.pivot_style_strip.to_string());
        put("clf_d_embed", self.clf.d_embed.to_string());
        put("clf_filters", self.clf.n_filters.to_string());
        put("clf_lr", self.clf.lr.to_string());
        put("clf_lr_decay", self.clf.lr_decay.to_string());
        put("clf_clip", self.clf.clip_norm.to_string());
        put("clf_batch", self.clf.batch_size.to_string());
        put("clf_epochs", self.clf.max_epochs.to_string());
        put("clf_init_range", self.clf.init_range.to_string());
        put("clf_target_accuracy", self.clf.target_accuracy.to_string());
        put("clf_min_accuracy", self.clf.min_accuracy.to_string());
        put("evalclf_d_embed", self.evalclf.d_embed.to_string());
        put("evalclf_d_hidden", self.evalclf.d_hidden.to_string());
        put("evalclf_lr", self.evalclf.lr.to_string());
        put("evalclf_batch", self.evalclf.batch_size.to_string());
        put("evalclf_epochs", self.evalclf.max_epochs.to_string());
        put(
            "evalclf_min_accuracy",
            self.evalclf.min_accuracy.to_string(),
        );
        put("stms_d_embed", self.stms.d_embed.to_string());
        put("stms_d_hidden", self.stms.d_hidden.to_string());
        put("stms_lr", self.stms.lr.to_string());
        put("stms_batch", self.stms.batch_size.to_string());
        put("stms_epochs", self.stms.max_epochs.to_string());
        put("seq2seq_epochs", self.seq2seq_epochs.to_string());
        kvcfg::to_canonical_text(&full)
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        stms_core::nn::params::hex(&digest)[..16].to_string()
    }
}
