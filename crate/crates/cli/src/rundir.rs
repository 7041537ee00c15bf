//! Run-directory layout and the per-directory lock.
//!
//! ```text
//! run/
//!   config                  resolved key=value config + hash
//!   vocab.txt
//!   markers.json            synthetic marker oracle (synthetic runs)
//!   corpus1/ corpus2/       archives (meta + per-split id files + audit.json)
//!   pivot/                  cipher.tsv, fwd.ckpt, bwd.ckpt, losses.csv
//!   classifiers/            clf{1,2}.ckpt + .json, evalclf{1,2}.ckpt + .json
//!   stms-<name>/            config, losses.csv, epoch-N.ckpt, final.ckpt
//!   seq2seq-<name>/         model.ckpt, losses.csv
//!   transfers/ reports/
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use stms_core::classifiers::StyleClassifier;
use stms_core::corpus::synthetic::MarkerOracle;
use stms_core::corpus::{archive, StyledCorpus, Vocabulary};
use stms_core::error::{Error, Result};
use stms_core::evaluation::EvalClassifier;
use stms_core::normalizer::PivotCipher;
use stms_core::seq2seq::Seq2SeqModel;
use stms_core::stms::StmsModel;

pub struct RunDir {
    pub root: PathBuf,
    _lock: LockGuard,
}

struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl RunDir {
    /// Create (if needed) and lock the run directory. A second command on
    /// the same directory fails until the first completes.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root.display().to_string(), e))?;
        let lock_path = root.join(".lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock_path)
        {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Config(format!(
                    "run directory {} is locked by another command (remove {} if stale)",
                    root.display(),
                    lock_path.display()
                )));
            }
            Err(e) => return Err(Error::io(lock_path.display().to_string(), e)),
        }
        Ok(RunDir {
            root: root.to_path_buf(),
            _lock: LockGuard { path: lock_path },
        })
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.root.join("vocab.txt")
    }

    pub fn markers_path(&self) -> PathBuf {
        self.root.join("markers.json")
    }

    pub fn corpus_dir(&self, n: usize) -> PathBuf {
        self.root.join(format!("corpus{n}"))
    }

    pub fn pivot_dir(&self) -> PathBuf {
        self.root.join("pivot")
    }

    pub fn classifiers_dir(&self) -> PathBuf {
        self.root.join("classifiers")
    }

    pub fn stms_dir(&self, name: &str) -> PathBuf {
        self.root.join(format!("stms-{name}"))
    }

    pub fn seq2seq_dir(&self, name: &str) -> PathBuf {
        self.root.join(format!("seq2seq-{name}"))
    }

    pub fn transfers_dir(&self) -> PathBuf {
        self.root.join("transfers")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn load_vocab(&self) -> Result<Vocabulary> {
        Vocabulary::load(&self.vocab_path())
    }

    pub fn load_corpus(&self, n: usize, vocab: &Vocabulary) -> Result<StyledCorpus> {
        let (corpus, _) = archive::read_archive(&self.corpus_dir(n), vocab.len())?;
        Ok(corpus)
    }

    pub fn load_markers(&self) -> Result<MarkerOracle> {
        let text = fs::read_to_string(self.markers_path())
            .map_err(|e| Error::io(self.markers_path().display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("markers.json: {e}")))
    }

    pub fn load_pivot(&self) -> Result<(Seq2SeqModel, Seq2SeqModel, PivotCipher)> {
        let dir = self.pivot_dir();
        let fwd = Seq2SeqModel::load(&dir.join("fwd.ckpt"))?;
        let bwd = Seq2SeqModel::load(&dir.join("bwd.ckpt"))?;
        let cipher = PivotCipher::load(&dir.join("cipher.tsv"))?;
        Ok((fwd, bwd, cipher))
    }

    pub fn load_classifier(&self, n: usize) -> Result<StyleClassifier> {
        let dir = self.classifiers_dir();
        StyleClassifier::load(
            &dir.join(format!("clf{n}.ckpt")),
            &dir.join(format!("clf{n}.json")),
        )
    }

    pub fn load_eval_classifier(&self, n: usize) -> Result<EvalClassifier> {
        let dir = self.classifiers_dir();
        EvalClassifier::load(
            &dir.join(format!("evalclf{n}.ckpt")),
            &dir.join(format!("evalclf{n}.json")),
        )
    }

    pub fn load_stms(&self, name: &str) -> Result<StmsModel> {
        StmsModel::load(&self.stms_dir(name).join("final.ckpt"))
    }

    pub fn load_seq2seq(&self, name: &str) -> Result<Seq2SeqModel> {
        Seq2SeqModel::load(&self.seq2seq_dir(name).join("model.ckpt"))
    }
}

/// Epoch-log CSV shared by the non-fusion training stages.
pub fn write_epoch_csv(path: &Path, rows: &[(String, usize, f64, f64, f64)]) -> Result<()> {
    let mut text = String::from("stage,epoch,train_loss,dev_metric,lr\n");
    for (stage, epoch, train_loss, dev_metric, lr) in rows {
        text.push_str(&format!("{stage},{epoch},{train_loss},{dev_metric},{lr}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
