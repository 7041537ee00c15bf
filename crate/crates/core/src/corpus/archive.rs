//! On-disk corpus archive: a directory holding a `meta` file (key=value
//! lines) and one token-id file per split. Each split line is the
//! space-separated id sequence with the class label as a trailing
//! tab-separated field.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{Split, StyleAttribute, StyledCorpus, TokenSequence};
use crate::error::{Error, Result};
use crate::kvcfg;

pub const META_FILE: &str = "meta";

pub fn write_archive(
    dir: &Path,
    corpus: &StyledCorpus,
    extra_meta: &BTreeMap<String, String>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut meta = extra_meta.clone();
    meta.insert("attribute".into(), corpus.attribute.name.clone());
    meta.insert("class0".into(), corpus.attribute.class0_label.clone());
    meta.insert("class1".into(), corpus.attribute.class1_label.clone());
    for split in Split::ALL {
        for class in [0u8, 1] {
            meta.insert(
                format!("count_{split}_{class}"),
                corpus.count(split, class).to_string(),
            );
        }
    }
    let meta_path = dir.join(META_FILE);
    std::fs::write(&meta_path, kvcfg::to_canonical_text(&meta))
        .map_err(|e| Error::io(meta_path.display().to_string(), e))?;

    for split in Split::ALL {
        let mut text = String::new();
        for s in corpus.sentences.iter().filter(|s| s.split == split) {
            let ids: Vec<String> = s.seq.ids().iter().map(|id| id.to_string()).collect();
            text.push_str(&ids.join(" "));
            text.push('\t');
            text.push_str(&s.class.to_string());
            text.push('\n');
        }
        let path = dir.join(format!("{split}.ids"));
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn read_archive(
    dir: &Path,
    vocab_size: usize,
) -> Result<(StyledCorpus, BTreeMap<String, String>)> {
    let meta_path = dir.join(META_FILE);
    let meta_text = std::fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    let meta = kvcfg::parse(&meta_text)?;
    let need = |key: &str| -> Result<String> {
        meta.get(key)
            .cloned()
            .ok_or_else(|| Error::Config(format!("archive meta missing `{key}`")))
    };
    let attribute = StyleAttribute::new(
        &need("attribute")?,
        &need("class0")?,
        &need("class1")?,
    )?;
    let mut corpus = StyledCorpus::new(attribute);
    for split in Split::ALL {
        let path = dir.join(format!("{split}.ids"));
        let text =
            std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (ids_part, class_part) =
                line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                    path: path.display().to_string(),
                    line: i + 1,
                    detail: "missing class field".into(),
                })?;
            let ids: Vec<usize> = ids_part
                .split(' ')
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Error::MalformedLine {
                        path: path.display().to_string(),
                        line: i + 1,
                        detail: format!("bad token id `{t}`"),
                    })
                })
                .collect::<Result<_>>()?;
            let class: u8 = class_part.parse().map_err(|_| Error::MalformedLine {
                path: path.display().to_string(),
                line: i + 1,
                detail: format!("bad class `{class_part}`"),
            })?;
            corpus.push(TokenSequence::new(ids, vocab_size)?, class, split)?;
        }
    }
    Ok((corpus, meta))
}
