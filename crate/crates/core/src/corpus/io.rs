//! Corpus files: pretty-printed JSON, one section per block. Entry vectors
//! are base64 of little-endian `f32`, so files round-trip bit-exactly.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BlockCorpus, CorpusEntry, CorpusError, EntryKind, Metric, Provenance, RetrievalCorpus};

pub const CORPUS_FORMAT: &str = "ncb-corpus";
pub const CORPUS_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    format: String,
    schema_version: u32,
    version: u64,
    block_dim: usize,
    metric: Metric,
    provenance: Provenance,
    blocks: Vec<BlockSection>,
}

#[derive(Serialize, Deserialize)]
struct BlockSection {
    block: usize,
    n_concepts: u32,
    #[serde(default)]
    deleted_to_single: bool,
    #[serde(default)]
    empty_fit: bool,
    #[serde(default)]
    zeroed: BTreeSet<u32>,
    entries: Vec<EntryRecord>,
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    l: usize,
    #[serde(flatten)]
    body: EntryBody,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntryBody {
    Live {
        concept: u32,
        kind: EntryKind,
        enc: String,
    },
    Removed {
        removed: bool,
    },
}

pub(crate) fn encode_vector(v: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(v.len() * 4);
    for x in v {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub(crate) fn decode_vector(s: &str) -> Result<Vec<f32>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 4 != 0 {
        return Err(format!("{} bytes is not a whole number of f32", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn to_json(corpus: &RetrievalCorpus) -> String {
    let file = CorpusFile {
        format: CORPUS_FORMAT.to_owned(),
        schema_version: CORPUS_SCHEMA_VERSION,
        version: corpus.version,
        block_dim: corpus.block_dim,
        metric: corpus.metric,
        provenance: corpus.provenance.clone(),
        blocks: corpus
            .blocks
            .iter()
            .enumerate()
            .map(|(j, b)| BlockSection {
                block: j,
                n_concepts: b.n_concepts,
                deleted_to_single: b.deleted_to_single,
                empty_fit: b.empty_fit,
                zeroed: b.zeroed.clone(),
                entries: b
                    .entries
                    .iter()
                    .enumerate()
                    .map(|(l, e)| EntryRecord {
                        l,
                        body: match e {
                            Some(e) => EntryBody::Live {
                                concept: e.concept,
                                kind: e.kind,
                                enc: encode_vector(&e.enc),
                            },
                            None => EntryBody::Removed { removed: true },
                        },
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("corpus serializes");
    s.push('\n');
    s
}

pub(crate) fn from_json(text: &str) -> Result<RetrievalCorpus, CorpusError> {
    let file: CorpusFile =
        serde_json::from_str(text).map_err(|e| CorpusError::Invalid(e.to_string()))?;
    if file.format != CORPUS_FORMAT {
        return Err(CorpusError::Invalid(format!("unexpected format `{}`", file.format)));
    }
    if file.schema_version != CORPUS_SCHEMA_VERSION {
        return Err(CorpusError::Invalid(format!(
            "unsupported schema version {}",
            file.schema_version
        )));
    }
    let mut blocks = Vec::with_capacity(file.blocks.len());
    for (j, section) in file.blocks.into_iter().enumerate() {
        if section.block != j {
            return Err(CorpusError::Invalid(format!(
                "block section {j} is labeled {}",
                section.block
            )));
        }
        let mut entries = Vec::with_capacity(section.entries.len());
        for (l, record) in section.entries.into_iter().enumerate() {
            if record.l != l {
                return Err(CorpusError::Invalid(format!(
                    "block {j}: entry {l} is labeled {}",
                    record.l
                )));
            }
            entries.push(match record.body {
                EntryBody::Live { concept, kind, enc } => Some(CorpusEntry {
                    enc: decode_vector(&enc)
                        .map_err(|e| CorpusError::Invalid(format!("block {j} entry {l}: {e}")))?,
                    concept,
                    kind,
                }),
                EntryBody::Removed { removed: true } => None,
                EntryBody::Removed { removed: false } => {
                    return Err(CorpusError::Invalid(format!("block {j} entry {l}: missing body")))
                }
            });
        }
        blocks.push(BlockCorpus {
            entries,
            n_concepts: section.n_concepts,
            deleted_to_single: section.deleted_to_single,
            empty_fit: section.empty_fit,
            zeroed: section.zeroed,
        });
    }
    let corpus = RetrievalCorpus {
        version: file.version,
        block_dim: file.block_dim,
        metric: file.metric,
        blocks,
        provenance: file.provenance,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn write_corpus(path: &Path, corpus: &RetrievalCorpus) -> std::io::Result<()> {
    fs::write(path, to_json(corpus))
}

#[derive(Debug, thiserror::Error)]
pub enum ReadCorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub fn read_corpus(path: &Path) -> Result<RetrievalCorpus, ReadCorpusError> {
    let text = fs::read_to_string(path)?;
    Ok(from_json(&text)?)
}

impl RetrievalCorpus {
    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        from_json(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> RetrievalCorpus {
        let block = BlockCorpus::from_entries(vec![
            CorpusEntry {
                enc: vec![0.1, -3.5e-12],
                concept: 1,
                kind: EntryKind::Prototype,
            },
            CorpusEntry {
                enc: vec![7.0, f32::MIN_POSITIVE],
                concept: 2,
                kind: EntryKind::Prototype,
            },
        ])
        .unwrap();
        let mut c = RetrievalCorpus::new(2, vec![block]).unwrap();
        c.blocks[0].entries.push(None);
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let c = corpus();
        let back = RetrievalCorpus::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn loader_rejects_broken_invariants() {
        let text = corpus().to_json().replace("\"prototype\"", "\"exemplar\"");
        assert!(RetrievalCorpus::from_json(&text).is_err());
        let text = corpus().to_json().replace(CORPUS_FORMAT, "something-else");
        assert!(RetrievalCorpus::from_json(&text).is_err());
    }
}
