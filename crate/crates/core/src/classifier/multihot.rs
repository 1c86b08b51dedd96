use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::corpus::{ConceptSlotEncoding, RetrievalCorpus};
use crate::encoding::{FactorSchema, GroundTruthObject};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct BlockLayout {
    offset: usize,
    /// Live ids in ascending order; empty for blocks with constant output.
    concepts: Vec<u32>,
    masked: BTreeSet<u32>,
}

/// Coordinate map from `(block, concept)` to a position in the multi-hot
/// vector, frozen at one corpus version.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiHotLayout {
    blocks: Vec<BlockLayout>,
    len: usize,
    corpus_version: u64,
}

impl MultiHotLayout {
    pub fn from_corpus(corpus: &RetrievalCorpus) -> Self {
        let mut offset = 0;
        let blocks = corpus
            .blocks()
            .iter()
            .map(|b| {
                let concepts: Vec<u32> = if b.deleted_to_single() {
                    Vec::new()
                } else {
                    b.live_concepts().into_iter().collect()
                };
                let layout = BlockLayout {
                    offset,
                    masked: b.zeroed().clone(),
                    concepts,
                };
                offset += layout.concepts.len();
                layout
            })
            .collect();
        MultiHotLayout {
            blocks,
            len: offset,
            corpus_version: corpus.version(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn corpus_version(&self) -> u64 {
        self.corpus_version
    }

    pub fn coordinate(&self, j: usize, concept: u32) -> Option<usize> {
        let b = self.blocks.get(j)?;
        b.concepts.binary_search(&concept).ok().map(|i| b.offset + i)
    }

    /// `(block, concept)` of every coordinate, in order.
    pub fn coordinates(&self) -> Vec<(usize, u32)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(j, b)| b.concepts.iter().map(move |&c| (j, c)))
            .collect()
    }

    pub fn encode(&self, c: &ConceptSlotEncoding) -> Result<Vec<bool>, ClassifierError> {
        if c.corpus_version != self.corpus_version {
            return Err(ClassifierError::StaleEncoding {
                expected: self.corpus_version,
                found: c.corpus_version,
            });
        }
        if c.concepts.len() != self.blocks.len() {
            return Err(ClassifierError::BlockCountMismatch {
                expected: self.blocks.len(),
                found: c.concepts.len(),
            });
        }
        let mut out = vec![false; self.len];
        for (j, (&v, b)) in c.concepts.iter().zip(&self.blocks).enumerate() {
            if b.concepts.is_empty() {
                continue;
            }
            let i = b
                .concepts
                .binary_search(&v)
                .map_err(|_| ClassifierError::UnknownConcept { block: j, concept: v })?;
            if !b.masked.contains(&v) {
                out[b.offset + i] = true;
            }
        }
        Ok(out)
    }
}

/// One-hot of every categorical ground-truth factor, in schema order. This
/// is the "perfect concepts" input.
pub fn ground_truth_features(schema: &FactorSchema, object: &GroundTruthObject) -> Result<Vec<bool>, ClassifierError> {
    let mut out = Vec::new();
    for category in schema.categorical() {
        let values = category.values().expect("categorical");
        let label = object
            .label(&category.name)
            .ok_or_else(|| ClassifierError::MissingCategory(category.name.clone()))?;
        let idx = category
            .value_index(label)
            .ok_or_else(|| ClassifierError::MissingCategory(category.name.clone()))?;
        out.extend((0..values.len()).map(|i| i == idx));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BlockCorpus, CorpusEntry, EntryKind};

    fn corpus() -> RetrievalCorpus {
        let block = |n: u32| {
            BlockCorpus::from_entries(
                (1..=n)
                    .map(|c| CorpusEntry {
                        enc: vec![c as f32],
                        concept: c,
                        kind: EntryKind::Prototype,
                    })
                    .collect(),
            )
            .unwrap()
        };
        RetrievalCorpus::new(1, vec![block(3), block(2)]).unwrap()
    }

    fn slot(concepts: Vec<u32>, version: u64) -> ConceptSlotEncoding {
        ConceptSlotEncoding {
            slot: 0,
            concepts,
            probabilities: None,
            corpus_version: version,
        }
    }

    #[test]
    fn one_hot_per_block() {
        let layout = MultiHotLayout::from_corpus(&corpus());
        assert_eq!(layout.len(), 5);
        let x = layout.encode(&slot(vec![2, 1], 0)).unwrap();
        assert_eq!(x, vec![false, true, false, true, false]);
    }

    #[test]
    fn zeroed_and_stale() {
        let mut c = corpus();
        c.zero_concept(0, 2).unwrap();
        let layout = MultiHotLayout::from_corpus(&c);
        assert_eq!(layout.encode(&slot(vec![2, 2], 1)).unwrap().iter().filter(|b| **b).count(), 1);
        assert_eq!(
            layout.encode(&slot(vec![2, 2], 0)).unwrap_err(),
            ClassifierError::StaleEncoding { expected: 1, found: 0 }
        );
    }

    #[test]
    fn deleted_block_has_no_coordinates() {
        let mut c = corpus();
        c.delete_concept(1, 2).unwrap();
        c.delete_concept(1, 1).unwrap();
        let layout = MultiHotLayout::from_corpus(&c);
        assert_eq!(layout.len(), 3);
        assert_eq!(layout.encode(&slot(vec![3, 0], 2)).unwrap(), vec![false, false, true]);
    }
}
