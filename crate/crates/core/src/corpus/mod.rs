//! The retrieval corpus and retrieval-based concept inference.
//!
//! Each block owns an ordered list of `(encoding, concept id)` entries. A
//! block vector is mapped to the concept id of its nearest entry (or to the
//! majority id among its `k` nearest entries). Entry indices are identities:
//! removed entries leave tombstones so later indices never shift.
//!
//! Concept id `0` is reserved for the "other" bucket that deletion creates
//! when a single informative concept remains, and for blocks whose concepts
//! have all been deleted.

mod fit;
mod io;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterParams, Clustering};
use crate::clustering::distance::euclidean;
use crate::encoding::{select_object_slots, BlockSlotEncoding, SlotSelection};

pub use fit::{fit_corpus, gather_block_points, ClusterMethod, FitConfig, FitError, FitReport};
pub use io::{read_corpus, write_corpus, ReadCorpusError, CORPUS_FORMAT, CORPUS_SCHEMA_VERSION};

/// Reserved id of the "other / uninformative" concept.
pub const OTHER_CONCEPT: u32 = 0;

/// Default number of exemplars stored next to each prototype.
pub const DEFAULT_EXEMPLARS: usize = 5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorpusError {
    #[error("block vector has dimension {found}, corpus expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("scene has {found} blocks, corpus has {expected}")]
    BlockCountMismatch { expected: usize, found: usize },
    #[error("block {block} has no entries")]
    EmptyBlock { block: usize },
    #[error("block {block} does not exist")]
    UnknownBlock { block: usize },
    #[error("concept {concept} is not live in block {block}")]
    UnknownConcept { block: usize, concept: u32 },
    #[error("entry {entry} does not exist in block {block}")]
    UnknownEntry { block: usize, entry: usize },
    #[error("top-k selection needs k >= 1")]
    InvalidK,
    #[error("{clusterings} clusterings for {blocks} point sets")]
    MisalignedInput { clusterings: usize, blocks: usize },
    #[error("invalid corpus: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Prototype,
    Exemplar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub enc: Vec<f32>,
    pub concept: u32,
    pub kind: EntryKind,
}

/// Corpus of a single block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCorpus {
    pub(crate) entries: Vec<Option<CorpusEntry>>,
    /// Highest concept id ever allocated in this block.
    pub(crate) n_concepts: u32,
    pub(crate) deleted_to_single: bool,
    /// Set when the clustering that produced this block found no clusters.
    pub(crate) empty_fit: bool,
    pub(crate) zeroed: BTreeSet<u32>,
}

impl BlockCorpus {
    pub fn empty() -> Self {
        BlockCorpus {
            entries: Vec::new(),
            n_concepts: 0,
            deleted_to_single: false,
            empty_fit: false,
            zeroed: BTreeSet::new(),
        }
    }

    /// Builds a block from explicit entries, checking the one-prototype rule.
    pub fn from_entries(entries: Vec<CorpusEntry>) -> Result<Self, CorpusError> {
        let n_concepts = entries.iter().map(|e| e.concept).max().unwrap_or(0);
        let block = BlockCorpus {
            entries: entries.into_iter().map(Some).collect(),
            n_concepts,
            deleted_to_single: false,
            empty_fit: false,
            zeroed: BTreeSet::new(),
        };
        block.validate()?;
        Ok(block)
    }

    /// Live entries with their stable indices.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &CorpusEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(l, e)| e.as_ref().map(|e| (l, e)))
    }

    pub fn entry(&self, l: usize) -> Option<&CorpusEntry> {
        self.entries.get(l).and_then(Option::as_ref)
    }

    /// Number of index positions, tombstones included.
    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    pub fn n_entries(&self) -> usize {
        self.entries().count()
    }

    pub fn n_concepts(&self) -> u32 {
        self.n_concepts
    }

    pub fn deleted_to_single(&self) -> bool {
        self.deleted_to_single
    }

    pub fn empty_fit(&self) -> bool {
        self.empty_fit
    }

    pub fn zeroed(&self) -> &BTreeSet<u32> {
        &self.zeroed
    }

    /// Concept ids this block can emit, the "other" id included.
    pub fn live_concepts(&self) -> BTreeSet<u32> {
        if self.deleted_to_single {
            return BTreeSet::from([OTHER_CONCEPT]);
        }
        self.entries().map(|(_, e)| e.concept).collect()
    }

    /// Live concept ids other than the reserved "other" id.
    pub fn informative_concepts(&self) -> BTreeSet<u32> {
        let mut live = self.live_concepts();
        live.remove(&OTHER_CONCEPT);
        live
    }

    pub fn is_live(&self, concept: u32) -> bool {
        self.live_concepts().contains(&concept)
    }

    pub fn prototype(&self, concept: u32) -> Option<(usize, &CorpusEntry)> {
        self.entries()
            .find(|(_, e)| e.concept == concept && e.kind == EntryKind::Prototype)
    }

    pub fn entries_of(&self, concept: u32) -> impl Iterator<Item = (usize, &CorpusEntry)> {
        self.entries().filter(move |(_, e)| e.concept == concept)
    }

    pub fn block_dim(&self) -> Option<usize> {
        self.entries().next().map(|(_, e)| e.enc.len())
    }

    pub(crate) fn validate(&self) -> Result<(), CorpusError> {
        let mut prototypes: BTreeMap<u32, usize> = BTreeMap::new();
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let dim = self.block_dim();
        for (l, e) in self.entries() {
            if Some(e.enc.len()) != dim {
                return Err(CorpusError::Invalid(format!("entry {l} has a different dimension")));
            }
            if e.enc.iter().any(|v| !v.is_finite()) {
                return Err(CorpusError::Invalid(format!("entry {l} is not finite")));
            }
            if e.concept > self.n_concepts {
                return Err(CorpusError::Invalid(format!(
                    "entry {l} has concept {} above N_C = {}",
                    e.concept, self.n_concepts
                )));
            }
            seen.insert(e.concept);
            if e.kind == EntryKind::Prototype {
                *prototypes.entry(e.concept).or_default() += 1;
            }
        }
        for c in &seen {
            match prototypes.get(c) {
                Some(1) => {}
                Some(k) => {
                    return Err(CorpusError::Invalid(format!("concept {c} has {k} prototypes")))
                }
                None => return Err(CorpusError::Invalid(format!("concept {c} has no prototype"))),
            }
        }
        if self.deleted_to_single && !seen.is_empty() {
            return Err(CorpusError::Invalid(
                "a deleted block still holds live entries".into(),
            ));
        }
        for z in &self.zeroed {
            if !self.live_concepts().contains(z) {
                return Err(CorpusError::Invalid(format!("zeroed concept {z} is not live")));
            }
        }
        Ok(())
    }

    /// Nearest entry by Euclidean distance; exact ties go to the lower index.
    pub fn select(&self, z: &[f32]) -> Result<Selection, CorpusError> {
        if self.deleted_to_single {
            return Ok(Selection {
                concept: OTHER_CONCEPT,
                entry: None,
            });
        }
        let mut best: Option<(f64, usize, u32)> = None;
        for (l, e) in self.entries() {
            if e.enc.len() != z.len() {
                return Err(CorpusError::DimensionMismatch {
                    expected: e.enc.len(),
                    found: z.len(),
                });
            }
            let d = euclidean(&e.enc, z);
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, l, e.concept));
            }
        }
        best.map(|(_, l, concept)| Selection {
            concept,
            entry: Some(l),
        })
        .ok_or(CorpusError::EmptyBlock { block: usize::MAX })
    }

    /// Majority vote over the `k` nearest entries. Returns the winning id and
    /// its share of the votes. Vote ties go to the smaller id.
    pub fn select_top_k(&self, z: &[f32], k: usize) -> Result<(u32, f64), CorpusError> {
        if k == 0 {
            return Err(CorpusError::InvalidK);
        }
        if self.deleted_to_single {
            return Ok((OTHER_CONCEPT, 1.0));
        }
        let mut scored: Vec<(f64, usize, u32)> = Vec::with_capacity(self.entries.len());
        for (l, e) in self.entries() {
            if e.enc.len() != z.len() {
                return Err(CorpusError::DimensionMismatch {
                    expected: e.enc.len(),
                    found: z.len(),
                });
            }
            scored.push((euclidean(&e.enc, z), l, e.concept));
        }
        if scored.is_empty() {
            return Err(CorpusError::EmptyBlock { block: usize::MAX });
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let used = k.min(scored.len());
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for &(_, _, c) in &scored[..used] {
            *votes.entry(c).or_default() += 1;
        }
        // BTreeMap iterates ids ascending, so the first maximum is the smallest id.
        let (winner, count) = votes
            .iter()
            .fold((u32::MAX, 0usize), |acc, (&c, &n)| if n > acc.1 { (c, n) } else { acc });
        Ok((winner, count as f64 / used as f64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub concept: u32,
    /// Index of the winning entry; `None` for deleted blocks.
    pub entry: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
}

/// How each block of a corpus was fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BlockFit {
    Hdbscan {
        params: ClusterParams,
        n_clusters: usize,
        noise: usize,
        dbcv: Option<f64>,
    },
    Kmeans {
        k: usize,
        seed: u64,
    },
    Manual,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the encoder configuration, when known.
    pub encoder_fingerprint: Option<String>,
    pub block_fits: Vec<BlockFit>,
    /// Wall-clock creation stamp. Left empty for reproducible artifacts.
    pub created_at: Option<String>,
}

/// Retrieval corpus over all blocks. Mutations bump `version` by one.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalCorpus {
    pub(crate) version: u64,
    pub(crate) block_dim: usize,
    pub(crate) metric: Metric,
    pub(crate) blocks: Vec<BlockCorpus>,
    pub provenance: Provenance,
}

impl RetrievalCorpus {
    pub fn new(block_dim: usize, blocks: Vec<BlockCorpus>) -> Result<Self, CorpusError> {
        let corpus = RetrievalCorpus {
            version: 0,
            block_dim,
            metric: Metric::Euclidean,
            blocks,
            provenance: Provenance::default(),
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[BlockCorpus] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> Result<&BlockCorpus, CorpusError> {
        self.blocks.get(j).ok_or(CorpusError::UnknownBlock { block: j })
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for (j, b) in self.blocks.iter().enumerate() {
            b.validate()
                .map_err(|e| CorpusError::Invalid(format!("block {j}: {e}")))?;
            if let Some(d) = b.block_dim() {
                if d != self.block_dim {
                    return Err(CorpusError::Invalid(format!(
                        "block {j} holds {d}-dimensional entries, corpus declares {}",
                        self.block_dim
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn select_concept(&self, j: usize, z: &[f32]) -> Result<Selection, CorpusError> {
        let block = self.block(j)?;
        self.check_dim(z)?;
        block.select(z).map_err(|e| locate(e, j))
    }

    pub fn select_concept_top_k(&self, j: usize, z: &[f32], k: usize) -> Result<(u32, f64), CorpusError> {
        let block = self.block(j)?;
        self.check_dim(z)?;
        block.select_top_k(z, k).map_err(|e| locate(e, j))
    }

    fn check_dim(&self, z: &[f32]) -> Result<(), CorpusError> {
        if z.len() != self.block_dim {
            return Err(CorpusError::DimensionMismatch {
                expected: self.block_dim,
                found: z.len(),
            });
        }
        Ok(())
    }

    /// Concept ids of one slot, block by block.
    pub fn infer_slot(
        &self,
        encoding: &BlockSlotEncoding,
        slot: usize,
        selector: Selector,
    ) -> Result<ConceptSlotEncoding, CorpusError> {
        self.check_scene(encoding)?;
        let mut concepts = Vec::with_capacity(self.blocks.len());
        let mut probabilities = Vec::new();
        for j in 0..self.blocks.len() {
            let z = encoding.block(slot, j);
            match selector {
                Selector::Nearest => concepts.push(self.select_concept(j, z)?.concept),
                Selector::TopK { k } => {
                    let (c, p) = self.select_concept_top_k(j, z, k)?;
                    concepts.push(c);
                    probabilities.push(p);
                }
            }
        }
        Ok(ConceptSlotEncoding {
            slot,
            concepts,
            probabilities: matches!(selector, Selector::TopK { .. }).then_some(probabilities),
            corpus_version: self.version,
        })
    }

    /// Selects object slots and maps each of them to concept ids.
    pub fn infer(
        &self,
        encoding: &BlockSlotEncoding,
        config: &InferenceConfig,
    ) -> Result<Vec<ConceptSlotEncoding>, CorpusError> {
        self.check_scene(encoding)?;
        select_object_slots(encoding, config.slot_mode)
            .into_iter()
            .map(|slot| self.infer_slot(encoding, slot, config.selector))
            .collect()
    }

    fn check_scene(&self, encoding: &BlockSlotEncoding) -> Result<(), CorpusError> {
        if encoding.n_blocks() != self.blocks.len() {
            return Err(CorpusError::BlockCountMismatch {
                expected: self.blocks.len(),
                found: encoding.n_blocks(),
            });
        }
        if encoding.block_dim() != self.block_dim {
            return Err(CorpusError::DimensionMismatch {
                expected: self.block_dim,
                found: encoding.block_dim(),
            });
        }
        Ok(())
    }

    /// SHA-256 of the serialized corpus, hex encoded.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(io::to_json(self).as_bytes()))
    }

    /// SHA-256 over the entries of one block.
    pub fn block_fingerprint(&self, j: usize) -> Option<String> {
        use sha2::{Digest, Sha256};
        let b = self.blocks.get(j)?;
        let mut h = Sha256::new();
        for (l, e) in b.entries.iter().enumerate() {
            h.update((l as u64).to_le_bytes());
            match e {
                Some(e) => {
                    h.update(e.concept.to_le_bytes());
                    h.update([e.kind as u8]);
                    for v in &e.enc {
                        h.update(v.to_le_bytes());
                    }
                }
                None => h.update([0xFF]),
            }
        }
        h.update([b.deleted_to_single as u8]);
        for z in &b.zeroed {
            h.update(z.to_le_bytes());
        }
        Some(hex::encode(h.finalize()))
    }
}

fn locate(e: CorpusError, block: usize) -> CorpusError {
    match e {
        CorpusError::EmptyBlock { .. } => CorpusError::EmptyBlock { block },
        other => other,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "selector", rename_all = "snake_case")]
pub enum Selector {
    #[default]
    Nearest,
    TopK {
        k: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub slot_mode: SlotSelection,
    pub selector: Selector,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            slot_mode: SlotSelection::MaxOne,
            selector: Selector::Nearest,
        }
    }
}

/// Discrete concept ids of one object slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptSlotEncoding {
    pub slot: usize,
    pub concepts: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
    pub corpus_version: u64,
}

/// Builds a corpus from per-block clusterings: one prototype (the member
/// mean) per cluster, followed by up to `exemplars_per_cluster` members
/// closest to it. Noise points are skipped.
pub fn distill<P: AsRef<[f32]>>(
    clusterings: &[Clustering],
    block_points: &[Vec<P>],
    exemplars_per_cluster: usize,
) -> Result<RetrievalCorpus, CorpusError> {
    if clusterings.len() != block_points.len() {
        return Err(CorpusError::MisalignedInput {
            clusterings: clusterings.len(),
            blocks: block_points.len(),
        });
    }
    let mut block_dim = None;
    let mut blocks = Vec::with_capacity(clusterings.len());
    for (j, (clustering, points)) in clusterings.iter().zip(block_points).enumerate() {
        if clustering.labels.len() != points.len() {
            return Err(CorpusError::Invalid(format!(
                "block {j}: {} labels for {} points",
                clustering.labels.len(),
                points.len()
            )));
        }
        if let Some(p) = points.first() {
            let d = p.as_ref().len();
            match block_dim {
                None => block_dim = Some(d),
                Some(bd) if bd != d => {
                    return Err(CorpusError::DimensionMismatch { expected: bd, found: d })
                }
                _ => {}
            }
        }
        blocks.push(distill_block(clustering, points, exemplars_per_cluster));
    }
    RetrievalCorpus::new(block_dim.unwrap_or(0), blocks)
}

fn distill_block<P: AsRef<[f32]>>(
    clustering: &Clustering,
    points: &[P],
    exemplars_per_cluster: usize,
) -> BlockCorpus {
    let mut block = BlockCorpus::empty();
    for (i, members) in clustering.members().into_iter().enumerate() {
        let concept = i as u32 + 1;
        block.n_concepts = concept;
        if members.is_empty() {
            continue;
        }
        let prototype = mean(members.iter().map(|&m| points[m].as_ref()));
        let mut ranked: Vec<(f64, usize)> = members
            .iter()
            .map(|&m| (euclidean(points[m].as_ref(), &prototype), m))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        block.entries.push(Some(CorpusEntry {
            enc: prototype,
            concept,
            kind: EntryKind::Prototype,
        }));
        for &(_, m) in ranked.iter().take(exemplars_per_cluster) {
            block.entries.push(Some(CorpusEntry {
                enc: points[m].as_ref().to_vec(),
                concept,
                kind: EntryKind::Exemplar,
            }));
        }
    }
    block.empty_fit = clustering.n_clusters == 0;
    block
}

pub(crate) fn mean<'a>(vectors: impl Iterator<Item = &'a [f32]>) -> Vec<f32> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for v in vectors {
        if sum.is_empty() {
            sum = vec![0.0; v.len()];
        }
        for (s, &x) in sum.iter_mut().zip(v) {
            *s += x as f64;
        }
        count += 1;
    }
    sum.into_iter().map(|s| (s / count.max(1) as f64) as f32).collect()
}
