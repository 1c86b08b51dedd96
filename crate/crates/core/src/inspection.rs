//! Read-only queries over a corpus and a labeled dataset: examples of a
//! concept, side-by-side comparison, what-if block swaps and prototype
//! similarity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::distance::euclidean;
use crate::corpus::{CorpusError, RetrievalCorpus};
use crate::encoding::{FactorValue, GroundTruthObject, LabeledScene, SyntheticEncoder};

/// Number of matched dataset samples shown on a card unless asked otherwise.
pub const DEFAULT_MATCHES: usize = 12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InspectionError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("comparison needs two different concepts, got {0} twice")]
    SameConcept(u32),
    #[error("concept {concept} of block {block} has no stored encoding")]
    NoRepresentative { block: usize, concept: u32 },
    #[error("entry {entry} does not belong to concept {concept} of block {block}")]
    ForeignEntry { block: usize, concept: u32, entry: usize },
    #[error("scene {scene} has no slot {slot}")]
    UnknownSample { scene: usize, slot: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedSample {
    pub scene: usize,
    pub slot: usize,
    pub factors: GroundTruthObject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredEncoding {
    pub entry: usize,
    pub enc: Vec<f32>,
}

/// What the corpus and the dataset say about one concept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptCard {
    pub block: usize,
    pub concept: u32,
    pub prototype: Option<StoredEncoding>,
    pub exemplars: Vec<StoredEncoding>,
    /// Up to the requested number of matching dataset objects, in dataset order.
    pub matches: Vec<MatchedSample>,
    pub n_matches: usize,
    pub n_objects: usize,
    /// Fraction of dataset objects mapped to this concept.
    pub population_share: f64,
    /// Category -> value -> count over all matching objects.
    pub factor_histogram: BTreeMap<String, BTreeMap<String, usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub first: ConceptCard,
    pub second: ConceptCard,
    pub prototype_distance: Option<f64>,
    /// Median distance over all prototype pairs of the block, for scale.
    pub block_median_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub block: usize,
    pub anchor: u32,
    /// Other concepts by ascending prototype distance.
    pub ranked: Vec<(u32, f64)>,
}

/// Which stored encoding replaces the block during an intervention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "use", rename_all = "snake_case")]
pub enum Replacement {
    #[default]
    Prototype,
    Entry { entry: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    pub scene: usize,
    pub slot: usize,
    pub block: usize,
    pub target: u32,
    /// Category read from the swapped block; `None` for distractor blocks.
    pub category: Option<String>,
    pub before: GroundTruthObject,
    pub after: GroundTruthObject,
    pub changed: Vec<String>,
    pub no_visible_effect: bool,
}

fn dataset_objects(dataset: &[LabeledScene]) -> impl Iterator<Item = (usize, usize, &GroundTruthObject)> {
    dataset.iter().enumerate().flat_map(|(s, scene)| {
        scene
            .object_slot_ids
            .iter()
            .zip(&scene.objects)
            .map(move |(&slot, o)| (s, slot, o))
    })
}

fn live(corpus: &RetrievalCorpus, j: usize, concept: u32) -> Result<(), CorpusError> {
    if !corpus.block(j)?.is_live(concept) {
        return Err(CorpusError::UnknownConcept { block: j, concept });
    }
    Ok(())
}

/// Exemplars of `(j, concept)` plus dataset objects the corpus maps to it.
pub fn implicit_inspect(
    corpus: &RetrievalCorpus,
    j: usize,
    concept: u32,
    dataset: &[LabeledScene],
    max_matches: usize,
) -> Result<ConceptCard, InspectionError> {
    live(corpus, j, concept)?;
    let block = corpus.block(j)?;
    let mut prototype = None;
    let mut exemplars = Vec::new();
    for (l, e) in block.entries_of(concept) {
        let stored = StoredEncoding {
            entry: l,
            enc: e.enc.clone(),
        };
        match e.kind {
            crate::corpus::EntryKind::Prototype => prototype = Some(stored),
            crate::corpus::EntryKind::Exemplar => exemplars.push(stored),
        }
    }

    let mut matches = Vec::new();
    let mut n_matches = 0;
    let mut n_objects = 0;
    let mut factor_histogram: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (s, slot, object) in dataset_objects(dataset) {
        n_objects += 1;
        let z = dataset[s].encoding.block(slot, j);
        if corpus.select_concept(j, z)?.concept != concept {
            continue;
        }
        n_matches += 1;
        for (category, value) in &object.factors {
            if let FactorValue::Label(v) = value {
                *factor_histogram
                    .entry(category.clone())
                    .or_default()
                    .entry(v.clone())
                    .or_default() += 1;
            }
        }
        if matches.len() < max_matches {
            matches.push(MatchedSample {
                scene: s,
                slot,
                factors: object.clone(),
            });
        }
    }
    Ok(ConceptCard {
        block: j,
        concept,
        prototype,
        exemplars,
        matches,
        n_matches,
        n_objects,
        population_share: if n_objects == 0 {
            0.0
        } else {
            n_matches as f64 / n_objects as f64
        },
        factor_histogram,
    })
}

/// Two cards side by side with their prototype distance.
pub fn comparative_inspect(
    corpus: &RetrievalCorpus,
    j: usize,
    first: u32,
    second: u32,
    dataset: &[LabeledScene],
    max_matches: usize,
) -> Result<Comparison, InspectionError> {
    if first == second {
        return Err(InspectionError::SameConcept(first));
    }
    let a = implicit_inspect(corpus, j, first, dataset, max_matches)?;
    let b = implicit_inspect(corpus, j, second, dataset, max_matches)?;
    let prototype_distance = match (&a.prototype, &b.prototype) {
        (Some(p), Some(q)) => Some(euclidean(&p.enc, &q.enc)),
        _ => None,
    };
    let prototypes = prototypes(corpus, j)?;
    let mut pairwise = Vec::new();
    for (i, (_, p)) in prototypes.iter().enumerate() {
        for (_, q) in &prototypes[i + 1..] {
            pairwise.push(euclidean(p, q));
        }
    }
    Ok(Comparison {
        first: a,
        second: b,
        prototype_distance,
        block_median_distance: median(&mut pairwise),
    })
}

fn prototypes(corpus: &RetrievalCorpus, j: usize) -> Result<Vec<(u32, &[f32])>, CorpusError> {
    let block = corpus.block(j)?;
    Ok(block
        .live_concepts()
        .into_iter()
        .filter_map(|c| block.prototype(c).map(|(_, e)| (c, e.enc.as_slice())))
        .collect())
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Ranks the other live concepts of the block by prototype distance. Ties
/// keep ascending id order.
pub fn similarity_inspect(corpus: &RetrievalCorpus, j: usize, concept: u32) -> Result<SimilarityReport, InspectionError> {
    live(corpus, j, concept)?;
    let prototypes = prototypes(corpus, j)?;
    let anchor = prototypes
        .iter()
        .find(|(c, _)| *c == concept)
        .map(|(_, p)| *p)
        .ok_or(InspectionError::NoRepresentative { block: j, concept })?;
    let mut ranked: Vec<(u32, f64)> = prototypes
        .iter()
        .filter(|(c, _)| *c != concept)
        .map(|(c, p)| (*c, euclidean(anchor, p)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(SimilarityReport {
        block: j,
        anchor: concept,
        ranked,
    })
}

/// Which block of which object to overwrite, and with what.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    pub scene: usize,
    pub slot: usize,
    pub block: usize,
    pub target: u32,
    #[serde(default)]
    pub replacement: Replacement,
}

/// Swaps one block of one slot for a stored encoding of the target concept
/// and decodes the slot before and after.
pub fn interventional_inspect(
    corpus: &RetrievalCorpus,
    encoder: &SyntheticEncoder,
    dataset: &[LabeledScene],
    query: Intervention,
) -> Result<InterventionReport, InspectionError> {
    let Intervention {
        scene,
        slot,
        block: j,
        target,
        replacement,
    } = query;
    live(corpus, j, target)?;
    let encoding = dataset
        .get(scene)
        .map(|s| &s.encoding)
        .filter(|e| slot < e.n_slots())
        .ok_or(InspectionError::UnknownSample { scene, slot })?;
    if encoding.n_blocks() != corpus.n_blocks() || encoding.block_dim() != corpus.block_dim() {
        return Err(CorpusError::BlockCountMismatch {
            expected: corpus.n_blocks(),
            found: encoding.n_blocks(),
        }
        .into());
    }
    let block = corpus.block(j)?;
    let source = match replacement {
        Replacement::Prototype => block
            .prototype(target)
            .map(|(_, e)| &e.enc)
            .ok_or(InspectionError::NoRepresentative { block: j, concept: target })?,
        Replacement::Entry { entry } => block
            .entry(entry)
            .filter(|e| e.concept == target)
            .map(|e| &e.enc)
            .ok_or(InspectionError::ForeignEntry {
                block: j,
                concept: target,
                entry,
            })?,
    };
    let before = encoder.decode_slot(encoding, slot);
    let mut swapped = encoding.clone();
    swapped.block_mut(slot, j).copy_from_slice(source);
    let after = encoder.decode_slot(&swapped, slot);
    let changed: Vec<String> = before
        .factors
        .iter()
        .filter(|(k, v)| after.factors.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    let category = encoder.config().category_of_block(j).map(str::to_owned);
    Ok(InterventionReport {
        scene,
        slot,
        block: j,
        target,
        no_visible_effect: changed.is_empty(),
        category,
        before,
        after,
        changed,
    })
}
