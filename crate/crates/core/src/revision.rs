//! Symbolic edits of the retrieval corpus: merging, deleting and adding
//! concepts or entries, plus the zeroing mask used by the multi-hot
//! transform.
//!
//! Every successful edit bumps the corpus version by exactly one. Concept
//! ids are never renumbered; removed ids are simply retired.

use serde::{Deserialize, Serialize};

use crate::corpus::{
    mean, BlockCorpus, CorpusEntry, CorpusError, EntryKind, RetrievalCorpus, OTHER_CONCEPT,
};
use crate::clustering::distance::euclidean;

pub const FEEDBACK_FORMAT: &str = "ncb-feedback";
pub const FEEDBACK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RevisionError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("cannot merge concept {0} into itself")]
    SameConcept(u32),
    #[error("concept 0 is reserved and cannot be {0}")]
    Reserved(&'static str),
    #[error("entry {entry} is the last one of concept {concept} in block {block}; set confirm to delete the concept")]
    WouldOrphan { block: usize, entry: usize, concept: u32 },
    #[error("block {block} has no concepts left; use add_concept")]
    DeletedBlock { block: usize },
    #[error("add_concept needs at least one encoding")]
    NoEncodings,
    #[error("invalid feedback document: {0}")]
    Schema(String),
    #[error("action {index} failed: {source}")]
    Action {
        index: usize,
        #[source]
        source: Box<RevisionError>,
    },
    #[error("log entry {index} expects corpus version {expected}, found {found}")]
    ReplayVersion { index: usize, expected: u64, found: u64 },
}

/// One edit of one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RevisionAction {
    /// Relabels every entry of `from` as `into`.
    Merge { block: usize, from: u32, into: u32 },
    DeleteConcept { block: usize, concept: u32 },
    DeleteEntry {
        block: usize,
        entry: usize,
        #[serde(default)]
        confirm: bool,
    },
    AddEntry { block: usize, concept: u32, enc: Vec<f32> },
    AddConcept { block: usize, encs: Vec<Vec<f32>> },
    ZeroConcept { block: usize, concept: u32 },
}

impl RevisionAction {
    pub fn block(&self) -> usize {
        match self {
            RevisionAction::Merge { block, .. }
            | RevisionAction::DeleteConcept { block, .. }
            | RevisionAction::DeleteEntry { block, .. }
            | RevisionAction::AddEntry { block, .. }
            | RevisionAction::AddConcept { block, .. }
            | RevisionAction::ZeroConcept { block, .. } => *block,
        }
    }
}

/// Which branch a concept deletion took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeleteCase {
    /// No informative concept was left: the block now emits a constant id.
    DeletedToSingle,
    /// One informative concept was left: the deleted entries now vote for
    /// the reserved "other" id.
    MappedToOther,
    /// Two or more remained: the entries were removed.
    Removed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RevisionOutcome {
    Merged { relabeled: usize },
    ConceptDeleted { case: DeleteCase, entries: usize },
    EntryDeleted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        promoted: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        concept_deleted: Option<DeleteCase>,
    },
    EntryAdded { entry: usize },
    ConceptAdded { concept: u32, entries: usize },
    Zeroed,
}

impl RetrievalCorpus {
    fn block_mut(&mut self, j: usize) -> Result<&mut BlockCorpus, CorpusError> {
        self.blocks.get_mut(j).ok_or(CorpusError::UnknownBlock { block: j })
    }

    fn informative_live(&self, j: usize, concept: u32) -> Result<(), RevisionError> {
        let block = self.block(j)?;
        if block.deleted_to_single() {
            return Err(RevisionError::DeletedBlock { block: j });
        }
        if concept == OTHER_CONCEPT {
            return Err(RevisionError::Reserved("merged or deleted"));
        }
        if block.entries_of(concept).next().is_none() {
            return Err(CorpusError::UnknownConcept { block: j, concept }.into());
        }
        Ok(())
    }

    /// Relabels `from` as `into`. The prototype of `from` is kept as an
    /// exemplar of `into`.
    pub fn merge_concepts(&mut self, j: usize, from: u32, into: u32) -> Result<RevisionOutcome, RevisionError> {
        if from == into {
            return Err(RevisionError::SameConcept(from));
        }
        self.informative_live(j, from)?;
        self.informative_live(j, into)?;
        let block = self.block_mut(j)?;
        let mut relabeled = 0;
        for e in block.entries.iter_mut().flatten() {
            if e.concept == from {
                e.concept = into;
                e.kind = EntryKind::Exemplar;
                relabeled += 1;
            }
        }
        block.zeroed.remove(&from);
        self.version += 1;
        Ok(RevisionOutcome::Merged { relabeled })
    }

    /// Deletes a concept following the three-case rule on how many
    /// informative concepts remain.
    pub fn delete_concept(&mut self, j: usize, concept: u32) -> Result<RevisionOutcome, RevisionError> {
        self.informative_live(j, concept)?;
        let (case, entries) = delete_concept_in(self.block_mut(j)?, concept);
        self.version += 1;
        Ok(RevisionOutcome::ConceptDeleted { case, entries })
    }

    /// Removes one entry, leaving a tombstone. Removing a prototype promotes
    /// the remaining entry of that concept closest to it. Removing the last
    /// entry of a concept needs `confirm` and deletes the concept.
    pub fn delete_entry(&mut self, j: usize, l: usize, confirm: bool) -> Result<RevisionOutcome, RevisionError> {
        let block = self.block(j)?;
        let entry = block
            .entry(l)
            .ok_or(CorpusError::UnknownEntry { block: j, entry: l })?
            .clone();
        let siblings: Vec<(usize, f64)> = block
            .entries_of(entry.concept)
            .filter(|(i, _)| *i != l)
            .map(|(i, e)| (i, euclidean(&e.enc, &entry.enc)))
            .collect();

        if siblings.is_empty() {
            if !confirm {
                return Err(RevisionError::WouldOrphan {
                    block: j,
                    entry: l,
                    concept: entry.concept,
                });
            }
            if entry.concept == OTHER_CONCEPT {
                self.block_mut(j)?.entries[l] = None;
                self.version += 1;
                return Ok(RevisionOutcome::EntryDeleted {
                    promoted: None,
                    concept_deleted: None,
                });
            }
            let (case, _) = delete_concept_in(self.block_mut(j)?, entry.concept);
            self.version += 1;
            return Ok(RevisionOutcome::EntryDeleted {
                promoted: None,
                concept_deleted: Some(case),
            });
        }

        let promoted = (entry.kind == EntryKind::Prototype).then(|| {
            siblings
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("siblings is non-empty")
                .0
        });
        let block = self.block_mut(j)?;
        block.entries[l] = None;
        if let Some(p) = promoted {
            block.entries[p].as_mut().expect("live sibling").kind = EntryKind::Prototype;
        }
        self.version += 1;
        Ok(RevisionOutcome::EntryDeleted {
            promoted,
            concept_deleted: None,
        })
    }

    /// Appends `enc` as an exemplar of a live concept.
    pub fn add_entry(&mut self, j: usize, concept: u32, enc: Vec<f32>) -> Result<RevisionOutcome, RevisionError> {
        self.check_vector(&enc)?;
        let block = self.block(j)?;
        if block.deleted_to_single() {
            return Err(RevisionError::DeletedBlock { block: j });
        }
        if block.entries_of(concept).next().is_none() {
            return Err(CorpusError::UnknownConcept { block: j, concept }.into());
        }
        let block = self.block_mut(j)?;
        block.entries.push(Some(CorpusEntry {
            enc,
            concept,
            kind: EntryKind::Exemplar,
        }));
        let entry = block.entries.len() - 1;
        self.version += 1;
        Ok(RevisionOutcome::EntryAdded { entry })
    }

    /// Allocates a fresh concept id: the mean of `encs` becomes its
    /// prototype and the encodings its exemplars. Revives a block whose
    /// concepts were all deleted.
    pub fn add_concept(&mut self, j: usize, encs: Vec<Vec<f32>>) -> Result<RevisionOutcome, RevisionError> {
        if encs.is_empty() {
            return Err(RevisionError::NoEncodings);
        }
        for e in &encs {
            self.check_vector(e)?;
        }
        let block = self.block_mut(j)?;
        let concept = block.n_concepts + 1;
        block.n_concepts = concept;
        block.deleted_to_single = false;
        block.entries.push(Some(CorpusEntry {
            enc: mean(encs.iter().map(Vec::as_slice)),
            concept,
            kind: EntryKind::Prototype,
        }));
        let entries = encs.len() + 1;
        block.entries.extend(encs.into_iter().map(|enc| {
            Some(CorpusEntry {
                enc,
                concept,
                kind: EntryKind::Exemplar,
            })
        }));
        self.version += 1;
        Ok(RevisionOutcome::ConceptAdded { concept, entries })
    }

    /// Masks a concept out of multi-hot encodings. Retrieval is unaffected.
    pub fn zero_concept(&mut self, j: usize, concept: u32) -> Result<RevisionOutcome, RevisionError> {
        if !self.block(j)?.is_live(concept) {
            return Err(CorpusError::UnknownConcept { block: j, concept }.into());
        }
        self.block_mut(j)?.zeroed.insert(concept);
        self.version += 1;
        Ok(RevisionOutcome::Zeroed)
    }

    pub fn apply(&mut self, action: &RevisionAction) -> Result<RevisionOutcome, RevisionError> {
        match action {
            RevisionAction::Merge { block, from, into } => self.merge_concepts(*block, *from, *into),
            RevisionAction::DeleteConcept { block, concept } => self.delete_concept(*block, *concept),
            RevisionAction::DeleteEntry { block, entry, confirm } => self.delete_entry(*block, *entry, *confirm),
            RevisionAction::AddEntry { block, concept, enc } => self.add_entry(*block, *concept, enc.clone()),
            RevisionAction::AddConcept { block, encs } => self.add_concept(*block, encs.clone()),
            RevisionAction::ZeroConcept { block, concept } => self.zero_concept(*block, *concept),
        }
    }

    fn check_vector(&self, enc: &[f32]) -> Result<(), CorpusError> {
        if enc.len() != self.block_dim {
            return Err(CorpusError::DimensionMismatch {
                expected: self.block_dim,
                found: enc.len(),
            });
        }
        if enc.iter().any(|v| !v.is_finite()) {
            return Err(CorpusError::Invalid("encoding is not finite".into()));
        }
        Ok(())
    }
}

fn delete_concept_in(block: &mut BlockCorpus, concept: u32) -> (DeleteCase, usize) {
    let mut remaining = block.informative_concepts();
    remaining.remove(&concept);
    let affected = block.entries_of(concept).count();
    let case = match remaining.len() {
        0 => {
            block.entries.iter_mut().for_each(|e| *e = None);
            block.deleted_to_single = true;
            block.zeroed.clear();
            DeleteCase::DeletedToSingle
        }
        1 => {
            let has_other = block.prototype(OTHER_CONCEPT).is_some();
            for e in block.entries.iter_mut().flatten() {
                if e.concept == concept {
                    e.concept = OTHER_CONCEPT;
                    if has_other {
                        e.kind = EntryKind::Exemplar;
                    }
                }
            }
            DeleteCase::MappedToOther
        }
        _ => {
            for e in block.entries.iter_mut() {
                if e.as_ref().is_some_and(|e| e.concept == concept) {
                    *e = None;
                }
            }
            DeleteCase::Removed
        }
    };
    block.zeroed.remove(&concept);
    (case, affected)
}

/// One action of a feedback document, with an optional per-action author.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackItem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(flatten)]
    pub action: RevisionAction,
}

/// Ordered list of revision actions, as written by a human or a tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackDocument {
    pub format: String,
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    pub actions: Vec<FeedbackItem>,
}

impl FeedbackDocument {
    pub fn new(actor: impl Into<String>, actions: Vec<RevisionAction>) -> Self {
        FeedbackDocument {
            format: FEEDBACK_FORMAT.to_owned(),
            schema_version: FEEDBACK_SCHEMA_VERSION,
            actor: Some(actor.into()),
            actions: actions
                .into_iter()
                .map(|action| FeedbackItem { actor: None, action })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RevisionError> {
        let doc: FeedbackDocument =
            serde_json::from_str(text).map_err(|e| RevisionError::Schema(e.to_string()))?;
        if doc.format != FEEDBACK_FORMAT {
            return Err(RevisionError::Schema(format!("unexpected format `{}`", doc.format)));
        }
        if doc.schema_version != FEEDBACK_SCHEMA_VERSION {
            return Err(RevisionError::Schema(format!(
                "unsupported schema version {}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("feedback serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub action: RevisionAction,
    pub outcome: RevisionOutcome,
    pub actor: String,
    pub timestamp: String,
    pub version_before: u64,
    pub version_after: u64,
}

/// Append-only record of applied revisions, stored as JSON lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RevisionLog {
    entries: Vec<LogEntry>,
}

impl RevisionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends entries; their versions must continue the log.
    pub fn extend(&mut self, new: impl IntoIterator<Item = LogEntry>) -> Result<(), RevisionError> {
        for e in new {
            if let Some(last) = self.entries.last() {
                if e.version_before < last.version_after {
                    return Err(RevisionError::ReplayVersion {
                        index: self.entries.len(),
                        expected: last.version_after,
                        found: e.version_before,
                    });
                }
            }
            self.entries.push(e);
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("log entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, RevisionError> {
        let mut log = RevisionLog::new();
        let mut parsed = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            parsed.push(
                serde_json::from_str::<LogEntry>(line)
                    .map_err(|e| RevisionError::Schema(format!("log line {}: {e}", i + 1)))?,
            );
        }
        log.extend(parsed)?;
        Ok(log)
    }

    /// Log entries whose `version_before` is at least `version`.
    pub fn since(&self, version: u64) -> &[LogEntry] {
        let start = self.entries.partition_point(|e| e.version_before < version);
        &self.entries[start..]
    }
}

/// Applies every action of `doc` in order to a copy of `corpus`. Any failure
/// discards the copy, so the caller's corpus is never half-edited.
pub fn apply_feedback(
    corpus: &RetrievalCorpus,
    doc: &FeedbackDocument,
    timestamp: &str,
) -> Result<(RetrievalCorpus, Vec<LogEntry>), RevisionError> {
    let mut next = corpus.clone();
    let mut log = Vec::with_capacity(doc.actions.len());
    for (index, item) in doc.actions.iter().enumerate() {
        let version_before = next.version();
        let outcome = next.apply(&item.action).map_err(|e| RevisionError::Action {
            index,
            source: Box::new(e),
        })?;
        log.push(LogEntry {
            action: item.action.clone(),
            outcome,
            actor: item
                .actor
                .clone()
                .or_else(|| doc.actor.clone())
                .unwrap_or_else(|| "unknown".to_owned()),
            timestamp: timestamp.to_owned(),
            version_before,
            version_after: next.version(),
        });
    }
    Ok((next, log))
}

/// Re-applies logged actions to `corpus`, checking each version stamp.
pub fn replay(corpus: &RetrievalCorpus, entries: &[LogEntry]) -> Result<RetrievalCorpus, RevisionError> {
    let mut next = corpus.clone();
    for (index, e) in entries.iter().enumerate() {
        if next.version() != e.version_before {
            return Err(RevisionError::ReplayVersion {
                index,
                expected: e.version_before,
                found: next.version(),
            });
        }
        next.apply(&e.action).map_err(|err| RevisionError::Action {
            index,
            source: Box::new(err),
        })?;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto(enc: &[f32], concept: u32) -> CorpusEntry {
        CorpusEntry {
            enc: enc.to_vec(),
            concept,
            kind: EntryKind::Prototype,
        }
    }

    fn exemplar(enc: &[f32], concept: u32) -> CorpusEntry {
        CorpusEntry {
            enc: enc.to_vec(),
            concept,
            kind: EntryKind::Exemplar,
        }
    }

    fn corpus(concepts: u32) -> RetrievalCorpus {
        let mut entries = Vec::new();
        for c in 1..=concepts {
            let x = c as f32 * 10.0;
            entries.push(proto(&[x], c));
            entries.push(exemplar(&[x + 1.0], c));
        }
        RetrievalCorpus::new(1, vec![BlockCorpus::from_entries(entries).unwrap()]).unwrap()
    }

    #[test]
    fn merge_relabels_and_keeps_one_prototype() {
        let mut c = corpus(3);
        c.merge_concepts(0, 2, 1).unwrap();
        let b = c.block(0).unwrap();
        assert!(!b.is_live(2));
        assert_eq!(b.entries_of(1).count(), 4);
        assert_eq!(b.prototype(1).unwrap().0, 0);
        assert_eq!(c.select_concept(0, &[20.0]).unwrap().concept, 1);
        assert_eq!(c.version(), 1);
        c.validate().unwrap();
    }

    #[test]
    fn second_identical_merge_fails_without_change() {
        let mut c = corpus(3);
        c.merge_concepts(0, 2, 1).unwrap();
        let before = c.clone();
        assert!(c.merge_concepts(0, 2, 1).is_err());
        assert_eq!(c, before);
        assert_eq!(c.merge_concepts(0, 1, 1).unwrap_err(), RevisionError::SameConcept(1));
    }

    #[test]
    fn delete_cases() {
        let mut one = corpus(1);
        let out = one.delete_concept(0, 1).unwrap();
        assert_eq!(
            out,
            RevisionOutcome::ConceptDeleted {
                case: DeleteCase::DeletedToSingle,
                entries: 2
            }
        );
        assert_eq!(one.select_concept(0, &[-99.0]).unwrap().concept, OTHER_CONCEPT);

        let mut two = corpus(2);
        two.delete_concept(0, 2).unwrap();
        assert_eq!(two.select_concept(0, &[20.0]).unwrap().concept, OTHER_CONCEPT);
        assert_eq!(two.select_concept(0, &[10.0]).unwrap().concept, 1);

        let mut three = corpus(3);
        three.delete_concept(0, 3).unwrap();
        let b = three.block(0).unwrap();
        assert_eq!(b.entries_of(3).count(), 0);
        assert_eq!(b.n_entries(), 4);
        assert_eq!(three.select_concept(0, &[30.0]).unwrap().concept, 2);
    }

    #[test]
    fn deleting_a_prototype_promotes_the_closest_exemplar() {
        let mut c = RetrievalCorpus::new(
            1,
            vec![BlockCorpus::from_entries(vec![
                proto(&[0.0], 1),
                exemplar(&[5.0], 1),
                exemplar(&[1.0], 1),
            ])
            .unwrap()],
        )
        .unwrap();
        let out = c.delete_entry(0, 0, false).unwrap();
        assert_eq!(
            out,
            RevisionOutcome::EntryDeleted {
                promoted: Some(2),
                concept_deleted: None
            }
        );
        assert_eq!(c.block(0).unwrap().prototype(1).unwrap().0, 2);
        assert_eq!(c.block(0).unwrap().capacity(), 3);
    }

    #[test]
    fn last_entry_needs_confirmation() {
        let mut c = RetrievalCorpus::new(
            1,
            vec![BlockCorpus::from_entries(vec![proto(&[0.0], 1), proto(&[9.0], 2), proto(&[5.0], 3)]).unwrap()],
        )
        .unwrap();
        assert!(matches!(c.delete_entry(0, 1, false), Err(RevisionError::WouldOrphan { .. })));
        assert_eq!(c.version(), 0);
        c.delete_entry(0, 1, true).unwrap();
        assert!(!c.block(0).unwrap().is_live(2));
    }

    #[test]
    fn add_concept_allocates_the_next_id() {
        let mut c = corpus(2);
        let out = c.add_concept(0, vec![vec![100.0], vec![102.0]]).unwrap();
        assert_eq!(
            out,
            RevisionOutcome::ConceptAdded {
                concept: 3,
                entries: 3
            }
        );
        assert_eq!(c.block(0).unwrap().prototype(3).unwrap().1.enc, vec![101.0]);
        assert_eq!(c.add_concept(0, vec![]).unwrap_err(), RevisionError::NoEncodings);
        assert!(c.add_concept(0, vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn add_entry_is_found_at_zero_distance() {
        let mut c = corpus(2);
        c.add_entry(0, 1, vec![15.2]).unwrap();
        assert_eq!(c.select_concept(0, &[15.2]).unwrap().concept, 1);
        assert!(c.add_entry(0, 9, vec![0.0]).is_err());
    }

    #[test]
    fn add_concept_revives_a_deleted_block() {
        let mut c = corpus(1);
        c.delete_concept(0, 1).unwrap();
        assert!(c.add_entry(0, 1, vec![0.0]).is_err());
        c.add_concept(0, vec![vec![3.0]]).unwrap();
        assert_eq!(c.select_concept(0, &[0.0]).unwrap().concept, 2);
    }

    #[test]
    fn feedback_is_transactional() {
        let c = corpus(3);
        let doc = FeedbackDocument::new(
            "tester",
            vec![
                RevisionAction::DeleteConcept { block: 0, concept: 3 },
                RevisionAction::Merge {
                    block: 0,
                    from: 3,
                    into: 1,
                },
            ],
        );
        let err = apply_feedback(&c, &doc, "t0").unwrap_err();
        assert!(matches!(err, RevisionError::Action { index: 1, .. }));
    }

    #[test]
    fn replay_reproduces_the_corpus() {
        let c = corpus(4);
        let doc = FeedbackDocument::new(
            "tester",
            vec![
                RevisionAction::Merge {
                    block: 0,
                    from: 4,
                    into: 3,
                },
                RevisionAction::DeleteEntry {
                    block: 0,
                    entry: 1,
                    confirm: false,
                },
                RevisionAction::AddConcept {
                    block: 0,
                    encs: vec![vec![0.123_456_78], vec![-7.5e-3]],
                },
                RevisionAction::ZeroConcept { block: 0, concept: 2 },
            ],
        );
        let doc = FeedbackDocument::from_json(&doc.to_json()).unwrap();
        let (after, entries) = apply_feedback(&c, &doc, "t0").unwrap();
        assert_eq!(entries.len(), 4);
        let mut log = RevisionLog::new();
        log.extend(entries).unwrap();
        let log = RevisionLog::from_jsonl(&log.to_jsonl()).unwrap();
        let replayed = replay(&c, log.entries()).unwrap();
        assert_eq!(replayed.to_json(), after.to_json());
        assert_eq!(after.version(), 4);
    }

    #[test]
    fn feedback_schema_is_checked() {
        assert!(FeedbackDocument::from_json("{}").is_err());
        let bad = r#"{"format":"ncb-feedback","schema_version":9,"actions":[]}"#;
        assert!(FeedbackDocument::from_json(bad).is_err());
        let ok = r#"{"format":"ncb-feedback","schema_version":1,"actions":[
            {"block":0,"op":"merge","from":2,"into":1,"actor":"ann"}]}"#;
        let doc = FeedbackDocument::from_json(ok).unwrap();
        assert_eq!(doc.actions[0].actor.as_deref(), Some("ann"));
    }
}
