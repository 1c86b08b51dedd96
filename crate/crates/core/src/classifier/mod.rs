//! Symbolic consumers of concept encodings: the multi-hot transform and a
//! CART decision tree over binary features.

mod multihot;
mod property;
mod tree;

pub use multihot::{ground_truth_features, MultiHotLayout};
pub use property::{evaluate_property_accuracy, PropertyEvalConfig, PropertyReport, PROTOCOL_TRAIN_SIZES};
pub use tree::{DecisionTree, Node};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClassifierError {
    #[error("encoding was inferred with corpus version {found}, layout is for version {expected}")]
    StaleEncoding { expected: u64, found: u64 },
    #[error("encoding has {found} blocks, layout has {expected}")]
    BlockCountMismatch { expected: usize, found: usize },
    #[error("concept {concept} is not live in block {block}")]
    UnknownConcept { block: usize, concept: u32 },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{features} feature rows for {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature rows have different lengths")]
    RaggedFeatures,
    #[error("category `{0}` is missing from the ground truth")]
    MissingCategory(String),
    #[error("need {needed} labeled objects, dataset has {available}")]
    NotEnoughObjects { needed: usize, available: usize },
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
}
