//! Sudoku puzzles whose digits are objects: generation, the solver and the
//! classify-then-solve evaluation.

mod eval;
mod generate;
mod grid;
pub mod io;

pub use eval::{
    classify_givens, corpus_puzzle_features, corrupt_one_given, corruption_rng, evaluate_features,
    evaluate_suite, ground_truth_puzzle_features, judge, solve_sample, ConceptSource, EncodedPuzzle,
    FailureReason, PuzzleFeatures, PuzzleOutcome, ReportRow, SuiteReport, DEFAULT_SEEDS, REPORT_FORMAT,
};
pub use generate::{
    generate_base, generate_bases, generate_dataset, random_solution, ObjectSpec, PuzzleBase, SudokuSample,
    SudokuVariant, DEFAULT_COUNT, K_VALUES, MAX_EMPTY, MAX_EXAMPLES, N_VALUES,
};
pub use grid::{count_solutions, peers, solve_grid, DigitGrid, GridError, CELLS};

#[derive(Debug, thiserror::Error)]
pub enum SudokuError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("digit {digit} has no candidate examples")]
    NoExamples { digit: u8 },
    #[error("no object slot selected")]
    NoObjectSlot,
    #[error(transparent)]
    Encoding(#[from] crate::encoding::EncodingError),
    #[error(transparent)]
    EncodingIo(#[from] crate::encoding::io::EncodingIoError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Classifier(#[from] crate::classifier::ClassifierError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}
