//! Discrete, inspectable concepts from continuous block-slot encodings.
//!
//! The crate distills a retrieval corpus from clustered block encodings,
//! maps new encodings to concept ids by nearest-neighbor lookup, and lets a
//! human inspect and edit the resulting concept space. Symbolic consumers
//! (decision trees, a Sudoku solver) sit on top of the discrete output.

pub mod classifier;
pub mod clustering;
pub mod corpus;
pub mod encoding;
pub mod inspection;
pub mod revision;
pub mod sudoku;

mod seed;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/encodings.md")]
    mod encodings {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/inspection.md")]
    mod inspection {}
    #[doc = include_str!("../../../book/src/revision.md")]
    mod revision {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/sudoku.md")]
    mod sudoku {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
