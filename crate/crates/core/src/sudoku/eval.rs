use std::sync::Arc;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{PuzzleBase, SudokuSample, SudokuVariant, MAX_EXAMPLES};
use super::grid::{peers, solve_grid, DigitGrid, CELLS};
use super::SudokuError;
use crate::classifier::{ground_truth_features, DecisionTree, MultiHotLayout};
use crate::corpus::{InferenceConfig, RetrievalCorpus, Selector};
use crate::encoding::{LabeledScene, SlotSelection, SyntheticEncoder};
use crate::seed;

/// Classifier seeds averaged per puzzle.
pub const DEFAULT_SEEDS: usize = 10;

/// Binary feature vectors of every cell object and every example object of
/// one puzzle. Computed once and shared by all `(K, N)` configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct PuzzleFeatures {
    pub cells: Vec<Vec<bool>>,
    /// Examples of digit `d` at index `d - 1`.
    pub examples: Vec<Vec<Vec<bool>>>,
}

/// Encoded scenes of one puzzle: cells first, then examples digit by digit.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPuzzle {
    pub cells: Vec<LabeledScene>,
    pub examples: Vec<Vec<LabeledScene>>,
}

impl EncodedPuzzle {
    pub fn encode(base: &PuzzleBase, encoder: &SyntheticEncoder) -> Result<Self, SudokuError> {
        Ok(EncodedPuzzle {
            cells: base.cells.iter().map(|s| s.encode(encoder)).collect::<Result<_, _>>()?,
            examples: base
                .examples
                .iter()
                .map(|d| d.iter().map(|s| s.encode(encoder)).collect::<Result<_, _>>())
                .collect::<Result<_, _>>()?,
        })
    }

    /// Flat scene list in file order.
    pub fn scenes(&self) -> impl Iterator<Item = &LabeledScene> {
        self.cells.iter().chain(self.examples.iter().flatten())
    }

    pub fn from_scenes(mut scenes: Vec<LabeledScene>) -> Result<Self, SudokuError> {
        if scenes.len() != CELLS + 9 * MAX_EXAMPLES {
            return Err(SudokuError::Format(format!(
                "puzzle needs {} scenes, found {}",
                CELLS + 9 * MAX_EXAMPLES,
                scenes.len()
            )));
        }
        let rest = scenes.split_off(CELLS);
        let mut it = rest.into_iter();
        let examples = (0..9).map(|_| it.by_ref().take(MAX_EXAMPLES).collect()).collect();
        Ok(EncodedPuzzle {
            cells: scenes,
            examples,
        })
    }
}

/// One-hot ground-truth attributes: the perfect-concept baseline.
pub fn ground_truth_puzzle_features(base: &PuzzleBase) -> Result<PuzzleFeatures, SudokuError> {
    let schema = base.variant.schema();
    Ok(PuzzleFeatures {
        cells: base
            .cells
            .iter()
            .map(|s| ground_truth_features(&schema, &s.object))
            .collect::<Result<_, _>>()?,
        examples: base
            .examples
            .iter()
            .map(|d| d.iter().map(|s| ground_truth_features(&schema, &s.object)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?,
    })
}

/// Multi-hot concept encodings read off the retrieval corpus.
pub fn corpus_puzzle_features(
    encoded: &EncodedPuzzle,
    corpus: &RetrievalCorpus,
    slot_mode: SlotSelection,
) -> Result<PuzzleFeatures, SudokuError> {
    let layout = MultiHotLayout::from_corpus(corpus);
    let config = InferenceConfig {
        slot_mode,
        selector: Selector::Nearest,
    };
    let features = |scene: &LabeledScene| -> Result<Vec<bool>, SudokuError> {
        let slots = corpus.infer(&scene.encoding, &config)?;
        let first = slots.first().ok_or(SudokuError::NoObjectSlot)?;
        Ok(layout.encode(first)?)
    };
    Ok(PuzzleFeatures {
        cells: encoded.cells.iter().map(features).collect::<Result<_, _>>()?,
        examples: encoded
            .examples
            .iter()
            .map(|d| d.iter().map(features).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?,
    })
}

/// Where concept features come from.
#[derive(Clone, Copy, Debug)]
pub enum ConceptSource<'a> {
    GroundTruth,
    Corpus {
        corpus: &'a RetrievalCorpus,
        encoder: &'a SyntheticEncoder,
        slot_mode: SlotSelection,
    },
}

impl ConceptSource<'_> {
    pub fn features(&self, base: &PuzzleBase) -> Result<PuzzleFeatures, SudokuError> {
        match self {
            ConceptSource::GroundTruth => ground_truth_puzzle_features(base),
            ConceptSource::Corpus {
                corpus,
                encoder,
                slot_mode,
            } => corpus_puzzle_features(&EncodedPuzzle::encode(base, encoder)?, corpus, *slot_mode),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    /// The classified grid has no solution.
    Contradiction,
    /// The solver completed the classified grid, but not to the reference
    /// solution; some given was misread.
    Misclassification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuzzleOutcome {
    pub seed: u64,
    pub solved: bool,
    pub misclassified: usize,
    pub given: usize,
    pub digit_error_rate: f64,
    pub failure_reason: FailureReason,
}

/// Fits the digit tree on the candidate examples and reads every given cell.
pub fn classify_givens(sample: &SudokuSample, features: &PuzzleFeatures, tree_seed: u64) -> Result<DigitGrid, SudokuError> {
    let mut xs = Vec::with_capacity(9 * sample.n_examples);
    let mut ys = Vec::with_capacity(9 * sample.n_examples);
    for d in 1..=9u8 {
        let examples = features
            .examples
            .get(d as usize - 1)
            .map(|e| &e[..sample.n_examples.min(e.len())])
            .filter(|e| !e.is_empty())
            .ok_or(SudokuError::NoExamples { digit: d })?;
        for x in examples {
            xs.push(x.clone());
            ys.push(d as u32);
        }
    }
    let tree = DecisionTree::fit(&xs, &ys, Some(tree_seed))?;
    let mut grid = DigitGrid::empty();
    for c in sample.given_cells() {
        grid.set(c, tree.predict(&features.cells[c]) as u8);
    }
    Ok(grid)
}

/// Solves a classified grid and compares against the reference.
pub fn judge(sample: &SudokuSample, classified: &DigitGrid, seed: u64) -> PuzzleOutcome {
    let puzzle = sample.puzzle();
    let given = puzzle.filled();
    let misclassified = (0..CELLS)
        .filter(|&c| puzzle.get(c) != 0 && classified.get(c) != puzzle.get(c))
        .count();
    let (solved, failure_reason) = match solve_grid(classified) {
        None => (false, FailureReason::Contradiction),
        Some(s) if s == *sample.solution() => (true, FailureReason::None),
        Some(_) => (false, FailureReason::Misclassification),
    };
    PuzzleOutcome {
        seed,
        solved,
        misclassified,
        given,
        digit_error_rate: if given == 0 {
            0.0
        } else {
            misclassified as f64 / given as f64
        },
        failure_reason,
    }
}

/// Runs the full classify-then-solve protocol once per seed in `0..seeds`.
pub fn solve_sample(sample: &SudokuSample, features: &PuzzleFeatures, seeds: usize) -> Result<Vec<PuzzleOutcome>, SudokuError> {
    (0..seeds as u64)
        .map(|s| Ok(judge(sample, &classify_givens(sample, features, s)?, s)))
        .collect()
}

/// Overwrites one filled cell with a digit already present among its filled
/// peers, so the grid breaks a constraint. Returns the cell changed.
pub fn corrupt_one_given<R: rand::Rng>(grid: &mut DigitGrid, rng: &mut R) -> Option<usize> {
    let candidates: Vec<(usize, Vec<u8>)> = (0..CELLS)
        .filter(|&c| grid.get(c) != 0)
        .map(|c| {
            let mut ds: Vec<u8> = peers(c)
                .iter()
                .map(|&p| grid.get(p))
                .filter(|&d| d != 0 && d != grid.get(c))
                .collect();
            ds.sort_unstable();
            ds.dedup();
            (c, ds)
        })
        .filter(|(_, ds)| !ds.is_empty())
        .collect();
    let (cell, digits) = candidates.choose(rng)?;
    grid.set(*cell, *digits.choose(rng).expect("non-empty"));
    Some(*cell)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: SudokuVariant,
    pub pipeline: String,
    pub k: usize,
    pub n_examples: usize,
    pub count: usize,
    pub seeds: usize,
    /// Percent of puzzles solved, mean and standard deviation over seeds.
    pub solved_mean: f64,
    pub solved_std: f64,
    /// Percent of misread given cells, mean and standard deviation over seeds.
    pub digit_error_mean: f64,
    pub digit_error_std: f64,
}

pub const REPORT_FORMAT: &str = "ncb-sudoku-report";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub format: String,
    pub schema_version: u32,
    pub rows: Vec<ReportRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluates every `(K, N)` pair over the given puzzles. Features are
/// computed once per puzzle.
pub fn evaluate_suite(
    bases: &[Arc<PuzzleBase>],
    source: ConceptSource<'_>,
    pipeline: &str,
    ks: &[usize],
    ns: &[usize],
    seeds: usize,
) -> Result<SuiteReport, SudokuError> {
    let Some(first) = bases.first() else {
        return Err(SudokuError::EmptyDataset);
    };
    let variant = first.variant;
    let features: Vec<PuzzleFeatures> = bases
        .par_iter()
        .map(|b| source.features(b))
        .collect::<Result<_, _>>()?;
    evaluate_features(bases, &features, variant, pipeline, ks, ns, seeds)
}

/// Like [`evaluate_suite`] with precomputed features, aligned with `bases`.
pub fn evaluate_features(
    bases: &[Arc<PuzzleBase>],
    features: &[PuzzleFeatures],
    variant: SudokuVariant,
    pipeline: &str,
    ks: &[usize],
    ns: &[usize],
    seeds: usize,
) -> Result<SuiteReport, SudokuError> {
    if bases.is_empty() {
        return Err(SudokuError::EmptyDataset);
    }
    if seeds == 0 {
        return Err(SudokuError::InvalidConfig("at least one seed is needed".into()));
    }
    let mut rows = Vec::new();
    for &k in ks {
        for &n in ns {
            let outcomes: Vec<Vec<PuzzleOutcome>> = bases
                .par_iter()
                .zip(features)
                .map(|(b, f)| solve_sample(&SudokuSample::new(b.clone(), k, n)?, f, seeds))
                .collect::<Result<_, _>>()?;
            let per_seed = |f: &dyn Fn(&PuzzleOutcome) -> f64| -> Vec<f64> {
                (0..seeds)
                    .map(|s| 100.0 * outcomes.iter().map(|o| f(&o[s])).sum::<f64>() / outcomes.len() as f64)
                    .collect()
            };
            let (solved_mean, solved_std) = mean_std(&per_seed(&|o| o.solved as u8 as f64));
            let (digit_error_mean, digit_error_std) = mean_std(&per_seed(&|o| o.digit_error_rate));
            rows.push(ReportRow {
                variant,
                pipeline: pipeline.to_owned(),
                k,
                n_examples: n,
                count: bases.len(),
                seeds,
                solved_mean,
                solved_std,
                digit_error_mean,
                digit_error_std,
            });
        }
    }
    Ok(SuiteReport {
        format: REPORT_FORMAT.to_owned(),
        schema_version: REPORT_SCHEMA_VERSION,
        rows,
    })
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SudokuError> {
        let r: SuiteReport = serde_json::from_str(text).map_err(|e| SudokuError::Format(e.to_string()))?;
        if r.format != REPORT_FORMAT || r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(SudokuError::Format(format!(
                "expected {REPORT_FORMAT} v{REPORT_SCHEMA_VERSION}"
            )));
        }
        Ok(r)
    }

    /// Tab-separated table: one line per (variant, pipeline, K), one
    /// column per N, cells "solved mean ± std".
    pub fn to_table(&self) -> String {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n_examples).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut out = String::from("variant\tpipeline\tK");
        for n in &ns {
            out.push_str(&format!("\tN={n}"));
        }
        out.push('\n');
        let mut keys: Vec<(SudokuVariant, &str, usize)> =
            self.rows.iter().map(|r| (r.variant, r.pipeline.as_str(), r.k)).collect();
        keys.dedup();
        for (variant, pipeline, k) in keys {
            out.push_str(&format!("{}\t{pipeline}\t{k}", variant.name()));
            for n in &ns {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| r.variant == variant && r.pipeline == pipeline && r.k == k && r.n_examples == *n)
                    .map(|r| format!("{:.2} ± {:.2}", r.solved_mean, r.solved_std))
                    .unwrap_or_else(|| "-".into());
                out.push('\t');
                out.push_str(&cell);
            }
            out.push('\n');
        }
        out
    }
}

/// Seeded stream for corruption trials.
pub fn corruption_rng(seed: u64, trial: u64) -> rand_chacha::ChaCha8Rng {
    seed::stream(seed, seed::mix(0xC0_4409, trial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sudoku::generate_bases;

    #[test]
    fn ground_truth_pipeline_solves_everything() {
        let bases = generate_bases(SudokuVariant::Easy, 4, 2);
        let r = evaluate_suite(&bases, ConceptSource::GroundTruth, "gt", &[10, 50], &[1, 10], 3).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows.iter().all(|row| row.solved_mean == 100.0 && row.digit_error_mean == 0.0));
        assert_eq!(SuiteReport::from_json(&r.to_json()).unwrap(), r);
        assert_eq!(r.to_table().lines().count(), 3);
    }

    #[test]
    fn one_corrupted_given_is_never_solved() {
        let bases = generate_bases(SudokuVariant::Full, 3, 4);
        for (i, b) in bases.iter().enumerate() {
            let sample = SudokuSample::new(b.clone(), 30, 1).unwrap();
            let features = ground_truth_puzzle_features(b).unwrap();
            let mut grid = classify_givens(&sample, &features, 0).unwrap();
            corrupt_one_given(&mut grid, &mut corruption_rng(1, i as u64)).unwrap();
            let outcome = judge(&sample, &grid, 0);
            assert!(!outcome.solved);
            assert_eq!(outcome.misclassified, 1);
        }
    }

    #[test]
    fn encoded_puzzle_layout() {
        let base = generate_bases(SudokuVariant::Easy, 1, 0).pop().unwrap();
        let encoder = SyntheticEncoder::new(base.variant.schema(), base.variant.encoder_config(0)).unwrap();
        let enc = EncodedPuzzle::encode(&base, &encoder).unwrap();
        let scenes: Vec<LabeledScene> = enc.scenes().cloned().collect();
        assert_eq!(EncodedPuzzle::from_scenes(scenes).unwrap(), enc);
    }
}
