use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{count_solutions, peers, DigitGrid, CELLS};
use super::SudokuError;
use crate::encoding::{
    EncoderConfig, EncodingError, FactorSchema, GroundTruthObject, LabeledScene, SyntheticEncoder,
};
use crate::seed;

/// Most empty cells a generated puzzle supports.
pub const MAX_EMPTY: usize = 50;
/// Most candidate examples stored per digit.
pub const MAX_EXAMPLES: usize = 10;
pub const K_VALUES: [usize; 3] = [10, 30, 50];
pub const N_VALUES: [usize; 4] = [1, 3, 5, 10];
/// Desk-scale number of puzzles per configuration.
pub const DEFAULT_COUNT: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SudokuVariant {
    /// Digits differ by shape and color.
    Easy,
    /// Digits differ by shape, color, size and material.
    Full,
}

impl SudokuVariant {
    pub const ALL: [SudokuVariant; 2] = [SudokuVariant::Easy, SudokuVariant::Full];

    pub fn name(self) -> &'static str {
        match self {
            SudokuVariant::Easy => "easy",
            SudokuVariant::Full => "full",
        }
    }

    pub fn schema(self) -> FactorSchema {
        match self {
            SudokuVariant::Easy => FactorSchema::clevr_easy(),
            SudokuVariant::Full => FactorSchema::clevr(),
        }
    }

    pub fn encoder_config(self, seed: u64) -> EncoderConfig {
        match self {
            SudokuVariant::Easy => EncoderConfig::clevr_easy(seed),
            SudokuVariant::Full => EncoderConfig::clevr(seed),
        }
    }

    /// Categories whose values identify a digit.
    pub fn digit_categories(self) -> &'static [&'static str] {
        match self {
            SudokuVariant::Easy => &["shape", "color"],
            SudokuVariant::Full => &["shape", "color", "size", "material"],
        }
    }

    fn tag(self) -> u64 {
        match self {
            SudokuVariant::Easy => 0xEA5E,
            SudokuVariant::Full => 0xF011,
        }
    }
}

impl std::str::FromStr for SudokuVariant {
    type Err = SudokuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(SudokuVariant::Easy),
            "full" => Ok(SudokuVariant::Full),
            other => Err(SudokuError::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

/// An object and the seed its scene is encoded with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub object: GroundTruthObject,
    pub scene_seed: u64,
}

impl ObjectSpec {
    pub fn encode(&self, encoder: &SyntheticEncoder) -> Result<LabeledScene, EncodingError> {
        encoder.encode_scene(std::slice::from_ref(&self.object), self.scene_seed)
    }
}

/// Everything shared by the `(K, N)` configurations of one puzzle: the
/// solution, the order in which cells are emptied, the digit map and one
/// object per cell and per example. Any prefix of `removal_order` leaves a
/// puzzle with a unique solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuzzleBase {
    pub variant: SudokuVariant,
    pub index: usize,
    pub seed: u64,
    pub solution: DigitGrid,
    pub removal_order: Vec<usize>,
    /// Attribute combination of digit `d` at index `d - 1`.
    pub digit_map: Vec<BTreeMap<String, String>>,
    pub cells: Vec<ObjectSpec>,
    /// Candidate examples of digit `d` at index `d - 1`.
    pub examples: Vec<Vec<ObjectSpec>>,
}

/// One puzzle at one `(K, N)` configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SudokuSample {
    pub base: Arc<PuzzleBase>,
    pub k: usize,
    pub n_examples: usize,
}

impl SudokuSample {
    pub fn new(base: Arc<PuzzleBase>, k: usize, n_examples: usize) -> Result<Self, SudokuError> {
        check_config(k, n_examples)?;
        Ok(SudokuSample { base, k, n_examples })
    }

    pub fn solution(&self) -> &DigitGrid {
        &self.base.solution
    }

    /// The initial state: the solution with the first `k` removal cells emptied.
    pub fn puzzle(&self) -> DigitGrid {
        let mut g = self.base.solution;
        for &c in &self.base.removal_order[..self.k] {
            g.set(c, 0);
        }
        g
    }

    pub fn given_cells(&self) -> Vec<usize> {
        let puzzle = self.puzzle();
        (0..CELLS).filter(|&c| puzzle.get(c) != 0).collect()
    }

    pub fn examples(&self, digit: u8) -> &[ObjectSpec] {
        &self.base.examples[digit as usize - 1][..self.n_examples]
    }
}

pub(crate) fn check_config(k: usize, n_examples: usize) -> Result<(), SudokuError> {
    if k > MAX_EMPTY {
        return Err(SudokuError::InvalidConfig(format!("K = {k} exceeds {MAX_EMPTY}")));
    }
    if n_examples == 0 || n_examples > MAX_EXAMPLES {
        return Err(SudokuError::InvalidConfig(format!(
            "N = {n_examples} outside 1..={MAX_EXAMPLES}"
        )));
    }
    Ok(())
}

/// A random complete grid, by backtracking with shuffled digit order.
pub fn random_solution<R: Rng>(rng: &mut R) -> DigitGrid {
    fn fill<R: Rng>(g: &mut DigitGrid, cell: usize, rng: &mut R) -> bool {
        if cell == CELLS {
            return true;
        }
        let used = peers(cell).iter().fold(0u16, |m, &p| m | 1 << g.get(p));
        let mut digits: Vec<u8> = (1..=9).filter(|d| used & (1 << d) == 0).collect();
        digits.shuffle(rng);
        for d in digits {
            g.set(cell, d);
            if fill(g, cell + 1, rng) {
                return true;
            }
        }
        g.set(cell, 0);
        false
    }
    let mut g = DigitGrid::empty();
    assert!(fill(&mut g, 0, rng), "an empty grid always has a completion");
    g
}

/// Greedily empties cells in a random order, skipping any removal that
/// would admit a second solution, until `target` cells are empty.
fn removal_order<R: Rng>(solution: &DigitGrid, target: usize, rng: &mut R) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..CELLS).collect();
    order.shuffle(rng);
    let mut puzzle = *solution;
    let mut removed = Vec::with_capacity(target);
    for c in order {
        if removed.len() == target {
            break;
        }
        puzzle.set(c, 0);
        if count_solutions(&puzzle, 2) == 1 {
            removed.push(c);
        } else {
            puzzle.set(c, solution.get(c));
        }
    }
    (removed.len() == target).then_some(removed)
}

fn digit_map<R: Rng>(variant: SudokuVariant, rng: &mut R) -> Vec<BTreeMap<String, String>> {
    let schema = variant.schema();
    let mut combos: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for &name in variant.digit_categories() {
        let values = schema.category(name).and_then(|c| c.values()).expect("variant category");
        combos = combos
            .into_iter()
            .flat_map(|m| {
                values.iter().map(move |v| {
                    let mut m = m.clone();
                    m.insert(name.to_owned(), v.clone());
                    m
                })
            })
            .collect();
    }
    combos.shuffle(rng);
    combos.truncate(9);
    combos
}

fn object_for<R: Rng>(combo: &BTreeMap<String, String>, rng: &mut R) -> GroundTruthObject {
    let mut o = GroundTruthObject::new();
    for (k, v) in combo {
        o = o.with(k, v);
    }
    o.with_position("position", rng.random::<f64>(), rng.random::<f64>())
}

/// Generates puzzle number `index` of a dataset. Deterministic in
/// `(variant, index, seed)`.
pub fn generate_base(variant: SudokuVariant, index: usize, seed: u64) -> PuzzleBase {
    let puzzle_seed = seed::mix(seed, seed::mix(variant.tag(), index as u64));
    let mut rng = seed::stream(puzzle_seed, 0x9A1E);
    let (solution, removal_order) = loop {
        let solution = random_solution(&mut rng);
        if let Some(order) = removal_order(&solution, MAX_EMPTY, &mut rng) {
            break (solution, order);
        }
    };
    let digit_map = digit_map(variant, &mut rng);
    let mut next_scene = 0u64;
    let mut spec = |combo: &BTreeMap<String, String>, rng: &mut rand_chacha::ChaCha8Rng| {
        next_scene += 1;
        ObjectSpec {
            object: object_for(combo, rng),
            scene_seed: seed::mix(puzzle_seed, next_scene),
        }
    };
    let cells = (0..CELLS)
        .map(|c| spec(&digit_map[solution.get(c) as usize - 1], &mut rng))
        .collect();
    let examples = digit_map
        .iter()
        .map(|combo| (0..MAX_EXAMPLES).map(|_| spec(combo, &mut rng)).collect())
        .collect();
    PuzzleBase {
        variant,
        index,
        seed,
        solution,
        removal_order,
        digit_map,
        cells,
        examples,
    }
}

/// Puzzles `0..count` of a dataset, generated in parallel.
pub fn generate_bases(variant: SudokuVariant, count: usize, seed: u64) -> Vec<Arc<PuzzleBase>> {
    (0..count)
        .into_par_iter()
        .map(|i| Arc::new(generate_base(variant, i, seed)))
        .collect()
}

/// `count` puzzles with `k` empty cells and `n_examples` examples per digit.
pub fn generate_dataset(
    variant: SudokuVariant,
    k: usize,
    n_examples: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SudokuSample>, SudokuError> {
    check_config(k, n_examples)?;
    if count == 0 {
        return Err(SudokuError::InvalidConfig("count must be at least 1".into()));
    }
    generate_bases(variant, count, seed)
        .into_iter()
        .map(|b| SudokuSample::new(b, k, n_examples))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sudoku::solve_grid;

    #[test]
    fn samples_satisfy_their_invariants() {
        for variant in SudokuVariant::ALL {
            let base = Arc::new(generate_base(variant, 0, 7));
            assert!(base.solution.is_solved());
            let combos: std::collections::BTreeSet<_> = base.digit_map.iter().collect();
            assert_eq!(combos.len(), 9);
            for k in K_VALUES {
                let s = SudokuSample::new(base.clone(), k, 3).unwrap();
                let p = s.puzzle();
                assert_eq!(p.filled(), 81 - k);
                assert_eq!(solve_grid(&p), Some(base.solution));
            }
            for (c, spec) in base.cells.iter().enumerate() {
                let combo = &base.digit_map[base.solution.get(c) as usize - 1];
                for (cat, v) in combo {
                    assert_eq!(spec.object.label(cat), Some(v.as_str()));
                }
            }
            let seeds: std::collections::BTreeSet<u64> = base
                .cells
                .iter()
                .chain(base.examples.iter().flatten())
                .map(|s| s.scene_seed)
                .collect();
            assert_eq!(seeds.len(), 81 + 90);
        }
    }

    #[test]
    fn easy_digits_use_shape_and_color_only() {
        let base = generate_base(SudokuVariant::Easy, 3, 1);
        for combo in &base.digit_map {
            assert_eq!(combo.keys().map(String::as_str).collect::<Vec<_>>(), ["color", "shape"]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_base(SudokuVariant::Full, 5, 11);
        let b = generate_base(SudokuVariant::Full, 5, 11);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(a.solution, generate_base(SudokuVariant::Full, 6, 11).solution);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate_dataset(SudokuVariant::Easy, 60, 1, 1, 0).is_err());
        assert!(generate_dataset(SudokuVariant::Easy, 10, 0, 1, 0).is_err());
        assert!(generate_dataset(SudokuVariant::Easy, 10, 1, 0, 0).is_err());
    }
}
