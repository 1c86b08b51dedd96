//! Sudoku datasets on disk.
//!
//! ```text
//! <root>/dataset.json            variant, count, seed, encoder, configurations
//! <root>/puzzles/NNNNN.json      solution, removal order, digit map, objects
//! <root>/puzzles/NNNNN.enc       81 cell scenes then 9 x 10 example scenes
//! <root>/k<K>-n<N>/manifest.json variant, K, N, count, seed
//! <root>/k<K>-n<N>/samples.jsonl initial grid, solution and file references
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::eval::EncodedPuzzle;
use super::generate::{check_config, PuzzleBase, SudokuSample, SudokuVariant};
use super::grid::DigitGrid;
use super::SudokuError;
use crate::encoding::io::{read_encodings, write_encodings, EncodingHeader};
use crate::encoding::{EncoderConfig, SyntheticEncoder};

pub const DATASET_FORMAT: &str = "ncb-sudoku-dataset";
pub const CONFIG_FORMAT: &str = "ncb-sudoku-config";
pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigRef {
    pub k: usize,
    pub n_examples: usize,
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub schema_version: u32,
    pub variant: SudokuVariant,
    pub count: usize,
    pub seed: u64,
    /// Present when encodings were written.
    pub encoder: Option<EncoderConfig>,
    pub configs: Vec<ConfigRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigManifest {
    pub format: String,
    pub schema_version: u32,
    pub variant: SudokuVariant,
    pub k: usize,
    pub n_examples: usize,
    pub count: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SampleLine {
    index: usize,
    puzzle: DigitGrid,
    solution: DigitGrid,
    base: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encodings: Option<String>,
}

fn puzzle_stem(index: usize) -> String {
    format!("puzzles/{index:05}")
}

fn config_dir(k: usize, n: usize) -> String {
    format!("k{k}-n{n}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SudokuError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| SudokuError::Format(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SudokuError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SudokuError::Format(format!("{}: {e}", path.display())))
}

/// Writes puzzles and one directory per `(K, N)`. With an encoder, every
/// object is also written as an encoded scene.
pub fn write_dataset(
    root: &Path,
    bases: &[Arc<PuzzleBase>],
    seed: u64,
    encoder: Option<&SyntheticEncoder>,
    ks: &[usize],
    ns: &[usize],
) -> Result<DatasetManifest, SudokuError> {
    let variant = bases.first().ok_or(SudokuError::EmptyDataset)?.variant;
    fs::create_dir_all(root.join("puzzles"))?;
    for b in bases {
        let stem = puzzle_stem(b.index);
        write_json(&root.join(format!("{stem}.json")), b.as_ref())?;
        if let Some(encoder) = encoder {
            let encoded = EncodedPuzzle::encode(b, encoder)?;
            let cfg = encoder.config();
            let header = EncodingHeader::new(encoder.schema().clone(), cfg.n_slots, cfg.n_blocks, cfg.block_dim);
            let scenes: Vec<_> = encoded.scenes().cloned().collect();
            write_encodings(&root.join(format!("{stem}.enc")), &header, &scenes)?;
        }
    }
    let mut configs = Vec::new();
    for &k in ks {
        for &n in ns {
            check_config(k, n)?;
            let dir = config_dir(k, n);
            fs::create_dir_all(root.join(&dir))?;
            write_json(
                &root.join(&dir).join("manifest.json"),
                &ConfigManifest {
                    format: CONFIG_FORMAT.to_owned(),
                    schema_version: DATASET_SCHEMA_VERSION,
                    variant,
                    k,
                    n_examples: n,
                    count: bases.len(),
                    seed,
                },
            )?;
            let mut lines = String::new();
            for b in bases {
                let sample = SudokuSample::new(b.clone(), k, n)?;
                let stem = puzzle_stem(b.index);
                let line = SampleLine {
                    index: b.index,
                    puzzle: sample.puzzle(),
                    solution: b.solution,
                    base: format!("../{stem}.json"),
                    encodings: encoder.map(|_| format!("../{stem}.enc")),
                };
                lines.push_str(&serde_json::to_string(&line).map_err(|e| SudokuError::Format(e.to_string()))?);
                lines.push('\n');
            }
            fs::write(root.join(&dir).join("samples.jsonl"), lines)?;
            configs.push(ConfigRef { k, n_examples: n, dir });
        }
    }
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.to_owned(),
        schema_version: DATASET_SCHEMA_VERSION,
        variant,
        count: bases.len(),
        seed,
        encoder: encoder.map(|e| e.config().clone()),
        configs,
    };
    write_json(&root.join("dataset.json"), &manifest)?;
    Ok(manifest)
}

/// A dataset loaded from disk.
#[derive(Clone, Debug)]
pub struct SudokuDataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub bases: Vec<Arc<PuzzleBase>>,
}

impl SudokuDataset {
    pub fn open(root: &Path) -> Result<Self, SudokuError> {
        let manifest: DatasetManifest = read_json(&root.join("dataset.json"))?;
        if manifest.format != DATASET_FORMAT || manifest.schema_version != DATASET_SCHEMA_VERSION {
            return Err(SudokuError::Format(format!(
                "expected {DATASET_FORMAT} v{DATASET_SCHEMA_VERSION}"
            )));
        }
        let mut bases = Vec::with_capacity(manifest.count);
        for index in 0..manifest.count {
            let base: PuzzleBase = read_json(&root.join(format!("{}.json", puzzle_stem(index))))?;
            if base.variant != manifest.variant || base.index != index {
                return Err(SudokuError::Format(format!("puzzle {index} does not match the manifest")));
            }
            validate_base(&base)?;
            bases.push(Arc::new(base));
        }
        for c in &manifest.configs {
            let m: ConfigManifest = read_json(&root.join(&c.dir).join("manifest.json"))?;
            if m.format != CONFIG_FORMAT || (m.k, m.n_examples, m.variant) != (c.k, c.n_examples, manifest.variant) {
                return Err(SudokuError::Format(format!("{} disagrees with dataset.json", c.dir)));
            }
        }
        Ok(SudokuDataset {
            root: root.to_owned(),
            manifest,
            bases,
        })
    }

    pub fn encoder(&self) -> Result<Option<SyntheticEncoder>, SudokuError> {
        self.manifest
            .encoder
            .clone()
            .map(|cfg| SyntheticEncoder::new(self.manifest.variant.schema(), cfg))
            .transpose()
            .map_err(SudokuError::from)
    }

    pub fn read_encoded(&self, index: usize) -> Result<EncodedPuzzle, SudokuError> {
        let path = self.root.join(format!("{}.enc", puzzle_stem(index)));
        let (_, scenes) = read_encodings(&path)?;
        EncodedPuzzle::from_scenes(scenes)
    }
}

fn validate_base(base: &PuzzleBase) -> Result<(), SudokuError> {
    let bad = |m: &str| Err(SudokuError::Format(format!("puzzle {}: {m}", base.index)));
    if !base.solution.is_solved() {
        return bad("solution is not a valid grid");
    }
    if base.removal_order.len() != super::generate::MAX_EMPTY
        || base.cells.len() != 81
        || base.digit_map.len() != 9
        || base.examples.len() != 9
        || base.examples.iter().any(|e| e.len() != super::generate::MAX_EXAMPLES)
    {
        return bad("unexpected shape");
    }
    Ok(())
}
