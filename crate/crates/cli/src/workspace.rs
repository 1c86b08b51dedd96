//! A manifest tying together the artifacts of one experiment.
//!
//! Paths are stored relative to the manifest's directory. Opening a
//! workspace checks that every referenced file exists and parses.

use std::path::{Path, PathBuf};

use ncb_core::corpus::RetrievalCorpus;
use ncb_core::encoding::{LabeledScene, SyntheticEncoder};
use ncb_core::revision::RevisionLog;
use ncb_core::sudoku::io::SudokuDataset;
use ncb_core::sudoku::SuiteReport;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{load_corpus, load_encoder, load_log, load_scenes, read_json, to_pretty_json, write_atomic};
use crate::q1::Q1Report;

pub const WORKSPACE_FORMAT: &str = "ncb-workspace";
pub const WORKSPACE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    pub format: String,
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encodings: Option<PathBuf>,
    /// Corpus files, oldest first. The last one is current.
    #[serde(default)]
    pub corpora: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision_log: Option<PathBuf>,
    /// Sudoku dataset roots.
    #[serde(default)]
    pub datasets: Vec<PathBuf>,
    /// Sudoku or property-accuracy reports.
    #[serde(default)]
    pub reports: Vec<PathBuf>,
}

/// Parsed contents of a workspace.
pub struct Workspace {
    pub root: PathBuf,
    pub manifest: WorkspaceManifest,
    pub encoder: Option<SyntheticEncoder>,
    pub scenes: Vec<LabeledScene>,
    pub corpus: Option<RetrievalCorpus>,
    pub log: RevisionLog,
    pub datasets: Vec<SudokuDataset>,
}

impl WorkspaceManifest {
    pub fn new() -> Self {
        WorkspaceManifest {
            format: WORKSPACE_FORMAT.to_owned(),
            schema_version: WORKSPACE_SCHEMA_VERSION,
            ..Default::default()
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, to_pretty_json(self))
    }

    /// Path of the current corpus, resolved against `root`.
    pub fn current_corpus(&self, root: &Path) -> Option<PathBuf> {
        self.corpora.last().map(|p| root.join(p))
    }
}

impl Workspace {
    pub fn open(path: &Path) -> CliResult<Self> {
        let manifest: WorkspaceManifest = read_json(path)?;
        if manifest.format != WORKSPACE_FORMAT || manifest.schema_version != WORKSPACE_SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "{}: expected {WORKSPACE_FORMAT} v{WORKSPACE_SCHEMA_VERSION}",
                path.display()
            )));
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let at = |p: &PathBuf| root.join(p);

        let encoder = manifest.encoder.as_ref().map(|p| load_encoder(&at(p))).transpose()?;
        let scenes = match &manifest.encodings {
            Some(p) => load_scenes(&at(p))?.1,
            None => Vec::new(),
        };
        let mut corpus = None;
        for p in &manifest.corpora {
            corpus = Some(load_corpus(&at(p))?);
        }
        let log = match &manifest.revision_log {
            Some(p) => load_log(&at(p))?,
            None => RevisionLog::new(),
        };
        let datasets = manifest
            .datasets
            .iter()
            .map(|p| SudokuDataset::open(&at(p)).map_err(|e| CliError::from(e).context(at(p).display())))
            .collect::<CliResult<_>>()?;
        for p in &manifest.reports {
            check_report(&at(p))?;
        }
        Ok(Workspace {
            root,
            manifest,
            encoder,
            scenes,
            corpus,
            log,
            datasets,
        })
    }
}

fn check_report(path: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(e).context(path.display()))?;
    let ok = SuiteReport::from_json(&text).is_ok() || Q1Report::from_json(&text).is_ok();
    if ok {
        Ok(())
    } else {
        Err(CliError::validation(format!("{}: not a known report", path.display())))
    }
}
