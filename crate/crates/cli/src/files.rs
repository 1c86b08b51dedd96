//! Reading and writing the artifacts the commands exchange.

use std::fs;
use std::path::{Path, PathBuf};

use ncb_core::corpus::{read_corpus, RetrievalCorpus};
use ncb_core::encoding::io::{read_encoder, read_encodings, EncodingHeader};
use ncb_core::encoding::{LabeledScene, SyntheticEncoder};
use ncb_core::revision::{FeedbackDocument, RevisionLog};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONCEPTS_FORMAT: &str = "ncb-concepts";
pub const CONCEPTS_SCHEMA_VERSION: u32 = 1;

/// Writes through a temporary sibling so readers never see half a file.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(e).context(dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| CliError::io(e).context(tmp.display()))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(e).context(path.display()))
}

pub fn load_corpus(path: &Path) -> CliResult<RetrievalCorpus> {
    read_corpus(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn save_corpus(path: &Path, corpus: &RetrievalCorpus) -> CliResult<()> {
    write_atomic(path, corpus.to_json())
}

pub fn load_scenes(path: &Path) -> CliResult<(EncodingHeader, Vec<LabeledScene>)> {
    read_encodings(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn load_encoder(path: &Path) -> CliResult<SyntheticEncoder> {
    read_encoder(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn load_feedback(path: &Path) -> CliResult<FeedbackDocument> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(e).context(path.display()))?;
    FeedbackDocument::from_json(&text).map_err(|e| CliError::from(e).context(path.display()))
}

/// A missing log file reads as an empty log.
pub fn load_log(path: &Path) -> CliResult<RevisionLog> {
    match fs::read_to_string(path) {
        Ok(text) => RevisionLog::from_jsonl(&text).map_err(|e| CliError::validation(e).context(path.display())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(RevisionLog::new()),
        Err(e) => Err(CliError::io(e).context(path.display())),
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(e).context(path.display()))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(e).context(path.display()))
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// First line of a concepts file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptsHeader {
    pub format: String,
    pub schema_version: u32,
    pub corpus_version: u64,
    pub corpus_fingerprint: String,
    pub scenes: usize,
}

/// Current time as RFC 3339, for `--stamp`.
pub fn now_stamp() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .expect("current time formats")
}

/// Stamp used when wall-clock time is not requested, keeping output
/// byte-reproducible.
pub const NO_STAMP: &str = "unstamped";
