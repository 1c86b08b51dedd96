//! Property accuracy at shrinking training sizes, averaged over seeds.

use std::collections::BTreeMap;

use ncb_core::classifier::{evaluate_property_accuracy, ClassifierError, PropertyEvalConfig, PropertyReport};
use ncb_core::corpus::RetrievalCorpus;
use ncb_core::encoding::{FactorSchema, LabeledScene};
use serde::{Deserialize, Serialize};

pub const Q1_FORMAT: &str = "ncb-q1-report";
pub const Q1_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Q1Row {
    pub n_train: usize,
    /// Percent, over seeds.
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Percent per categorical factor, averaged over seeds.
    pub per_category: BTreeMap<String, f64>,
    pub runs: Vec<PropertyReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Q1Report {
    pub format: String,
    pub schema_version: u32,
    pub corpus_version: u64,
    pub corpus_fingerprint: String,
    pub n_test: usize,
    pub seeds: Vec<u64>,
    pub rows: Vec<Q1Row>,
}

impl Q1Report {
    pub fn to_json(&self) -> String {
        crate::files::to_pretty_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let r: Q1Report = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if r.format != Q1_FORMAT || r.schema_version != Q1_SCHEMA_VERSION {
            return Err(format!("expected {Q1_FORMAT} v{Q1_SCHEMA_VERSION}"));
        }
        Ok(r)
    }

    pub fn row(&self, n_train: usize) -> Option<&Q1Row> {
        self.rows.iter().find(|r| r.n_train == n_train)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("n_train\tmean\tstd");
        let cats: Vec<&String> = self.rows.first().map(|r| r.per_category.keys().collect()).unwrap_or_default();
        for c in &cats {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{}\t{:.2}\t{:.2}", r.n_train, r.mean_accuracy, r.std_accuracy));
            for c in &cats {
                out.push_str(&format!("\t{:.2}", r.per_category[*c]));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every `(n_train, seed)` pair. The test split depends on the seed
/// only, so all sizes of one seed are scored on the same objects.
pub fn evaluate_q1(
    corpus: &RetrievalCorpus,
    dataset: &[LabeledScene],
    schema: &FactorSchema,
    sizes: &[usize],
    n_test: usize,
    seeds: &[u64],
) -> Result<Q1Report, ClassifierError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n_train in sizes {
        let runs = seeds
            .iter()
            .map(|&s| evaluate_property_accuracy(corpus, dataset, schema, &PropertyEvalConfig::new(n_train, n_test, s)))
            .collect::<Result<Vec<_>, _>>()?;
        let accs: Vec<f64> = runs.iter().map(|r| 100.0 * r.mean_accuracy).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&accs);
        let mut per_category = BTreeMap::new();
        for r in &runs {
            for (c, a) in &r.per_category {
                *per_category.entry(c.clone()).or_insert(0.0) += 100.0 * a / runs.len() as f64;
            }
        }
        rows.push(Q1Row {
            n_train,
            mean_accuracy,
            std_accuracy,
            per_category,
            runs,
        });
    }
    Ok(Q1Report {
        format: Q1_FORMAT.to_owned(),
        schema_version: Q1_SCHEMA_VERSION,
        corpus_version: corpus.version(),
        corpus_fingerprint: corpus.fingerprint(),
        n_test,
        seeds: seeds.to_vec(),
        rows,
    })
}

/// Population standard deviation, matching the Sudoku report.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}
