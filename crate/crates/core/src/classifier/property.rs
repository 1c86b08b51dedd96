use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, DecisionTree, MultiHotLayout};
use crate::corpus::{RetrievalCorpus, Selector};
use crate::encoding::{FactorSchema, LabeledScene};
use crate::seed;

/// Training sizes of the small-data protocol.
pub const PROTOCOL_TRAIN_SIZES: [usize; 4] = [2000, 200, 50, 20];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyEvalConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Drives the train/test split.
    pub seed: u64,
    /// Tie-break seed handed to each tree. `new` uses the split seed, so
    /// equal-gain splits do not always favor the lowest block.
    #[serde(default)]
    pub tree_seed: Option<u64>,
    /// Permutes training labels; a sanity baseline.
    #[serde(default)]
    pub shuffle_labels: bool,
}

impl PropertyEvalConfig {
    pub fn new(n_train: usize, n_test: usize, seed: u64) -> Self {
        PropertyEvalConfig {
            n_train,
            n_test,
            seed,
            tree_seed: Some(seed),
            shuffle_labels: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub corpus_version: u64,
    /// Test accuracy per categorical factor, in `[0, 1]`.
    pub per_category: BTreeMap<String, f64>,
    pub mean_accuracy: f64,
}

/// Predicts every categorical factor of held-out objects from their
/// multi-hot concept encodings, one tree per factor. The test split depends
/// only on the seed and `n_test`, so runs with different `n_train` share it.
pub fn evaluate_property_accuracy(
    corpus: &RetrievalCorpus,
    dataset: &[LabeledScene],
    schema: &FactorSchema,
    config: &PropertyEvalConfig,
) -> Result<PropertyReport, ClassifierError> {
    let layout = MultiHotLayout::from_corpus(corpus);
    let mut objects = Vec::new();
    for scene in dataset {
        for (&slot, object) in scene.object_slot_ids.iter().zip(&scene.objects) {
            objects.push((&scene.encoding, slot, object));
        }
    }
    let needed = config.n_train + config.n_test;
    if objects.len() < needed || config.n_train == 0 || config.n_test == 0 {
        return Err(ClassifierError::NotEnoughObjects {
            needed: needed.max(2),
            available: objects.len(),
        });
    }
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.shuffle(&mut seed::stream(config.seed, 0x51_17));
    let test = &order[..config.n_test];
    let train = &order[config.n_test..config.n_test + config.n_train];

    let features: BTreeMap<usize, Vec<bool>> = test
        .iter()
        .chain(train)
        .map(|&i| {
            let (enc, slot, _) = objects[i];
            let c = corpus.infer_slot(enc, slot, Selector::Nearest)?;
            Ok((i, layout.encode(&c)?))
        })
        .collect::<Result<_, ClassifierError>>()?;

    let mut per_category = BTreeMap::new();
    for category in schema.categorical() {
        let label_of = |i: usize| -> Result<u32, ClassifierError> {
            objects[i]
                .2
                .label(&category.name)
                .and_then(|l| category.value_index(l))
                .map(|v| v as u32)
                .ok_or_else(|| ClassifierError::MissingCategory(category.name.clone()))
        };
        let xs: Vec<Vec<bool>> = train.iter().map(|i| features[i].clone()).collect();
        let mut ys: Vec<u32> = train.iter().map(|&i| label_of(i)).collect::<Result<_, _>>()?;
        if config.shuffle_labels {
            ys.shuffle(&mut seed::stream(config.seed, 0x5_4AFF));
        }
        let tree = DecisionTree::fit(&xs, &ys, config.tree_seed)?;
        let mut correct = 0;
        for &i in test {
            if tree.predict(&features[&i]) == label_of(i)? {
                correct += 1;
            }
        }
        per_category.insert(category.name.clone(), correct as f64 / test.len() as f64);
    }
    let mean_accuracy = per_category.values().sum::<f64>() / per_category.len().max(1) as f64;
    Ok(PropertyReport {
        n_train: config.n_train,
        n_test: config.n_test,
        seed: config.seed,
        corpus_version: corpus.version(),
        per_category,
        mean_accuracy,
    })
}
