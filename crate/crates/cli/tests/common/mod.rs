#![allow(dead_code)]

use ncb_core::corpus::{fit_corpus, FitConfig, RetrievalCorpus};
use ncb_core::encoding::{generate_scenes, EncoderConfig, FactorSchema, LabeledScene, SceneSpec, SyntheticEncoder};

pub fn easy_encoder(spread: f64, dup: usize, block_dim: usize, seed: u64) -> SyntheticEncoder {
    let mut config = EncoderConfig::clevr_easy(seed);
    config.cluster_spread = spread;
    config.duplicate_clusters_per_value = dup;
    config.block_dim = block_dim;
    SyntheticEncoder::new(FactorSchema::clevr_easy(), config).unwrap()
}

pub fn single_objects(encoder: &SyntheticEncoder, count: usize, seed: u64) -> Vec<LabeledScene> {
    generate_scenes(encoder, &SceneSpec::single_object(count, seed)).unwrap()
}

pub fn fit(scenes: &[LabeledScene]) -> RetrievalCorpus {
    let refs: Vec<_> = scenes.iter().map(|s| &s.encoding).collect();
    fit_corpus(&refs, &FitConfig::default()).unwrap().corpus
}

/// Block that holds `category` in `encoder`.
pub fn block_of(encoder: &SyntheticEncoder, category: &str) -> usize {
    encoder.config().factor_to_block[category]
}
