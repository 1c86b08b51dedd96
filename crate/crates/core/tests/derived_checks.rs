use ncb_core::classifier::{evaluate_property_accuracy, PropertyEvalConfig};
use ncb_core::clustering::{dbcv_score, fit_hdbscan, fit_kmeans, grid_search, ClusterParams, DEFAULT_GRID};
use ncb_core::corpus::{
    distill, fit_corpus, gather_block_points, BlockCorpus, CorpusEntry, EntryKind, FitConfig, RetrievalCorpus,
};
use ncb_core::encoding::{
    generate_scenes, select_object_slots, Category, EncoderConfig, FactorSchema, LabeledScene, SceneSpec,
    SlotSelection, SyntheticEncoder,
};
use ncb_core::inspection::{comparative_inspect, implicit_inspect, similarity_inspect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn encoder(spread: f64, dup: usize, seed: u64) -> SyntheticEncoder {
    let mut cfg = EncoderConfig::clevr_easy(seed);
    cfg.cluster_spread = spread;
    cfg.duplicate_clusters_per_value = dup;
    cfg.block_dim = 16;
    SyntheticEncoder::new(FactorSchema::clevr_easy(), cfg).unwrap()
}

fn scenes(enc: &SyntheticEncoder, n: usize, seed: u64) -> Vec<LabeledScene> {
    generate_scenes(enc, &SceneSpec::single_object(n, seed)).unwrap()
}

fn fit(scenes: &[LabeledScene]) -> RetrievalCorpus {
    let refs: Vec<_> = scenes.iter().map(|s| &s.encoding).collect();
    fit_corpus(&refs, &FitConfig::default()).unwrap().corpus
}

fn dist2(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum()
}

#[test]
fn centroids_are_ten_spreads_apart() {
    let mut cfg = EncoderConfig::clevr(5);
    cfg.duplicate_clusters_per_value = 2;
    let enc = SyntheticEncoder::new(FactorSchema::clevr(), cfg.clone()).unwrap();
    let min = 10.0 * cfg.cluster_spread;
    for j in 0..cfg.n_blocks {
        let cs = enc.block_centroids(j);
        for a in 0..cs.len() {
            for b in a + 1..cs.len() {
                assert!(dist2(cs[a], cs[b]).sqrt() >= min, "block {j}: centroids {a} and {b}");
            }
        }
    }
}

#[test]
fn values_dominate_noise_in_their_block() {
    let enc = encoder(0.05, 1, 2);
    let data = scenes(&enc, 1000, 3);
    for (category, j) in [("shape", 2usize), ("color", 5)] {
        let mut groups: std::collections::BTreeMap<&str, Vec<&[f32]>> = Default::default();
        for s in &data {
            groups
                .entry(s.objects[0].label(category).unwrap())
                .or_default()
                .push(s.encoding.block(s.object_slot_ids[0], j));
        }
        let dim = 16;
        let mean = |vs: &[&[f32]]| -> Vec<f32> {
            (0..dim).map(|d| vs.iter().map(|v| v[d]).sum::<f32>() / vs.len() as f32).collect()
        };
        let all: Vec<&[f32]> = groups.values().flatten().copied().collect();
        let grand = mean(&all);
        let (mut between, mut within) = (0.0, 0.0);
        for vs in groups.values() {
            let m = mean(vs);
            between += vs.len() as f64 * dist2(&m, &grand);
            within += vs.iter().map(|v| dist2(v, &m)).sum::<f64>();
        }
        let g = groups.len() as f64;
        let f = (between / (g - 1.0)) / (within / (all.len() as f64 - g));
        assert!(f > 10.0, "{category}: F = {f}");
    }
}

#[test]
fn max_one_finds_the_generated_object() {
    let data = scenes(&encoder(0.05, 1, 7), 2000, 8);
    for s in &data {
        assert_eq!(select_object_slots(&s.encoding, SlotSelection::MaxOne), s.object_slot_ids);
    }
}

#[test]
fn arbitrary_split_of_uniform_noise_scores_low() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<Vec<f32>> = (0..300).map(|_| vec![rng.random(), rng.random()]).collect();
    let halves: Vec<Option<u32>> = pts.iter().map(|p| Some(if p[0] < 0.5 { 1 } else { 2 })).collect();
    let random: Vec<Option<u32>> = (0..pts.len()).map(|_| Some(rng.random_range(1..=2))).collect();
    for labels in [halves, random] {
        let s = dbcv_score(&pts, &labels);
        assert!(s < 0.2, "score {s}");
    }
}

#[test]
fn grid_search_recovers_three_values() {
    let schema = FactorSchema::new(vec![Category::categorical("tone", &["a", "b", "c"])]).unwrap();
    let cfg = EncoderConfig {
        n_slots: 2,
        n_blocks: 1,
        block_dim: 8,
        factor_to_block: [("tone".to_owned(), 0)].into_iter().collect(),
        cluster_spread: 0.01,
        duplicate_clusters_per_value: 1,
        seed: 4,
    };
    let enc = SyntheticEncoder::new(schema, cfg).unwrap();
    let data = scenes(&enc, 300, 5);
    let refs: Vec<_> = data.iter().map(|s| &s.encoding).collect();
    let points = gather_block_points(&refs, SlotSelection::MaxOne).unwrap();
    let result = grid_search(&points[0], &DEFAULT_GRID, true).unwrap();
    assert!(!result.degenerate);
    assert_eq!(result.best_clustering.unwrap().n_clusters, 3);
}

#[test]
fn kmeans_separates_two_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Vec<f32>> = (0..80)
        .map(|i| {
            let c = if i % 2 == 0 { 0.0 } else { 50.0 };
            vec![c + rng.random::<f32>(), rng.random()]
        })
        .collect();
    let c = fit_kmeans(&pts, 2, 9).unwrap();
    for (i, l) in c.labels.iter().enumerate() {
        assert_eq!(*l, c.labels[i % 2], "point {i}");
    }
    assert_ne!(c.labels[0], c.labels[1]);
}

#[test]
fn exemplars_are_the_nearest_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pts: Vec<Vec<f32>> = (0..90)
        .map(|i| vec![(i % 3) as f32 * 20.0 + rng.random::<f32>() * 3.0, rng.random::<f32>() * 3.0])
        .collect();
    let clustering = fit_hdbscan(&pts, &ClusterParams::new(5, 5)).unwrap();
    let k = 4;
    let corpus = distill(std::slice::from_ref(&clustering), std::slice::from_ref(&pts), k).unwrap();
    let block = corpus.block(0).unwrap();
    for (c, members) in clustering.members().iter().enumerate() {
        let concept = c as u32 + 1;
        let (_, proto) = block.prototype(concept).unwrap();
        let mut sorted = members.clone();
        sorted.sort_by(|&a, &b| dist2(&pts[a], &proto.enc).total_cmp(&dist2(&pts[b], &proto.enc)).then(a.cmp(&b)));
        let expected: Vec<&[f32]> = sorted.iter().take(k).map(|&i| pts[i].as_slice()).collect();
        let got: Vec<&[f32]> = block
            .entries_of(concept)
            .filter(|(_, e)| e.kind == EntryKind::Exemplar)
            .map(|(_, e)| e.enc.as_slice())
            .collect();
        assert_eq!(got, expected, "concept {concept}");
    }
}

#[test]
fn nearest_entry_matches_a_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let entries: Vec<CorpusEntry> = (0..50)
        .map(|i| CorpusEntry {
            enc: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            concept: i / 5 + 1,
            kind: if i % 5 == 0 { EntryKind::Prototype } else { EntryKind::Exemplar },
        })
        .collect();
    let block = BlockCorpus::from_entries(entries.clone()).unwrap();
    for _ in 0..1000 {
        let q: Vec<f32> = (0..4).map(|_| rng.random_range(-1.2..1.2)).collect();
        let mut best = 0;
        for (l, e) in entries.iter().enumerate() {
            if dist2(&e.enc, &q) < dist2(&entries[best].enc, &q) {
                best = l;
            }
        }
        let s = block.select(&q).unwrap();
        assert_eq!((s.concept, s.entry), (entries[best].concept, Some(best)));
    }
}

#[test]
fn clean_inference_returns_the_generating_cluster() {
    let enc = encoder(0.0, 1, 6);
    let corpus = fit(&scenes(&enc, 200, 1));
    for s in scenes(&enc, 50, 2) {
        let slot = s.object_slot_ids[0];
        for (category, j) in [("shape", 2usize), ("color", 5)] {
            let sel = corpus.select_concept(j, s.encoding.block(slot, j)).unwrap();
            let (_, proto) = corpus.block(j).unwrap().prototype(sel.concept).unwrap();
            let centroid = &enc.centroids(category, s.objects[0].label(category).unwrap()).unwrap()[0];
            assert_eq!(&proto.enc, centroid);
        }
    }
}

/// Unattainable as stated: twenty uniform draws over eight colors leave a
/// color unseen about half the time, and no tree can name a value it never
/// saw. Kept so the gap stays visible; run with `--ignored`.
#[test]
#[ignore = "twenty samples rarely cover all eight colors"]
fn clean_property_accuracy_with_twenty_samples() {
    let enc = encoder(0.0, 1, 12);
    let data = scenes(&enc, 600, 13);
    let corpus = fit(&data);
    for seed in 0..3 {
        let r = evaluate_property_accuracy(&corpus, &data, enc.schema(), &PropertyEvalConfig::new(20, 400, seed)).unwrap();
        for (category, acc) in &r.per_category {
            assert!(*acc >= 0.99, "seed {seed} {category}: {acc}");
        }
    }
}

#[test]
fn clean_property_accuracy_once_every_value_is_seen() {
    let enc = encoder(0.0, 1, 12);
    let data = scenes(&enc, 600, 13);
    let corpus = fit(&data);
    for seed in 0..3 {
        let r = evaluate_property_accuracy(&corpus, &data, enc.schema(), &PropertyEvalConfig::new(200, 400, seed)).unwrap();
        for (category, acc) in &r.per_category {
            assert!(*acc >= 0.99, "seed {seed} {category}: {acc}");
        }
    }
}

/// Chance level per seed is noisy because the concepts pin down the true
/// value, so a handful of leaf majorities decide the score; average seeds.
#[test]
fn shuffled_labels_fall_to_chance() {
    let enc = encoder(0.05, 1, 14);
    let data = scenes(&enc, 1500, 15);
    let corpus = fit(&data);
    let seeds = 10;
    let mut sums = std::collections::BTreeMap::<String, f64>::new();
    for seed in 0..seeds {
        let mut cfg = PropertyEvalConfig::new(1000, 500, seed);
        cfg.shuffle_labels = true;
        let r = evaluate_property_accuracy(&corpus, &data, enc.schema(), &cfg).unwrap();
        for (c, a) in r.per_category {
            *sums.entry(c).or_default() += a / seeds as f64;
        }
    }
    for c in enc.schema().categorical() {
        let chance = 1.0 / c.values().unwrap().len() as f64;
        let acc = sums[&c.name];
        assert!((acc - chance).abs() < 0.1, "{}: {acc} vs {chance}", c.name);
    }
}

#[test]
fn inspection_on_clean_data() {
    let enc = encoder(0.0, 1, 16);
    let data = scenes(&enc, 400, 17);
    let corpus = fit(&data);
    let red = &enc.centroids("color", "red").unwrap()[0];
    let concept = corpus.select_concept(5, red).unwrap().concept;
    let card = implicit_inspect(&corpus, 5, concept, &data, 50).unwrap();
    assert!(card.n_matches > 0);
    assert!(card.matches.iter().all(|m| m.factors.label("color") == Some("red")));

    let cube = corpus.select_concept(2, &enc.centroids("shape", "cube").unwrap()[0]).unwrap().concept;
    let sphere = corpus.select_concept(2, &enc.centroids("shape", "sphere").unwrap()[0]).unwrap().concept;
    let cmp = comparative_inspect(&corpus, 2, cube, sphere, &data, 50).unwrap();
    let top = |h: &std::collections::BTreeMap<String, std::collections::BTreeMap<String, usize>>| {
        h["shape"].iter().max_by_key(|(_, n)| **n).map(|(v, _)| v.clone()).unwrap()
    };
    assert_eq!(top(&cmp.first.factor_histogram), "cube");
    assert_eq!(top(&cmp.second.factor_histogram), "sphere");

    let block = corpus.block(5).unwrap();
    let report = similarity_inspect(&corpus, 5, concept).unwrap();
    for &(other, d) in &report.ranked {
        let (_, p) = block.prototype(other).unwrap();
        assert_eq!(d, dist2(&p.enc, red).sqrt());
    }
}

#[test]
fn duplicate_clusters_rank_each_other_first() {
    let enc = encoder(0.0, 2, 18);
    let data = scenes(&enc, 800, 19);
    let corpus = fit(&data);
    let purple = enc.centroids("color", "purple").unwrap();
    let a = corpus.select_concept(5, &purple[0]).unwrap().concept;
    let b = corpus.select_concept(5, &purple[1]).unwrap().concept;
    assert_ne!(a, b);
    let report = similarity_inspect(&corpus, 5, a).unwrap();
    assert_eq!(report.ranked[0].0, b);
}
