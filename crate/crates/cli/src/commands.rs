//! One handler per subcommand. Handlers write their human-readable output
//! to `out` and report failures as [`CliError`].

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ncb_core::clustering::{ClusterParams, DEFAULT_GRID};
use ncb_core::corpus::{
    fit_corpus, BlockFit, ClusterMethod, FitConfig, InferenceConfig, RetrievalCorpus, Selector, DEFAULT_EXEMPLARS,
};
use ncb_core::encoding::io::{write_encodings, EncoderFile, EncodingHeader};
use ncb_core::encoding::{
    generate_scenes, EncoderConfig, FactorSchema, SceneSpec, SlotSelection, SyntheticEncoder,
};
use ncb_core::inspection::{
    comparative_inspect, implicit_inspect, interventional_inspect, similarity_inspect, ConceptCard, Intervention,
    Replacement,
};
use ncb_core::revision::apply_feedback;
use ncb_core::sudoku::io::{write_dataset, SudokuDataset};
use ncb_core::sudoku::{evaluate_suite, generate_bases, ConceptSource, SudokuVariant};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::files::*;
use crate::q1::evaluate_q1;
use crate::workspace::{Workspace, WorkspaceManifest};

pub fn dispatch(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::GenData(a) => gen_data(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Infer(a) => infer(a, out),
        Command::Inspect(a) => inspect(a, out),
        Command::Revise(a) => revise(a, out),
        Command::EvalQ1(a) => eval_q1(a, out),
        Command::SudokuGen(a) => sudoku_gen(a, out),
        Command::SudokuEval(a) => sudoku_eval(a, out),
        Command::Serve(a) => crate::api::serve(a, out),
        Command::Workspace(a) => workspace(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(CliError::io)
}

fn slot_mode(a: SlotArgs) -> CliResult<SlotSelection> {
    match a.threshold {
        None => Ok(SlotSelection::MaxOne),
        Some(t) => Ok(SlotSelection::threshold(t)?),
    }
}

fn encoder_fingerprint(encoder: &SyntheticEncoder) -> String {
    EncoderFile::of(encoder).fingerprint()
}

/// Applies optional overrides to a stock configuration.
fn tuned(mut config: EncoderConfig, spread: Option<f64>, dup: Option<usize>, block_dim: Option<usize>) -> EncoderConfig {
    if let Some(s) = spread {
        config.cluster_spread = s;
    }
    if let Some(d) = dup {
        config.duplicate_clusters_per_value = d;
    }
    if let Some(d) = block_dim {
        config.block_dim = d;
    }
    config
}

fn gen_data(a: GenDataArgs, out: &mut dyn Write) -> CliResult<()> {
    let encoder = match &a.encoder {
        Some(p) => load_encoder(p)?,
        None => {
            let (schema, config) = match a.schema {
                SchemaName::Clevr => (FactorSchema::clevr(), EncoderConfig::clevr(a.seed)),
                SchemaName::ClevrEasy => (FactorSchema::clevr_easy(), EncoderConfig::clevr_easy(a.seed)),
            };
            SyntheticEncoder::new(schema, tuned(config, a.spread, a.dup, a.block_dim))?
        }
    };
    let spec = SceneSpec {
        count: a.count,
        min_objects: a.min_objects,
        max_objects: a.max_objects,
        seed: a.seed,
    };
    let scenes = generate_scenes(&encoder, &spec)?;
    let c = encoder.config();
    let mut header = EncodingHeader::new(encoder.schema().clone(), c.n_slots, c.n_blocks, c.block_dim);
    header.count = scenes.len();
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(e).context(dir.display()))?;
    }
    write_encodings(&a.out, &header, &scenes).map_err(|e| CliError::from(e).context(a.out.display()))?;
    let encoder_out = a
        .encoder_out
        .clone()
        .unwrap_or_else(|| a.out.with_file_name("encoder.json"));
    write_atomic(&encoder_out, EncoderFile::of(&encoder).to_json())?;
    emit(
        out,
        &format!(
            "wrote {} scenes to {}\nencoder {} ({})\n",
            scenes.len(),
            a.out.display(),
            encoder_out.display(),
            encoder_fingerprint(&encoder)
        ),
    )
}

fn fit(a: FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let (_, scenes) = load_scenes(&a.encodings)?;
    let encoder = a.encoder.as_deref().map(load_encoder).transpose()?;
    let allow_single_cluster = !a.no_single_cluster;
    let method = match a.cluster {
        ClusterName::HdbscanGrid => ClusterMethod::HdbscanGrid {
            grid: a.grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec()),
            allow_single_cluster,
        },
        ClusterName::Hdbscan => ClusterMethod::Hdbscan {
            params: ClusterParams {
                allow_single_cluster,
                ..ClusterParams::new(a.min_cluster_size, a.min_samples)
            },
        },
        ClusterName::Kmeans => ClusterMethod::Kmeans {
            k: a.k.ok_or_else(|| CliError::validation("--k is required with --cluster kmeans"))?,
            seed: a.seed,
        },
    };
    let config = FitConfig {
        slot_mode: slot_mode(a.slots)?,
        method,
        exemplars_per_cluster: a.exemplars.unwrap_or(DEFAULT_EXEMPLARS),
    };
    let encodings: Vec<_> = scenes.iter().map(|s| &s.encoding).collect();
    let mut report = fit_corpus(&encodings, &config)?;
    report.corpus.provenance.encoder_fingerprint = encoder.as_ref().map(encoder_fingerprint);
    report.corpus.provenance.created_at = a.stamp.then(now_stamp);
    save_corpus(&a.out, &report.corpus)?;
    emit(out, &concept_table(&report.corpus, encoder.as_ref()))?;
    emit(
        out,
        &format!(
            "{} object slots from {} scenes\ncorpus {} ({})\n",
            report.n_points,
            scenes.len(),
            a.out.display(),
            report.corpus.fingerprint()
        ),
    )
}

/// Concepts per block, with the factor each block encodes when known.
pub fn concept_table(corpus: &RetrievalCorpus, encoder: Option<&SyntheticEncoder>) -> String {
    let mut s = String::from("block\tfactor\tN_C\tfit\n");
    let mut total = 0usize;
    for (j, block) in corpus.blocks().iter().enumerate() {
        let n = block.informative_concepts().len();
        total += n;
        let factor = encoder
            .and_then(|e| e.config().category_of_block(j))
            .unwrap_or("-");
        let fit = match corpus.provenance.block_fits.get(j) {
            Some(BlockFit::Hdbscan { params, noise, dbcv, .. }) => format!(
                "hdbscan mcs={} ms={} noise={} dbcv={}",
                params.min_cluster_size,
                params.min_samples,
                noise,
                dbcv.map_or("-".to_owned(), |d| format!("{d:.3}"))
            ),
            Some(BlockFit::Kmeans { k, seed }) => format!("kmeans k={k} seed={seed}"),
            Some(BlockFit::Manual) => "manual".to_owned(),
            None => "-".to_owned(),
        };
        let _ = writeln!(s, "{j}\t{factor}\t{n}\t{fit}");
    }
    let avg = total as f64 / corpus.n_blocks().max(1) as f64;
    let _ = writeln!(s, "average\t\t{avg:.2}");
    s
}

fn infer(a: InferArgs, out: &mut dyn Write) -> CliResult<()> {
    let corpus = load_corpus(&a.corpus)?;
    let (_, scenes) = load_scenes(&a.encodings)?;
    let config = InferenceConfig {
        slot_mode: slot_mode(a.slots)?,
        selector: match a.top_k {
            Some(k) => Selector::TopK { k },
            None => Selector::Nearest,
        },
    };
    let text = concepts_jsonl(&corpus, &scenes, &config)?;
    write_atomic(&a.out, text)?;
    emit(out, &format!("wrote concepts of {} scenes to {}\n", scenes.len(), a.out.display()))
}

/// A header line followed by one line per scene.
pub fn concepts_jsonl(
    corpus: &RetrievalCorpus,
    scenes: &[ncb_core::encoding::LabeledScene],
    config: &InferenceConfig,
) -> CliResult<String> {
    let header = ConceptsHeader {
        format: CONCEPTS_FORMAT.to_owned(),
        schema_version: CONCEPTS_SCHEMA_VERSION,
        corpus_version: corpus.version(),
        corpus_fingerprint: corpus.fingerprint(),
        scenes: scenes.len(),
    };
    let mut text = serde_json::to_string(&header).expect("header serializes");
    text.push('\n');
    for (i, scene) in scenes.iter().enumerate() {
        let slots = corpus.infer(&scene.encoding, config)?;
        let line = serde_json::json!({ "scene": i, "slots": slots });
        text.push_str(&line.to_string());
        text.push('\n');
    }
    Ok(text)
}

fn inspect(a: InspectArgs, out: &mut dyn Write) -> CliResult<()> {
    let corpus = load_corpus(&a.corpus)?;
    let text = match a.query {
        InspectQuery::Blocks => {
            if a.json {
                to_pretty_json(&crate::api::block_summaries(&corpus, None))
            } else {
                concept_table(&corpus, None)
            }
        }
        InspectQuery::Card {
            encodings,
            block,
            concept,
            matches,
        } => {
            let (_, scenes) = load_scenes(&encodings)?;
            let card = implicit_inspect(&corpus, block, concept, &scenes, matches)?;
            if a.json {
                to_pretty_json(&card)
            } else {
                card_text(&card)
            }
        }
        InspectQuery::Compare {
            encodings,
            block,
            a: first,
            b: second,
            matches,
        } => {
            let (_, scenes) = load_scenes(&encodings)?;
            let cmp = comparative_inspect(&corpus, block, first, second, &scenes, matches)?;
            if a.json {
                to_pretty_json(&cmp)
            } else {
                let mut s = card_text(&cmp.first);
                s.push('\n');
                s.push_str(&card_text(&cmp.second));
                let f = |d: Option<f64>| d.map_or("-".to_owned(), |d| format!("{d:.4}"));
                let _ = writeln!(
                    s,
                    "\nprototype distance {} (block median {})",
                    f(cmp.prototype_distance),
                    f(cmp.block_median_distance)
                );
                s
            }
        }
        InspectQuery::Similar { block, concept } => {
            let r = similarity_inspect(&corpus, block, concept)?;
            if a.json {
                to_pretty_json(&r)
            } else {
                let mut s = format!("block {block}, nearest to concept {concept}\n");
                for (c, d) in &r.ranked {
                    let _ = writeln!(s, "{c}\t{d:.4}");
                }
                s
            }
        }
        InspectQuery::Swap {
            encodings,
            encoder,
            scene,
            slot,
            block,
            target,
            entry,
        } => {
            let (_, scenes) = load_scenes(&encodings)?;
            let encoder = load_encoder(&encoder)?;
            let query = Intervention {
                scene,
                slot,
                block,
                target,
                replacement: entry.map_or(Replacement::Prototype, |entry| Replacement::Entry { entry }),
            };
            let r = interventional_inspect(&corpus, &encoder, &scenes, query)?;
            if a.json {
                to_pretty_json(&r)
            } else {
                let mut s = format!("scene {scene} slot {slot}: block {block} set to concept {target}\n");
                if r.no_visible_effect {
                    s.push_str("no visible effect\n");
                }
                for c in &r.changed {
                    let show = |o: &ncb_core::encoding::GroundTruthObject| {
                        o.label(c)
                            .map(str::to_owned)
                            .or_else(|| o.position(c).map(|p| format!("({:.3}, {:.3})", p[0], p[1])))
                            .unwrap_or_else(|| "-".to_owned())
                    };
                    let _ = writeln!(s, "{c}: {} -> {}", show(&r.before), show(&r.after));
                }
                s
            }
        }
    };
    emit(out, &text)
}

fn card_text(card: &ConceptCard) -> String {
    let mut s = format!("block {} concept {}\n", card.block, card.concept);
    match &card.prototype {
        Some(p) => {
            let _ = writeln!(s, "prototype entry {}, {} exemplars", p.entry, card.exemplars.len());
        }
        None => {
            let _ = writeln!(s, "no prototype, {} exemplars", card.exemplars.len());
        }
    }
    let _ = writeln!(
        s,
        "{} of {} objects ({:.2}%)",
        card.n_matches,
        card.n_objects,
        100.0 * card.population_share
    );
    for (category, values) in &card.factor_histogram {
        let parts: Vec<String> = values.iter().map(|(v, n)| format!("{v}={n}")).collect();
        let _ = writeln!(s, "  {category}: {}", parts.join(" "));
    }
    s
}

fn revise(a: ReviseArgs, out: &mut dyn Write) -> CliResult<()> {
    let corpus = load_corpus(&a.corpus)?;
    let doc = load_feedback(&a.feedback)?;
    let mut log = match &a.log {
        Some(p) => Some(load_log(p)?),
        None => None,
    };
    let stamp = if a.stamp { now_stamp() } else { NO_STAMP.to_owned() };
    let (next, entries) = apply_feedback(&corpus, &doc, &stamp)?;
    // Check the log accepts the entries before anything is written.
    if let Some(log) = &mut log {
        log.extend(entries.iter().cloned())?;
    }
    let target = a.out.as_ref().unwrap_or(&a.corpus);
    save_corpus(target, &next)?;
    if let (Some(path), Some(log)) = (&a.log, &log) {
        write_atomic(path, log.to_jsonl())?;
    }
    let mut s = String::new();
    for e in &entries {
        let _ = writeln!(
            s,
            "v{} -> v{}\t{}\t{}",
            e.version_before,
            e.version_after,
            serde_json::to_string(&e.action).expect("action serializes"),
            serde_json::to_string(&e.outcome).expect("outcome serializes"),
        );
    }
    let _ = writeln!(s, "corpus {} at version {}", target.display(), next.version());
    emit(out, &s)
}

fn eval_q1(a: EvalQ1Args, out: &mut dyn Write) -> CliResult<()> {
    let corpus = load_corpus(&a.corpus)?;
    let (header, scenes) = load_scenes(&a.encodings)?;
    let report = evaluate_q1(&corpus, &scenes, &header.schema, &a.sizes, a.n_test, &a.seeds)?;
    if let Some(p) = &a.out {
        write_atomic(p, report.to_json())?;
    }
    emit(out, &report.to_table())
}

fn sudoku_gen(a: SudokuGenArgs, out: &mut dyn Write) -> CliResult<()> {
    let variant: SudokuVariant = a.variant.into();
    let encoder = SyntheticEncoder::new(
        variant.schema(),
        tuned(variant.encoder_config(a.seed), a.spread, a.dup, a.block_dim),
    )?;
    let bases = generate_bases(variant, a.count, a.seed);
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(e).context(a.out.display()))?;
    write_dataset(&a.out, &bases, a.seed, a.encode.then_some(&encoder), &a.k, &a.n)?;
    write_atomic(&a.out.join("encoder.json"), EncoderFile::of(&encoder).to_json())?;
    emit(
        out,
        &format!(
            "wrote {} {} puzzles to {} ({} configurations)\n",
            bases.len(),
            variant.name(),
            a.out.display(),
            a.k.len() * a.n.len()
        ),
    )
}

/// The encoder saved next to a dataset, falling back to its manifest.
pub fn dataset_encoder(dataset: &SudokuDataset) -> CliResult<Option<SyntheticEncoder>> {
    let saved = dataset.root.join("encoder.json");
    if saved.exists() {
        return load_encoder(&saved).map(Some);
    }
    Ok(dataset.encoder()?)
}

pub fn open_dataset(root: &Path) -> CliResult<SudokuDataset> {
    SudokuDataset::open(root).map_err(|e| CliError::from(e).context(root.display()))
}

fn sudoku_eval(a: SudokuEvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let dataset = open_dataset(&a.dataset)?;
    let mut bases: Vec<Arc<_>> = dataset.bases.clone();
    if let Some(n) = a.limit {
        bases.truncate(n);
    }
    let corpus;
    let encoder;
    let (source, default_name) = match a.concepts {
        ConceptsName::Gt => (ConceptSource::GroundTruth, "gt"),
        ConceptsName::Corpus => {
            let path = a.corpus.as_ref().ok_or_else(|| CliError::validation("--corpus is required"))?;
            corpus = load_corpus(path)?;
            encoder = match &a.encoder {
                Some(p) => load_encoder(p)?,
                None => dataset_encoder(&dataset)?
                    .ok_or_else(|| CliError::validation("dataset has no encoder; pass --encoder"))?,
            };
            (
                ConceptSource::Corpus {
                    corpus: &corpus,
                    encoder: &encoder,
                    slot_mode: slot_mode(a.slots)?,
                },
                "ncb",
            )
        }
    };
    let pipeline = a.pipeline.as_deref().unwrap_or(default_name);
    let report = evaluate_suite(&bases, source, pipeline, &a.k, &a.n, a.seeds)?;
    if let Some(p) = &a.out {
        write_atomic(p, report.to_json())?;
    }
    emit(out, &report.to_table())
}

fn workspace(a: WorkspaceArgs, out: &mut dyn Write) -> CliResult<()> {
    match a.action {
        WorkspaceAction::Init {
            out: path,
            encoder,
            encodings,
            corpus,
            log,
            dataset,
            report,
        } => {
            let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let rel = |p: PathBuf| relative_to(&root, p);
            let manifest = WorkspaceManifest {
                encoder: encoder.map(rel),
                encodings: encodings.map(rel),
                corpora: corpus.into_iter().map(rel).collect(),
                revision_log: log.map(rel),
                datasets: dataset.into_iter().map(rel).collect(),
                reports: report.into_iter().map(rel).collect(),
                ..WorkspaceManifest::new()
            };
            manifest.save(&path)?;
            Workspace::open(&path)?;
            emit(out, &format!("wrote {}\n", path.display()))
        }
        WorkspaceAction::Check { manifest } => {
            let ws = Workspace::open(&manifest)?;
            let mut s = format!("{} is valid\n", manifest.display());
            if let Some(c) = &ws.corpus {
                let _ = writeln!(s, "corpus version {} ({} blocks)", c.version(), c.n_blocks());
            }
            let _ = writeln!(
                s,
                "{} scenes, {} log entries, {} datasets",
                ws.scenes.len(),
                ws.log.len(),
                ws.datasets.len()
            );
            emit(out, &s)
        }
    }
}

/// Strips `root` from `p` when possible; other paths are kept as given.
fn relative_to(root: &Path, p: PathBuf) -> PathBuf {
    if root.as_os_str().is_empty() {
        return p;
    }
    match p.strip_prefix(root) {
        Ok(r) => r.to_path_buf(),
        Err(_) => std::path::absolute(&p).unwrap_or(p),
    }
}
