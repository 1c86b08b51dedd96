mod common;

use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ncb_cli::api::{router, AppState, ServiceState};
use ncb_core::corpus::RetrievalCorpus;
use ncb_core::revision::{replay, LogEntry};
use ncb_core::sudoku::{generate_bases, SudokuVariant};
use ncb_core::sudoku::io::{write_dataset, SudokuDataset};
use serde_json::{json, Value};
use tower::ServiceExt;

use common::*;

struct Setup {
    app: Router,
    corpus: RetrievalCorpus,
    color: usize,
    n_scenes: usize,
    _dir: tempfile::TempDir,
}

fn setup() -> Setup {
    let encoder = easy_encoder(0.05, 2, 16, 5);
    let scenes = single_objects(&encoder, 400, 6);
    let corpus = fit(&scenes);
    let dir = tempfile::tempdir().unwrap();
    let bases = generate_bases(SudokuVariant::Easy, 4, 3);
    write_dataset(dir.path(), &bases, 3, None, &[10], &[1]).unwrap();
    let dataset = SudokuDataset::open(dir.path()).unwrap();
    let puzzle_encoder = ncb_core::encoding::SyntheticEncoder::new(
        SudokuVariant::Easy.schema(),
        SudokuVariant::Easy.encoder_config(3),
    )
    .unwrap();
    let color = block_of(&encoder, "color");
    let n_scenes = scenes.len();
    let state = ServiceState {
        encoder: Some(encoder),
        scenes,
        dataset: Some(dataset),
        dataset_encoder: Some(puzzle_encoder),
        ..ServiceState::new(corpus.clone())
    };
    Setup {
        app: router(AppState::new(state)),
        corpus,
        color,
        n_scenes,
        _dir: dir,
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

fn live_concepts(v: &Value) -> Vec<u64> {
    v["concepts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| !c["other"].as_bool().unwrap())
        .map(|c| c["concept"].as_u64().unwrap())
        .collect()
}

#[tokio::test]
async fn read_endpoints_describe_the_corpus() {
    let s = setup();
    let (st, v) = get(&s.app, "/v1/version").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["api_version"], "v1");
    assert_eq!(v["corpus_version"], 0);
    assert_eq!(v["corpus_fingerprint"], s.corpus.fingerprint());

    let (_, v) = get(&s.app, "/v1/blocks").await;
    let blocks = v["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), s.corpus.n_blocks());
    assert_eq!(blocks[s.color]["factor"], "color");
    // Two centroids per color.
    assert_eq!(blocks[s.color]["n_concepts"], 16);

    let (_, v) = get(&s.app, &format!("/v1/blocks/{}/concepts", s.color)).await;
    let live = live_concepts(&v);
    let c = live[0];
    let (st, card) = get(&s.app, &format!("/v1/blocks/{}/concepts/{c}?matches=3", s.color)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(card["concept"], c);
    assert_eq!(card["corpus_version"], 0);
    assert!(card["matches"].as_array().unwrap().len() <= 3);
    assert_eq!(card["factor_histogram"]["color"].as_object().unwrap().len(), 1);

    let (st, v) = get(&s.app, &format!("/v1/blocks/{}/compare?a={}&b={}", s.color, live[0], live[1])).await;
    assert_eq!(st, StatusCode::OK);
    assert!(v["prototype_distance"].as_f64().unwrap() > 0.0);

    let (st, v) = get(&s.app, &format!("/v1/blocks/{}/concepts/{c}/similar", s.color)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["ranked"].as_array().unwrap().len(), live.len() - 1);

    let (st, v) = get(&s.app, "/v1/scenes/0/concepts").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["slots"][0]["concepts"].as_array().unwrap().len(), s.corpus.n_blocks());
}

#[tokio::test]
async fn lookups_of_missing_things_are_not_found() {
    let s = setup();
    for uri in [
        "/v1/blocks/99/concepts".to_owned(),
        format!("/v1/blocks/{}/concepts/999", s.color),
        format!("/v1/scenes/{}/concepts", s.n_scenes),
        "/v1/sudoku/jobs/7".to_owned(),
        "/v1/nothing".to_owned(),
    ] {
        let (st, v) = get(&s.app, &uri).await;
        assert_eq!(st, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["error"]["code"], "not_found", "{uri}");
        assert!(v["error"]["message"].is_string());
    }
    let (st, v) = get(&s.app, &format!("/v1/blocks/{}/compare?a=1&b=1", s.color)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "rejected");
}

#[tokio::test]
async fn intervention_on_the_same_concept_changes_nothing() {
    let s = setup();
    let (_, v) = get(&s.app, "/v1/scenes/0/concepts").await;
    let slot = v["slots"][0]["slot"].as_u64().unwrap();
    let own = v["slots"][0]["concepts"][s.color].as_u64().unwrap();
    let body = json!({ "scene": 0, "slot": slot, "block": s.color, "target": own });
    let (st, r) = post(&s.app, "/v1/interventions", body).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(r["category"], "color");
    assert_eq!(r["changed"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn stale_merge_conflicts_and_changes_nothing() {
    let s = setup();
    let (_, v) = get(&s.app, &format!("/v1/blocks/{}/concepts", s.color)).await;
    let live = live_concepts(&v);
    let action = json!({ "op": "merge", "block": s.color, "from": live[0], "into": live[1] });
    let (st, v) = post(&s.app, "/v1/revisions", json!({ "expected_version": 3, "action": action })).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "conflict");
    assert_eq!(v["error"]["current_version"], 0);

    let (_, v) = get(&s.app, "/v1/version").await;
    assert_eq!(v["corpus_version"], 0);
    assert_eq!(v["corpus_fingerprint"], s.corpus.fingerprint());
    let (_, v) = get(&s.app, "/v1/revisions").await;
    assert_eq!(v["entries"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn merged_id_never_comes_back_from_infer() {
    let s = setup();
    let (_, v) = get(&s.app, &format!("/v1/blocks/{}/concepts", s.color)).await;
    let live = live_concepts(&v);
    // The nearest neighbor of a duplicated color is its twin.
    let (_, sim) = get(&s.app, &format!("/v1/blocks/{}/concepts/{}/similar", s.color, live[0])).await;
    let twin = sim["ranked"][0][0].as_u64().unwrap();
    let from = live[0];

    let action = json!({ "op": "merge", "block": s.color, "from": from, "into": twin });
    let (st, v) = post(
        &s.app,
        "/v1/revisions",
        json!({ "expected_version": 0, "actor": "tester", "action": action }),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["corpus_version"], 1);
    assert_eq!(v["entry"]["actor"], "tester");

    let mut saw_twin = false;
    for scene in 0..s.n_scenes {
        let (_, r) = get(&s.app, &format!("/v1/scenes/{scene}/concepts")).await;
        assert_eq!(r["corpus_version"], 1);
        let c = r["slots"][0]["concepts"][s.color].as_u64().unwrap();
        assert_ne!(c, from, "scene {scene}");
        saw_twin |= c == twin;
    }
    assert!(saw_twin);

    // The same merge again is refused and appends nothing.
    let (st, _) = post(&s.app, "/v1/revisions", json!({ "expected_version": 1, "action": action })).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (_, v) = get(&s.app, "/v1/revisions").await;
    let entries: Vec<LogEntry> = serde_json::from_value(v["entries"].clone()).unwrap();
    assert_eq!(entries.len(), 1);
    let rebuilt = replay(&s.corpus, &entries).unwrap();
    let (_, v) = get(&s.app, "/v1/version").await;
    assert_eq!(v["corpus_fingerprint"], rebuilt.fingerprint());
    let (_, v) = get(&s.app, "/v1/revisions?since=1").await;
    assert_eq!(v["entries"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn every_mutation_appends_one_log_entry() {
    let s = setup();
    let (_, v) = get(&s.app, &format!("/v1/blocks/{}/concepts", s.color)).await;
    let live = live_concepts(&v);
    let actions = [
        json!({ "op": "merge", "block": s.color, "from": live[0], "into": live[1] }),
        json!({ "op": "zero_concept", "block": s.color, "concept": live[2] }),
        json!({ "op": "delete_concept", "block": s.color, "concept": live[3] }),
        json!({ "op": "add_concept", "block": s.color, "encs": [vec![0.0f32; 16]] }),
    ];
    for (i, action) in actions.into_iter().enumerate() {
        let (st, v) = post(&s.app, "/v1/revisions", json!({ "expected_version": i, "action": action })).await;
        assert_eq!(st, StatusCode::OK, "{v}");
        let (_, log) = get(&s.app, "/v1/revisions").await;
        assert_eq!(log["entries"].as_array().unwrap().len(), i + 1);
    }
    let (st, v) = post(
        &s.app,
        "/v1/revisions",
        json!({ "expected_version": 4, "action": { "op": "merge", "block": s.color, "from": 0, "into": live[1] } }),
    )
    .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (_, log) = get(&s.app, "/v1/revisions").await;
    assert_eq!(log["entries"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn ground_truth_sample_is_solved() {
    let s = setup();
    let body = json!({ "index": 1, "k": 30, "n_examples": 3, "seeds": 2, "concepts": "gt" });
    let (st, v) = post(&s.app, "/v1/sudoku/samples", body).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["solved_percent"], 100.0);
    assert_eq!(v["outcomes"].as_array().unwrap().len(), 2);

    let (st, _) = post(&s.app, "/v1/sudoku/samples", json!({ "index": 9, "k": 30, "n_examples": 3 })).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn evaluation_job_reports_progress_until_done() {
    let s = setup();
    let body = json!({ "concepts": "gt", "k": [10, 30], "n": [1, 3], "seeds": 2 });
    let (st, v) = post(&s.app, "/v1/sudoku/jobs", body).await;
    assert_eq!(st, StatusCode::ACCEPTED, "{v}");
    let id = v["id"].as_u64().unwrap();
    assert_eq!(v["progress"]["total"], 4 + 4);

    let mut last = 0;
    let done = loop {
        let (st, v) = get(&s.app, &format!("/v1/sudoku/jobs/{id}")).await;
        assert_eq!(st, StatusCode::OK);
        let d = v["progress"]["done"].as_u64().unwrap();
        assert!(d >= last);
        last = d;
        if v["status"] != "running" {
            break v;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert_eq!(done["status"], "done", "{done}");
    assert_eq!(done["progress"]["done"], 8);
    let rows = done["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["solved_mean"] == 100.0));
}

#[tokio::test]
async fn corpus_sample_without_an_encoder_is_refused() {
    let encoder = easy_encoder(0.05, 1, 16, 5);
    let corpus = fit(&single_objects(&encoder, 200, 1));
    let app = router(AppState::new(ServiceState::new(corpus)));
    let (st, v) = post(&app, "/v1/sudoku/samples", json!({ "index": 0, "k": 10, "n_examples": 1 })).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "not_loaded");
    let (st, v) = post(&app, "/v1/interventions", json!({ "scene": 0, "slot": 0, "block": 0, "target": 1 })).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "not_loaded");
}
