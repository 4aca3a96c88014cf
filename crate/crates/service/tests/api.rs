use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rkf::{bundled, check_relations, ObjectKey, RelevanceStore, RkfParams, Solution};
use rkf_service::{router, router_with_state, state, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

const CLASS: &str = bundled::HOME_PC;

fn config() -> ServiceConfig {
    let mut c = ServiceConfig::new(bundled::simple_pc(), RelevanceStore::new(RkfParams::new(1.4, 1.1, 1.9).unwrap()));
    c.rewards = Some(bundled::home_pc_rewards());
    c.default_class = CLASS.into();
    c
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, seed: u64) -> Value {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "seed": seed }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body
}

fn keys(session: &Value) -> Vec<String> {
    session["decision_objects"].as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_string()).collect()
}

async fn relevance_map(app: &Router) -> std::collections::BTreeMap<String, (f64, u64, f64)> {
    let (status, body) = call(app, "GET", &format!("/relevance?class={CLASS}"), None).await;
    assert_eq!(status, StatusCode::OK);
    body["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["object"].as_str().unwrap().to_string(),
                (e["relevance"].as_f64().unwrap(), e["last_use"].as_u64().unwrap(), e["last_use_rel"].as_f64().unwrap()),
            )
        })
        .collect()
}

async fn clock(app: &Router) -> u64 {
    let (_, body) = call(app, "GET", "/relevance", None).await;
    body["clocks"][CLASS].as_u64().unwrap()
}

#[tokio::test]
async fn session_solution_is_valid_and_fetchable() {
    let app = router(config());
    let s = create(&app, 3).await;
    assert_eq!(s["state"], "awaiting_rewards");
    assert_eq!(s["task_class"], CLASS);
    assert_eq!(s["run"], 1);
    let solution: Solution = serde_json::from_value(s["solution"].clone()).unwrap();
    assert!(check_relations(&bundled::simple_pc(), &solution.root).is_empty());
    assert_eq!(keys(&s), solution.distinct_decisions().iter().map(ToString::to_string).collect::<Vec<_>>());

    let id = s["session_id"].as_str().unwrap();
    let (status, again) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["solution"], s["solution"]);
}

#[tokio::test]
async fn fresh_store_reports_start_relevance() {
    let app = router(config());
    create(&app, 1).await;
    let map = relevance_map(&app).await;
    assert_eq!(map.len(), bundled::simple_pc().objects().len());
    assert!(map.values().all(|&(r, _, _)| r == 0.5));
    let (_, all) = call(&app, "GET", "/relevance?class=", None).await;
    assert_eq!(all["entries"].as_array().unwrap().len(), map.len());
    let (_, rooted) = call(&app, "GET", &format!("/relevance?class={CLASS}&root=PC-System"), None).await;
    assert_eq!(rooted["entries"].as_array().unwrap().len(), 28);
}

#[tokio::test]
async fn full_rewards_raise_exactly_the_solution_objects() {
    let app = router(config());
    let s = create(&app, 11).await;
    let id = s["session_id"].as_str().unwrap();
    let before = relevance_map(&app).await;
    let rewards: serde_json::Map<String, Value> = keys(&s).into_iter().map(|k| (k, json!(1.0))).collect();
    let (status, ack) = call(&app, "POST", &format!("/sessions/{id}/rewards"), Some(json!({ "rewards": rewards }))).await;
    assert_eq!(status, StatusCode::OK, "{ack}");
    assert_eq!(ack["run"], 1);
    let after = relevance_map(&app).await;
    for (key, &(rel, last_use, _)) in &after {
        if rewards.contains_key(key) {
            assert!(rel > before[key].0, "{key}");
            assert_eq!(last_use, 1);
            assert_eq!(ack["relevance"][key].as_f64().unwrap(), rel);
        } else {
            assert!(rel < before[key].0, "{key} should have decayed");
            assert_eq!(last_use, 0);
        }
    }
    assert_eq!(clock(&app).await, 1);

    // a second submission is refused and does not advance the clock
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/rewards"), Some(json!({ "rewards": rewards }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(err["error"].is_string());
    assert_eq!(clock(&app).await, 1);
    let (_, view) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(view["state"], "idle");
}

#[tokio::test]
async fn zero_broadcast_keeps_values_and_refreshes_use() {
    let app = router(config());
    let s = create(&app, 5).await;
    let id = s["session_id"].as_str().unwrap();
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rewards"), Some(json!({ "broadcast": 0.0 }))).await;
    assert_eq!(status, StatusCode::OK);
    let after = relevance_map(&app).await;
    for key in keys(&s) {
        assert_eq!(after[&key].2, 0.5);
        assert_eq!(after[&key].1, 1);
    }
}

#[tokio::test]
async fn invalid_rewards_are_rejected_without_commit() {
    let app = router(config());
    let s = create(&app, 9).await;
    let id = s["session_id"].as_str().unwrap();
    let url = format!("/sessions/{id}/rewards");
    let mut all: serde_json::Map<String, Value> = keys(&s).into_iter().map(|k| (k, json!(0.5))).collect();

    let first = all.keys().next().unwrap().clone();
    let mut partial = all.clone();
    partial.remove(&first);
    let (status, err) = call(&app, "POST", &url, Some(json!({ "rewards": partial }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["error"].as_str().unwrap().contains(&first));

    all.insert(first.clone(), json!(1.5));
    let (status, _) = call(&app, "POST", &url, Some(json!({ "rewards": all }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, _) = call(&app, "POST", &url, Some(json!({ "broadcast": -0.1 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", &url, Some(json!({ "broadcast": 0.5, "scripted": true }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", &url, Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, err) = call(&app, "POST", &url, Some(json!("not an object"))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["error"].is_string());

    assert_eq!(clock(&app).await, 0);
    let (status, _) = call(&app, "POST", &url, Some(json!({ "scripted": true }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(clock(&app).await, 1);
}

#[tokio::test]
async fn unknown_ids_and_roots() {
    let app = router(config());
    let (status, err) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(err["error"].as_str().unwrap().contains("nope"));
    let (status, _) = call(&app, "POST", "/sessions/nope/rewards", Some(json!({ "broadcast": 1.0 }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions/nope/restart", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "root": "Floppy" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "root": "Harddisk" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "GET", "/relevance?class=Gaming-PC", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn restart_discards_without_commit() {
    let app = router(config());
    let s = create(&app, 21).await;
    let id = s["session_id"].as_str().unwrap();
    let (status, r) = call(&app, "POST", &format!("/sessions/{id}/restart"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["state"], "awaiting_rewards");
    assert_eq!(r["attempt"], 2);
    assert_eq!(clock(&app).await, 0);
    assert!(relevance_map(&app).await.values().all(|&(_, last_use, rel)| last_use == 0 && rel == 0.5));

    // restart after a commit configures the next run
    call(&app, "POST", &format!("/sessions/{id}/rewards"), Some(json!({ "broadcast": 1.0 }))).await;
    let (_, r) = call(&app, "POST", &format!("/sessions/{id}/restart"), None).await;
    assert_eq!(r["run"], 2);
    assert_eq!(clock(&app).await, 1);
}

#[tokio::test]
async fn a_dominant_disk_is_always_drawn() {
    let mut cfg = config();
    let mut store = RelevanceStore::new(RkfParams::new(1.4, 1.1, 1.9).unwrap());
    store.add_class(CLASS).unwrap();
    let strong = ["IDE13", "NN-Board", "NN-Controller"];
    let weak = ["IDE20", "IDE25", "IDE37", "P3BF", "Fast-Controller"];
    for key in bundled::simple_pc().objects() {
        let rel = match key.as_concept() {
            Some(c) if strong.contains(&c) => 1.0,
            Some(c) if weak.contains(&c) => 0.0,
            _ if key == ObjectKey::count("controller-harddisk", 0) => 0.0,
            _ => 0.5,
        };
        store.register_object(key, CLASS, Some(rel)).unwrap();
    }
    cfg.store = store;
    let app = router(cfg);
    for seed in 0..3 {
        let s = create(&app, seed).await;
        let disks: Vec<String> = keys(&s).into_iter().filter(|k| k.starts_with("concept:IDE")).collect();
        assert_eq!(disks, ["concept:IDE13"]);
    }
}

#[tokio::test]
async fn idle_sessions_expire() {
    let mut cfg = config();
    cfg.idle_timeout = Duration::ZERO;
    let app = router(cfg);
    let s = create(&app, 2).await;
    let id = s["session_id"].as_str().unwrap();
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rewards"), Some(json!({ "broadcast": 1.0 }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(clock(&app).await, 0);
}

#[tokio::test]
async fn sweep_and_split() {
    let app = router(config());
    create(&app, 4).await;
    let (status, body) = call(&app, "POST", "/maintenance/sweep", Some(json!({ "threshold": 0.0 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["deleted"].as_array().unwrap().len(), 0);

    let (status, body) = call(&app, "POST", &format!("/classes/{CLASS}/split"), Some(json!({ "into": ["Office-PC", "Gaming-PC"] }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["classes"], json!(["Gaming-PC", "Office-PC"]));
    let (status, _) = call(&app, "POST", "/classes/Office-PC/split", Some(json!({ "into": ["Gaming-PC", "X"] }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", "/classes/Nope/split", Some(json!({ "into": ["A", "B"] }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/classes/Office-PC/split", Some(json!({ "into": ["A"] }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(&app, "POST", "/maintenance/sweep", Some(json!({ "threshold": 0.6 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["deleted"].as_array().unwrap().len(), bundled::simple_pc().objects().len());
    let (status, _) = call(&app, "POST", "/maintenance/sweep", Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn store_is_persisted_after_commits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let mut cfg = config();
    cfg.store_path = Some(path.clone());
    let handle = state(cfg);
    let app = router_with_state(handle.clone());
    let s = create(&app, 8).await;
    assert_eq!(RelevanceStore::load(&path).unwrap(), handle.store());
    let id = s["session_id"].as_str().unwrap();
    call(&app, "POST", &format!("/sessions/{id}/rewards"), Some(json!({ "scripted": true }))).await;
    let saved = RelevanceStore::load(&path).unwrap();
    assert_eq!(saved, handle.store());
    assert_eq!(saved.clock(CLASS).unwrap(), 1);
}
