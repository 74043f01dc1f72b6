use std::net::SocketAddr;
use std::time::Duration;

use otf_core::harness::RunRecord;
use otf_core::live::{Event, EventBody, RunState, TracePayload};
use otf_service::{ServeConfig, Server};
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Api {
    base: String,
    http: reqwest::Client,
}

impl Api {
    async fn start(tick_ms: u64) -> Api {
        let cfg = ServeConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            tick_ms,
            assets: None,
        };
        let server = Server::bind(&cfg).await.unwrap();
        let addr = server.local_addr().unwrap();
        tokio::spawn(server.run());
        Api {
            base: format!("http://{addr}"),
            http: reqwest::Client::new(),
        }
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self
            .http
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn create(&self, body: Value) -> String {
        let (s, v) = self.post("/api/runs", body).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["run_id"].as_str().unwrap().to_string()
    }

    async fn control(&self, id: &str, action: &str) -> (StatusCode, Value) {
        self.post(&format!("/api/runs/{id}/control"), json!({ "action": action })).await
    }

    async fn state(&self, id: &str) -> String {
        self.get(&format!("/api/runs/{id}")).await.1["state"]
            .as_str()
            .unwrap()
            .to_string()
    }

    async fn wait_state(&self, id: &str, want: &[&str]) -> String {
        for _ in 0..2000 {
            let s = self.state(id).await;
            if want.contains(&s.as_str()) {
                return s;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("run {id} never reached {want:?}");
    }

    async fn poll_all(&self, id: &str) -> Vec<Event> {
        let mut cursor = 0u64;
        let mut out = Vec::new();
        loop {
            let (s, v) = self.get(&format!("/api/runs/{id}/events?cursor={cursor}")).await;
            assert_eq!(s, StatusCode::OK);
            let batch: Vec<Event> = serde_json::from_value(v["events"].clone()).unwrap();
            assert!(batch.len() <= 1000);
            let next = v["next_cursor"].as_u64().unwrap();
            assert_eq!(next, cursor + batch.len() as u64);
            cursor = next;
            let empty = batch.is_empty();
            out.extend(batch);
            if empty {
                let st = self.state(id).await;
                if st == "finished" || st == "stopped" {
                    let (_, v) = self.get(&format!("/api/runs/{id}/events?cursor={cursor}")).await;
                    let tail: Vec<Event> = serde_json::from_value(v["events"].clone()).unwrap();
                    if tail.is_empty() {
                        return out;
                    }
                    cursor += tail.len() as u64;
                    out.extend(tail);
                    continue;
                }
                tokio::time::sleep(Duration::from_millis(5)).await;
            }
        }
    }

    async fn record(&self, id: &str) -> RunRecord {
        let (s, v) = self.get(&format!("/api/runs/{id}/record")).await;
        assert_eq!(s, StatusCode::OK);
        serde_json::from_value(v).unwrap()
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn create_validates_and_assigns_distinct_ids() {
    let api = Api::start(0).await;
    let a = api.create(json!({"algorithm": "gd", "seed": 1})).await;
    let b = api.create(json!({"algorithm": "gd", "seed": 1})).await;
    assert_ne!(a, b);
    let (s, v) = api.get(&format!("/api/runs/{a}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "created");
    assert_eq!(v["request"]["algorithm"], "gd");
    assert_eq!(v["request"]["seed"], 1);

    let (s, v) = api
        .post("/api/runs", json!({"algorithm": "ea", "config": {"pop_size": 1}}))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "pop_size");
    assert!(v["error"].is_string());

    let (s, v) = api.post("/api/runs", json!({"algorithm": "gd", "objective": "booth"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "objective");

    let (s, v) = api.post("/api/runs", json!({"algorithm": "gd", "config": {"atol": 0.1}})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "atol");

    let (s, v) = api.post("/api/runs", json!({"algorithm": "gd", "config": {"alhpa": 0.1}})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "alhpa");

    let (_, v) = api.get("/api/runs").await;
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_routes_and_runs_are_json_404() {
    let api = Api::start(0).await;
    let (s, v) = api.get("/api/nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].is_string());
    let (s, v) = api.get("/api/runs/missing").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("missing"));
    let (s, _) = api.get("/elsewhere").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = api.control("missing", "start").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn objectives_listing() {
    let api = Api::start(0).await;
    let (s, v) = api.get("/api/objectives").await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|o| o["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["bohachevsky", "booth", "mh_density", "sa_density", "repressilator"]);
    assert_eq!(v[0]["domain"]["lower"], json!([-100.0, -100.0]));
}

#[tokio::test(flavor = "multi_thread")]
async fn lifecycle_and_cursor_contract() {
    let api = Api::start(0).await;
    let id = api
        .create(json!({"algorithm": "gd", "seed": 3, "config": {"iterations": 10}}))
        .await;
    let (s, _) = api.control(&id, "pause").await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, v) = api.control(&id, "start").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "running");
    api.wait_state(&id, &["finished"]).await;

    let events = api.poll_all(&id).await;
    assert_eq!(events[0].iteration, 0);
    assert!(matches!(events[0].body, EventBody::Trace(TracePayload::Gd(_))));
    assert_eq!(events.iter().filter(|e| e.trace().is_some()).count(), 11);
    assert!(matches!(events.last().unwrap().body, EventBody::State(ref s) if s.state == RunState::Finished));
    assert_eq!(api.record(&id).await.events, events);

    let n = events.len();
    let (_, v) = api.get(&format!("/api/runs/{id}/events?cursor={n}")).await;
    assert_eq!(v["events"], json!([]));
    assert_eq!(v["next_cursor"], n);
    let (_, v) = api.get(&format!("/api/runs/{id}/events?cursor={}", n + 5)).await;
    assert_eq!(v["next_cursor"], n + 5);
    let (s, v) = api.get(&format!("/api/runs/{id}/events?cursor=-1")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "cursor");

    for action in ["pause", "resume", "stop", "start"] {
        let (s, _) = api.control(&id, action).await;
        assert_eq!(s, StatusCode::CONFLICT, "{action}");
    }
    let (s, _) = api.post(&format!("/api/runs/{id}/params"), json!({"parameter": "alpha", "value": 0.1})).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn large_logs_are_paged() {
    let api = Api::start(0).await;
    let id = api
        .create(json!({"algorithm": "mh", "seed": 3, "config": {"n_iterations": 2500}}))
        .await;
    api.control(&id, "start").await;
    api.wait_state(&id, &["finished"]).await;
    let (_, v) = api.get(&format!("/api/runs/{id}/events?cursor=0")).await;
    assert_eq!(v["events"].as_array().unwrap().len(), 1000);
    assert_eq!(v["next_cursor"], 1000);
    let all = api.poll_all(&id).await;
    assert_eq!(all.len(), 2501);
}

#[tokio::test(flavor = "multi_thread")]
async fn stop_seals_the_log() {
    let api = Api::start(5).await;
    let id = api
        .create(json!({"algorithm": "gd", "seed": 3, "config": {"iterations": 100000}}))
        .await;
    api.control(&id, "start").await;
    tokio::time::sleep(Duration::from_millis(50)).await;
    let (s, v) = api.control(&id, "stop").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "stopped");
    let events = api.poll_all(&id).await;
    let last = events.last().unwrap();
    assert!(matches!(last.body, EventBody::State(ref s) if s.state == RunState::Stopped));
    let traces = events.iter().filter(|e| e.trace().is_some()).count();
    assert!(traces < 100001);
    tokio::time::sleep(Duration::from_millis(30)).await;
    assert_eq!(api.poll_all(&id).await.len(), events.len());
}

#[tokio::test(flavor = "multi_thread")]
async fn parameter_overrides() {
    let api = Api::start(2).await;
    let id = api
        .create(json!({"algorithm": "gd", "seed": 8, "config": {"iterations": 400}}))
        .await;
    let p = format!("/api/runs/{id}/params");
    // Not yet running.
    let (s, _) = api.post(&p, json!({"parameter": "alpha", "value": 0.0005})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    api.control(&id, "start").await;

    let (s, v) = api.post(&p, json!({"parameter": "proposal_std", "value": 0.5})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "parameter");
    let (s, v) = api.post(&p, json!({"parameter": "beta", "value": 0.5})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "parameter");
    let (s, v) = api.post(&p, json!({"parameter": "alpha", "value": -1.0})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "value");

    // Pause so both writes land before the same boundary.
    api.control(&id, "pause").await;
    tokio::time::sleep(Duration::from_millis(20)).await;
    let (s1, a1) = api.post(&p, json!({"parameter": "alpha", "value": 0.002})).await;
    let (s2, a2) = api.post(&p, json!({"parameter": "alpha", "value": 0.0005})).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a1["applied_at_iteration"], a2["applied_at_iteration"]);
    let k = a2["applied_at_iteration"].as_u64().unwrap();
    api.control(&id, "resume").await;
    api.wait_state(&id, &["finished"]).await;

    let events = api.poll_all(&id).await;
    let adjustments: Vec<&Event> = events.iter().filter(|e| e.adjustment().is_some()).collect();
    assert_eq!(adjustments.len(), 1);
    let adj = adjustments[0].adjustment().unwrap();
    assert_eq!(adjustments[0].iteration, k);
    assert_eq!((adj.old, adj.new), (0.001, 0.0005));
    assert_eq!(serde_json::to_value(adj.source).unwrap(), "human");
    for e in &events {
        if let Some(TracePayload::Gd(t)) = e.trace() {
            let want = if e.iteration < k { 0.001 } else { 0.0005 };
            assert_eq!(t.alpha, want, "iteration {}", e.iteration);
        }
    }
    let iters: Vec<u64> = events.iter().filter(|e| e.trace().is_some()).map(|e| e.iteration).collect();
    assert!(iters.windows(2).all(|w| w[1] > w[0]));
    assert!(events.windows(2).all(|w| w[1].iteration >= w[0].iteration));
}

#[tokio::test(flavor = "multi_thread")]
async fn live_run_replays_in_batch() {
    let api = Api::start(1).await;
    let id = api
        .create(json!({"algorithm": "sa", "seed": 21, "config": {"n_iterations": 600}}))
        .await;
    api.control(&id, "start").await;
    let p = format!("/api/runs/{id}/params");
    tokio::time::sleep(Duration::from_millis(40)).await;
    api.post(&p, json!({"parameter": "proposal_std", "value": 0.4})).await;
    tokio::time::sleep(Duration::from_millis(60)).await;
    api.post(&p, json!({"parameter": "cooling", "value": 0.9})).await;
    api.wait_state(&id, &["finished"]).await;

    let live = api.record(&id).await;
    assert!(!live.adjustment_schedule().is_empty());
    let replayed = live.replay().unwrap();
    let a: Vec<&Event> = live.trace_events().collect();
    let b: Vec<&Event> = replayed.trace_events().collect();
    assert_eq!(a, b);
}
