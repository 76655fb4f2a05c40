use std::collections::BTreeSet;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

use snn_tune::analysis::wta_index_between;
use snn_tune::engine::{run, Recording};
use snn_tune::experiments::preset;
use snn_tune::server::protocol::{Frame, ServerMessage, SessionInfo, Status};

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(snn_tune::server::serve(listener));
    format!("127.0.0.1:{}", addr.port())
}

struct Api {
    host: String,
    http: reqwest::Client,
}

impl Api {
    async fn new() -> Self {
        Api {
            host: start().await,
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.host)
    }

    async fn call(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> (u16, String) {
        let mut req = self.http.request(method, self.url(path));
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        (resp.status().as_u16(), resp.text().await.unwrap())
    }

    async fn create(&self, body: Value) -> SessionInfo {
        let (code, text) = self.call(reqwest::Method::POST, "/sessions", Some(body)).await;
        assert_eq!(code, 201, "{text}");
        serde_json::from_str(&text).unwrap()
    }

    async fn info(&self, id: &str) -> SessionInfo {
        let (code, text) = self.call(reqwest::Method::GET, &format!("/sessions/{id}"), None).await;
        assert_eq!(code, 200, "{text}");
        serde_json::from_str(&text).unwrap()
    }

    async fn run(&self, id: &str, body: Value) -> (u16, String) {
        self.call(reqwest::Method::POST, &format!("/sessions/{id}/run"), Some(body)).await
    }

    async fn wait_for(&self, id: &str, status: Status) -> SessionInfo {
        for _ in 0..2000 {
            let info = self.info(id).await;
            if info.status == status {
                return info;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("session {id} never reached {status:?}");
    }

    async fn recording(&self, id: &str) -> Recording {
        let (code, text) = self.call(reqwest::Method::GET, &format!("/sessions/{id}/recording"), None).await;
        assert_eq!(code, 200);
        Recording::from_json(&text).unwrap()
    }

    async fn stream(&self, id: &str, decimation: u64) -> Ws {
        let url = format!("ws://{}/sessions/{id}/stream?decimation={decimation}", self.host);
        tokio_tungstenite::connect_async(url).await.unwrap().0
    }
}

/// Reads messages until the stream reports `until` (or closes).
async fn collect(ws: &mut Ws, until: Status) -> Vec<Frame> {
    let mut frames = Vec::new();
    while let Some(msg) = tokio::time::timeout(Duration::from_secs(30), ws.next()).await.unwrap() {
        let Message::Text(text) = msg.unwrap() else { continue };
        match serde_json::from_str::<ServerMessage>(&text).unwrap() {
            ServerMessage::Frame(f) => frames.push(f),
            ServerMessage::Status { status, .. } if status == until => break,
            ServerMessage::Closed { .. } => break,
            _ => {}
        }
    }
    frames
}

fn assert_contiguous(frames: &[Frame], start: u64) {
    let mut next = start;
    for f in frames {
        assert_eq!(f.from_step, next, "gap or duplicate before step {}", f.step);
        assert!(f.step >= f.from_step);
        next = f.step + 1;
    }
}

fn frame_events(frames: &[Frame]) -> BTreeSet<(u64, String, u32)> {
    frames
        .iter()
        .flat_map(|f| &f.spikes)
        .flat_map(|p| p.events.iter().map(|&(s, n)| (s, p.population.clone(), n)))
        .collect()
}

fn ndjson_events(text: &str) -> BTreeSet<(u64, String, u32)> {
    text.lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (
                v["step"].as_u64().unwrap(),
                v["population"].as_str().unwrap().to_string(),
                v["neuron"].as_u64().unwrap() as u32,
            )
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn stream_reconstructs_recording() {
    let api = Api::new().await;
    let s = api.create(json!({"preset": "fig6_lif_ooom"})).await;
    assert_eq!(s.status, Status::Idle);
    assert_eq!(s.total_steps, 1000);
    let mut ws = api.stream(&s.id, 10).await;
    let (code, _) = api.run(&s.id, json!({})).await;
    assert_eq!(code, 200);
    let frames = collect(&mut ws, Status::Done).await;
    assert_eq!(frames.len(), 100);
    assert_contiguous(&frames, 0);
    assert_eq!(frames.last().unwrap().step, 999);

    let (code, nd) = api
        .call(reqwest::Method::GET, &format!("/sessions/{}/recording?format=ndjson", s.id), None)
        .await;
    assert_eq!(code, 200);
    let from_stream = frame_events(&frames);
    assert!(!from_stream.is_empty());
    assert_eq!(from_stream, ndjson_events(&nd));

    // the service adds nothing to the simulation itself
    let served = api.recording(&s.id).await;
    let offline = run(&preset("fig6_lif_ooom").unwrap().spec).unwrap();
    assert_eq!(served.to_json(), offline.to_json());
}

#[tokio::test(flavor = "multi_thread")]
async fn hundred_steps_give_hundred_over_decimation_frames() {
    let api = Api::new().await;
    let s = api.create(json!({"preset": "fig3_resonant"})).await;
    let mut ws = api.stream(&s.id, 25).await;
    api.run(&s.id, json!({"until_ms": 10.0})).await; // 100 steps at 0.1 ms
    let frames = collect(&mut ws, Status::Paused).await;
    assert_eq!(frames.len(), 4);
    assert_contiguous(&frames, 0);
    assert!(frames.windows(2).all(|w| w[0].step < w[1].step));
    // the voltage trace rides along, sampled at each frame's last step
    let rec = api.recording(&s.id).await;
    let trace = rec.trace("raf", snn_tune::engine::Observable::Voltage).unwrap();
    for f in &frames {
        let sample = f.traces.iter().find(|t| t.population == "raf").unwrap();
        assert_eq!(sample.values, trace.samples[f.step as usize]);
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn pause_and_resume_lose_nothing() {
    let api = Api::new().await;
    let s = api.create(json!({"preset": "fig6_lif_none"})).await;
    let mut ws = api.stream(&s.id, 7).await;
    api.run(&s.id, json!({"until_ms": 333.0})).await;
    let mut frames = collect(&mut ws, Status::Paused).await;
    let paused = api.info(&s.id).await;
    assert_eq!(paused.step, 333);
    // silent while paused
    assert!(tokio::time::timeout(Duration::from_millis(100), ws.next()).await.is_err());
    // change decimation mid-stream
    ws.send(Message::Text(r#"{"decimation": 50}"#.into())).await.unwrap();
    tokio::time::sleep(Duration::from_millis(50)).await;
    api.run(&s.id, json!({})).await;
    frames.extend(collect(&mut ws, Status::Done).await);
    assert_contiguous(&frames, 0);
    assert_eq!(frames.last().unwrap().step, 999);
    let rec = api.recording(&s.id).await;
    let expected: BTreeSet<_> = rec
        .rasters
        .iter()
        .flat_map(|r| r.events.iter().map(|&(st, n)| (st, r.population.clone(), n)))
        .collect();
    assert_eq!(frame_events(&frames), expected);
    let offline = run(&preset("fig6_lif_none").unwrap().spec).unwrap();
    assert_eq!(rec.to_json(), offline.to_json());
}

#[tokio::test(flavor = "multi_thread")]
async fn status_transitions() {
    let api = Api::new().await;
    let s = api.create(json!({"preset": "fig3_nonresonant"})).await;
    let pause = format!("/sessions/{}/pause", s.id);
    assert_eq!(api.call(reqwest::Method::POST, &pause, None).await.0, 409);
    assert_eq!(api.run(&s.id, json!({"until_ms": 5.0})).await.0, 200);
    api.wait_for(&s.id, Status::Paused).await;
    assert_eq!(api.call(reqwest::Method::POST, &pause, None).await.0, 409);
    // until_ms not ahead of the current time
    assert_eq!(api.run(&s.id, json!({"until_ms": 5.0})).await.0, 400);
    assert_eq!(api.run(&s.id, json!({})).await.0, 200);
    let done = api.wait_for(&s.id, Status::Done).await;
    assert_eq!(done.step, done.total_steps);
    assert_eq!(api.run(&s.id, json!({})).await.0, 409);
    let patch = format!("/sessions/{}/params", s.id);
    let (code, _) = api
        .call(reqwest::Method::PATCH, &patch, Some(json!({"populations.raf.params.b": -0.1})))
        .await;
    assert_eq!(code, 409);
    let stream = format!("/sessions/{}/stream", s.id);
    let resp = reqwest::get(api.url(&stream)).await.unwrap();
    assert_ne!(resp.status().as_u16(), 101);
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_carry_diagnostics() {
    let api = Api::new().await;
    let mut spec = serde_json::to_value(preset("fig6_lif_ooom").unwrap().spec).unwrap();
    spec["projections"][0]["target"] = json!("missing");
    let (code, text) = api
        .call(reqwest::Method::POST, "/sessions", Some(json!({"spec": spec})))
        .await;
    assert_eq!(code, 400);
    let body: Value = serde_json::from_str(&text).unwrap();
    assert!(body["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["message"].as_str().unwrap().contains("missing")));

    let (code, text) = api.call(reqwest::Method::POST, "/validate", Some(json!({"spec": spec}))).await;
    assert_eq!(code, 200);
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap()["valid"], false);

    assert_eq!(api.call(reqwest::Method::GET, "/sessions/nope", None).await.0, 404);
    assert_eq!(api.call(reqwest::Method::POST, "/sessions/nope/run", None).await.0, 404);
    assert_eq!(
        api.call(reqwest::Method::POST, "/sessions", Some(json!({"preset": "fig9"}))).await.0,
        404
    );
    assert_eq!(api.call(reqwest::Method::POST, "/sessions", Some(json!({}))).await.0, 400);

    let s = api.create(json!({"preset": "fig6_lif_ooom"})).await;
    let patch = format!("/sessions/{}/params", s.id);
    // a rejected patch leaves every parameter untouched
    let (code, text) = api
        .call(
            reqwest::Method::PATCH,
            &patch,
            Some(json!({"projections.inh_to_exc.weight": 0.5, "populations.exc.params.tau_v_ms": 5.0})),
        )
        .await;
    assert_eq!(code, 400);
    let body: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(body["diagnostics"][0]["path"], "projections.inh_to_exc.weight");
    let (code, text) = api
        .call(reqwest::Method::PATCH, &patch, Some(json!({"populations.exc.params.tau_v_ms": -1.0})))
        .await;
    assert_eq!(code, 400);
    let body: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(body["diagnostics"][0]["path"], "populations.exc.params.tau_v_ms");
    assert_eq!(body["diagnostics"][0]["code"], "non_positive_time_constant");
    assert_eq!(api.call(reqwest::Method::PATCH, &patch, Some(json!({"a": "b"}))).await.0, 400);
    api.run(&s.id, json!({})).await;
    api.wait_for(&s.id, Status::Done).await;
    let offline = run(&preset("fig6_lif_ooom").unwrap().spec).unwrap();
    assert_eq!(api.recording(&s.id).await.to_json(), offline.to_json());
}

#[tokio::test(flavor = "multi_thread")]
async fn stats_on_empty_session() {
    let api = Api::new().await;
    let s = api.create(json!({"preset": "fig6_lif_none"})).await;
    let (code, text) = api
        .call(reqwest::Method::GET, &format!("/sessions/{}/stats?window_ms=100", s.id), None)
        .await;
    assert_eq!(code, 200, "{text}");
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["step"], 0);
    for p in v["populations"].as_array().unwrap() {
        assert_eq!(p["events"], 0);
        assert_eq!(p["fano"], 0.0);
        assert!(p["concentration"].is_null());
    }
    let (code, _) = api
        .call(reqwest::Method::GET, &format!("/sessions/{}/stats?window_ms=0", s.id), None)
        .await;
    assert_eq!(code, 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn presets_endpoint_lists_catalog() {
    let api = Api::new().await;
    let (code, text) = api.call(reqwest::Method::GET, "/presets", None).await;
    assert_eq!(code, 200);
    let v: Value = serde_json::from_str(&text).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(names, snn_tune::experiments::preset_names());
}

#[tokio::test(flavor = "multi_thread")]
async fn delete_closes_stream_with_marker() {
    let api = Api::new().await;
    let s = api.create(json!({"preset": "fig6_lif_none"})).await;
    let mut ws = api.stream(&s.id, 10).await;
    let (code, _) = api.call(reqwest::Method::DELETE, &format!("/sessions/{}", s.id), None).await;
    assert_eq!(code, 204);
    let mut saw_marker = false;
    while let Some(Ok(msg)) = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap() {
        if let Message::Text(text) = msg {
            if let ServerMessage::Closed { .. } = serde_json::from_str(&text).unwrap() {
                saw_marker = true;
            }
        }
    }
    assert!(saw_marker);
    assert_eq!(api.call(reqwest::Method::GET, &format!("/sessions/{}", s.id), None).await.0, 404);
    assert_eq!(api.call(reqwest::Method::DELETE, &format!("/sessions/{}", s.id), None).await.0, 404);
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_sessions_are_isolated() {
    let api = Api::new().await;
    let a = api.create(json!({"preset": "fig6_raf_ooom"})).await;
    let b = api.create(json!({"preset": "fig6_raf_ooom"})).await;
    assert_ne!(a.id, b.id);
    api.run(&a.id, json!({})).await;
    api.run(&b.id, json!({})).await;
    api.wait_for(&a.id, Status::Done).await;
    api.wait_for(&b.id, Status::Done).await;
    assert_eq!(api.recording(&a.id).await.to_json(), api.recording(&b.id).await.to_json());
}

#[tokio::test(flavor = "multi_thread")]
async fn live_tuning_raises_wta() {
    let api = Api::new().await;
    let s = api.create(json!({"preset": "fig6_lif_ooom"})).await;
    api.run(&s.id, json!({"until_ms": 500.0})).await;
    api.wait_for(&s.id, Status::Paused).await;
    let (code, text) = api
        .call(
            reqwest::Method::PATCH,
            &format!("/sessions/{}/params", s.id),
            Some(json!({"projections.inh_to_exc.weight": -1.5})),
        )
        .await;
    assert_eq!(code, 200, "{text}");
    api.run(&s.id, json!({})).await;
    api.wait_for(&s.id, Status::Done).await;
    let rec = api.recording(&s.id).await;
    let first = wta_index_between(&rec, "exc", 0, 500).unwrap().unwrap();
    let second = wta_index_between(&rec, "exc", 500, 1000).unwrap().unwrap();
    let untouched = run(&preset("fig6_lif_ooom").unwrap().spec).unwrap();
    let control = wta_index_between(&untouched, "exc", 500, 1000).unwrap().unwrap();
    println!("wta first half {first:.3}, second half {second:.3}, unpatched second half {control:.3}");
    assert!(second > first);
    assert!(second > control);
}
