//! Every ```json <Type> block under docs/api must parse as that type and
//! serialize back to the same JSON.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use snn_tune::server::protocol::{
    ClientMessage, CreateSession, ErrorBody, ParamPatch, RunRequest, ServerMessage, SessionInfo, StatsResponse,
    ValidationReport,
};

fn docs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/api")
}

/// (file, type name, body) for every tagged block.
fn tagged_blocks() -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(docs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "md") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        while let Some(line) = lines.next() {
            let Some(name) = line.strip_prefix("```json ") else { continue };
            let body: Vec<&str> = lines.by_ref().take_while(|l| !l.starts_with("```")).collect();
            out.push((path.display().to_string(), name.trim().to_string(), body.join("\n")));
        }
    }
    out
}

fn round_trip<T: Serialize + DeserializeOwned>(body: &str) -> Result<(), String> {
    let original: Value = serde_json::from_str(body).map_err(|e| format!("not JSON: {e}"))?;
    let parsed: T = serde_json::from_value(original.clone()).map_err(|e| e.to_string())?;
    let back = serde_json::to_value(&parsed).unwrap();
    if back == original {
        Ok(())
    } else {
        Err(format!("serializes back as {back}"))
    }
}

#[test]
fn documented_examples_match_protocol_types() {
    let blocks = tagged_blocks();
    let mut seen = std::collections::BTreeSet::new();
    for (file, name, body) in &blocks {
        let result = match name.as_str() {
            "CreateSession" => round_trip::<CreateSession>(body),
            "RunRequest" => round_trip::<RunRequest>(body),
            "SessionInfo" => round_trip::<SessionInfo>(body),
            "ValidationReport" => round_trip::<ValidationReport>(body),
            "StatsResponse" => round_trip::<StatsResponse>(body),
            "ErrorBody" => round_trip::<ErrorBody>(body),
            "ParamPatch" => round_trip::<ParamPatch>(body),
            "ServerMessage" => round_trip::<ServerMessage>(body),
            "ClientMessage" => round_trip::<ClientMessage>(body),
            other => Err(format!("no protocol type `{other}`")),
        };
        if let Err(e) = result {
            panic!("{file}: {name} example: {e}");
        }
        seen.insert(name.as_str());
    }
    for required in [
        "CreateSession",
        "RunRequest",
        "SessionInfo",
        "ValidationReport",
        "StatsResponse",
        "ErrorBody",
        "ParamPatch",
        "ServerMessage",
        "ClientMessage",
    ] {
        assert!(seen.contains(required), "{required} is undocumented");
    }
}

#[test]
fn every_stream_message_kind_is_documented() {
    let kinds: std::collections::BTreeSet<String> = tagged_blocks()
        .into_iter()
        .filter(|(_, name, _)| name == "ServerMessage")
        .map(|(_, _, body)| serde_json::from_str::<Value>(&body).unwrap()["type"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds, ["closed", "error", "frame", "status"].map(String::from).into());
}
