#![allow(dead_code)]

pub mod deploy;
pub mod dsl;
pub mod hints;
pub mod matrix;
pub mod oracle;

use std::sync::Arc;

use serde_json::Value;
use thunder_core::clock::{ManualClock, Timestamp};
use thunder_core::{ApiRequest, ApiResponse, Emulator, LevelRegistry, Platform};

pub const PROJECT: &str = "proj-player1";

pub fn emulator(seed: u64) -> Emulator {
    Emulator::builder()
        .seed(seed)
        .clock(ManualClock::new(Timestamp(1_700_000_000_000)))
        .build()
}

pub fn platform(seed: u64) -> Platform {
    Platform::new(emulator(seed), LevelRegistry::shipped())
}

pub fn json(resp: &ApiResponse) -> Value {
    serde_json::from_slice(&resp.body).unwrap_or_else(|e| panic!("not json ({e}): {}", resp.body_text()))
}

pub fn ok(p: &mut Platform, req: ApiRequest) -> ApiResponse {
    let resp = p.handle(&req);
    assert_eq!(resp.status, 200, "{} {} -> {}", req.method, req.path, resp.body_text());
    resp
}

/// Creates the level in a fresh project through the API and returns the
/// start info.
pub fn create(p: &mut Platform, level: &str) -> Value {
    let resp = ok(
        p,
        ApiRequest::post("/ctf/v1/create").with_json(&serde_json::json!({"level": level, "project_id": PROJECT})),
    );
    json(&resp)
}

/// Activates a key file and returns the access token.
pub fn activate(p: &mut Platform, key_file: &str) -> String {
    let key: Value = serde_json::from_str(key_file).unwrap();
    let resp = ok(
        p,
        ApiRequest::post("/iam/v1/token").with_json(&serde_json::json!({
            "client_email": key["client_email"],
            "private_key": key["private_key"],
        })),
    );
    json(&resp)["access_token"].as_str().unwrap().to_string()
}

pub fn clock() -> Arc<ManualClock> {
    ManualClock::new(Timestamp(1_700_000_000_000))
}
