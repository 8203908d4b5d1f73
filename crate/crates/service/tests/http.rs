// SPDX-License-Identifier: Apache-2.0

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use rmtiso_core::control::Controller;
use rmtiso_core::system::SystemConfig;
use rmtiso_service::{app, shared, Shared};

const CALC: &str = include_str!("../../core/fixtures/programs/calc.rmt");
const FIREWALL: &str = include_str!("../../core/fixtures/programs/firewall.rmt");
const VID_WRITE: &str = include_str!("../../core/fixtures/violations/vid_write.rmt");
const CHAIN: &str = include_str!("../../core/fixtures/violations/dependency_chain.rmt");

fn state() -> Shared {
    let sys = SystemConfig::from_toml("[[routes]]\nip = \"10.0.0.1\"\nport = 3\n").unwrap();
    shared(Controller::new(0x00C0FFEE, sys).unwrap())
}

async fn call(s: &Shared, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app(s.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

/// 802.1Q/IPv4/UDP frame to 10.0.0.1 carrying the calc payload.
fn calc_frame(vid: u16, op: u16, a: u32, b: u32) -> String {
    let mut payload = op.to_be_bytes().to_vec();
    payload.extend(a.to_be_bytes());
    payload.extend(b.to_be_bytes());
    payload.extend([0u8; 4]);
    let f = rmtiso_core::net::UdpFlow::new(vid, [10, 0, 0, 9].into(), [10, 0, 0, 1].into(), 1, 2);
    hex::encode(rmtiso_core::net::udp_frame(&f, &payload))
}

#[tokio::test]
async fn module_lifecycle() {
    let s = state();
    let (st, v) = call(&s, Method::POST, "/modules", Some(json!({"source": CALC, "vid": 10}))).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    let slot = v["slot"].as_u64().unwrap();
    assert_eq!(v["name"], "calc");

    let (st, v) = call(&s, Method::POST, "/modules", Some(json!({"source": FIREWALL, "vid": 10}))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["kind"], "capacity");

    let (_, v) = call(&s, Method::POST, "/packets", Some(json!({"hex": calc_frame(10, 1, 2, 3)}))).await;
    assert_eq!(v["verdict"], json!({"forwarded": {"ports": [1]}}), "{v}");

    let (st, v) = call(&s, Method::GET, &format!("/modules/{slot}/counters"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["vid"], 10);

    let (st, _) = call(&s, Method::PUT, &format!("/modules/{slot}"), Some(json!({"source": FIREWALL}))).await;
    assert_eq!(st, StatusCode::OK);
    let (_, v) = call(&s, Method::GET, "/modules", None).await;
    assert_eq!(v[0]["name"], "firewall");

    let (st, _) = call(&s, Method::DELETE, &format!("/modules/{slot}"), None).await;
    assert_eq!(st, StatusCode::NO_CONTENT);
    let (st, _) = call(&s, Method::GET, &format!("/modules/{slot}"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (_, v) = call(&s, Method::POST, "/packets", Some(json!({"hex": calc_frame(10, 1, 2, 3)}))).await;
    assert_eq!(v["verdict"], json!({"dropped": {"reason": "unknown_module"}}), "{v}");
}

#[tokio::test]
async fn compile_errors_carry_exit_codes() {
    let s = state();
    let (st, v) = call(&s, Method::POST, "/compile", Some(json!({"source": CALC}))).await;
    assert_eq!(st, StatusCode::OK);
    assert!(!v["packets"].as_array().unwrap().is_empty());
    assert!(v["dump"].as_str().unwrap().contains("cam@"));
    for (src, code) in [(VID_WRITE, 3), (CHAIN, 5), ("module", 2)] {
        let (st, v) = call(&s, Method::POST, "/compile", Some(json!({"source": src}))).await;
        assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(v["exit_code"], code, "{v}");
    }
}

#[tokio::test]
async fn entries_and_registers() {
    let s = state();
    let (_, before) = call(&s, Method::GET, "/filter/counter", None).await;
    // A page-table row for an unbound slot.
    let line = "page_table@3 20 1004";
    let (st, v) = call(&s, Method::PUT, "/entries", Some(json!({"line": line}))).await;
    assert_eq!(st, StatusCode::NOT_FOUND, "{v}");
    let (_, v) = call(&s, Method::POST, "/entries", Some(json!({"line": line}))).await;
    assert_eq!(v["verdict"], json!({"consumed_reconfig": {"result": "applied"}}), "{v}");
    let (_, v) = call(&s, Method::GET, "/entries/page_table@3/20", None).await;
    assert_eq!(v["line"], line);
    let (_, v) = call(&s, Method::PUT, "/entries", Some(json!({"line": "page_table@3 20 2004"}))).await;
    assert_eq!(v["verdict"], json!({"consumed_reconfig": {"result": "applied"}}), "{v}");
    let (_, after) = call(&s, Method::GET, "/filter/counter", None).await;
    assert_eq!(after["value"].as_u64().unwrap(), before["value"].as_u64().unwrap() + 2);

    let (st, _) = call(&s, Method::PUT, "/filter/counter", Some(json!({"register": "counter", "value": 0}))).await;
    assert_eq!(st, StatusCode::FORBIDDEN);
    let (st, v) = call(&s, Method::PUT, "/filter/bitmap", Some(json!({"register": "bitmap", "value": 4}))).await;
    assert_eq!((st, v["value"].clone()), (StatusCode::OK, json!(4)));
    let (_, v) = call(&s, Method::GET, "/state", None).await;
    assert_eq!(v["update_bitmap"], 4);
    assert!(v["lines"].as_array().unwrap().iter().any(|l| l == "page_table@3 20 2004"));

    let (st, _) = call(&s, Method::POST, "/entries", Some(json!({"line": "cam@9 0 00"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&s, Method::GET, "/filter/nope", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&s, Method::POST, "/packets", Some(json!({"hex": "zz"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn scenario_runs_on_a_private_pipeline() {
    let s = state();
    let sc = rmtiso_core::harness::Scenario::from_toml(
        &format!("ticks = 5\n[[modules]]\nvid = 10\nprogram = '''{CALC}'''\n[[traffic]]\nvid = 10\nrate = 2\n"),
        None,
    )
    .unwrap();
    let (st, v) = call(&s, Method::POST, "/scenarios/run", Some(json!({"scenario": sc}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["totals"]["10"]["injected"], 10);
    let (_, h) = call(&s, Method::GET, "/health", None).await;
    assert_eq!(h["modules"], 0);

    let mut bad = serde_json::to_value(&sc).unwrap();
    bad["modules"][0] = json!({"vid": 10, "source": "/etc/passwd"});
    let (st, v) = call(&s, Method::POST, "/scenarios/run", Some(json!({"scenario": bad}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");
}
