use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use payoff_forge_service::{router, BODY_LIMIT};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

async fn call(method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let response = router().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

async fn post(uri: &str, body: &Value) -> (StatusCode, Value) {
    let (status, bytes) = call("POST", uri, serde_json::to_vec(body).unwrap()).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn numbers(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[tokio::test]
async fn health_reports_version() {
    let (status, bytes) = call("GET", "/v1/health", vec![]).await;
    assert_eq!(status, StatusCode::OK);
    let body: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(body["status"], "ok");
    assert_eq!(body["version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn log_family_returns_growth_optimal() {
    let body = json!({ "product": fixture("three_state.json"), "risk": { "family": "log" } });
    let (status, out) = post("/v1/solve", &body).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["payoff"], out["growth_optimal"]);
    assert_eq!(out["payoff"].as_array().unwrap().len(), 3);
    assert!(out["cost_residual"].as_f64().unwrap().abs() <= 1e-10);
    assert_eq!(out["validation"]["acceptable"], true);
}

#[tokio::test]
async fn one_param_two_bucket() {
    let body = json!({ "product": fixture("two_bucket.json"), "risk": { "a": 2.0 } });
    let (status, out) = post("/v1/solve", &body).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    let payoff = numbers(&out["payoff"]);
    assert!((payoff[0] - 1.5).abs() <= 1e-15);
    assert!((payoff[1] - 5.0 / 6.0).abs() <= 1e-15);
    assert_eq!(out["manifest"]["solver"], "one_param_family");
}

#[tokio::test]
async fn max_loss_records_calibrated_a() {
    let body = json!({ "product": fixture("max_loss.json"), "risk": { "max_loss": 0.7 } });
    let (status, out) = post("/v1/solve", &body).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["manifest"]["calibrated_a"], 2.0);
}

#[tokio::test]
async fn risk_loving_profile_is_unprocessable() {
    let body = json!({
        "product": fixture("three_state.json"),
        "risk": { "values": [2.0, -1.0] }
    });
    let (status, out) = post("/v1/solve", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(out["error"]["kind"], "domain");
    assert!(out["error"]["message"]
        .as_str()
        .unwrap()
        .contains("risk-loving input"));
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let (status, _) = call("POST", "/v1/solve", b"{not json".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, out) = post("/v1/solve", &json!({ "product": 3 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(out["error"]["kind"], "malformed");
    let (status, _) = post(
        "/v1/solve",
        &json!({ "product": fixture("two_bucket.json"), "extra": 1 }),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn file_references_are_refused() {
    let body = json!({
        "product": fixture("three_state.json"),
        "risk": { "file": "profile.csv" }
    });
    let (status, _) = post("/v1/solve", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn oversized_body_is_rejected() {
    let (status, _) = call("POST", "/v1/solve", vec![b' '; BODY_LIMIT + 1]).await;
    assert!(status.is_client_error(), "{status}");
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let body = serde_json::to_vec(&json!({
        "product": fixture("three_state.json"),
        "risk": { "family": "constant_relative", "R": 3.0 }
    }))
    .unwrap();
    let (s1, b1) = call("POST", "/v1/solve", body.clone()).await;
    let (s2, b2) = call("POST", "/v1/solve", body).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(b1, b2);
}

#[tokio::test]
async fn imply_growth_optimal_is_unit() {
    let product = fixture("three_state.json");
    let (_, solved) = post(
        "/v1/solve",
        &json!({ "product": product, "risk": { "family": "log" } }),
    )
    .await;
    let body = json!({ "product": product, "payoff": solved["growth_optimal"] });
    let (status, out) = post("/v1/imply-risk-aversion", &body).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(numbers(&out["x_mid"]), vec![95.0, 105.0]);
    for v in numbers(&out["implied_risk_aversion"]["values"]) {
        assert!((v - 1.0).abs() <= 1e-12);
    }
}

#[tokio::test]
async fn imply_bond_is_infinite() {
    let body = json!({ "product": fixture("three_state.json"), "payoff": [1.0, 1.0, 1.0] });
    let (status, out) = post("/v1/imply-risk-aversion", &body).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    let series = &out["implied_risk_aversion"];
    assert_eq!(series["values"], json!([null, null]));
    assert_eq!(series["markers"], json!({ "0": "inf", "1": "inf" }));
}

#[tokio::test]
async fn imply_recovers_solving_profile() {
    let product = fixture("three_state.json");
    let profile = [2.5, 0.75];
    let (_, solved) = post(
        "/v1/solve",
        &json!({ "product": product, "risk": { "values": profile } }),
    )
    .await;
    let body = json!({ "product": product, "payoff": solved["payoff"] });
    let (_, out) = post("/v1/imply-risk-aversion", &body).await;
    for (got, want) in numbers(&out["implied_risk_aversion"]["values"])
        .iter()
        .zip(profile)
    {
        assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
    }
}

#[tokio::test]
async fn imply_mesh_mismatch_is_unprocessable() {
    let body = json!({ "product": fixture("three_state.json"), "payoff": [1.0, 1.0] });
    let (status, _) = post("/v1/imply-risk-aversion", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn validate_overlay_recovers_risk_aversion() {
    let (status, out) = post(
        "/v1/validate",
        &json!({ "product": fixture("shimko_overlay.json") }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["acceptable"], true);
    let recovered = out["recovered_risk_aversion"].as_f64().unwrap();
    assert!((recovered - 2.5).abs() <= 1e-10, "{recovered}");
}

#[tokio::test]
async fn validate_flags_wing_blend() {
    let (status, out) = post(
        "/v1/validate",
        &json!({ "product": fixture("wing_blend.json") }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["acceptable"], false);
    assert_eq!(out["classification"], "irrational-oscillation");
}

#[tokio::test]
async fn validate_bond_passes_with_note() {
    let (status, out) = post("/v1/validate", &json!({ "product": fixture("bond.json") })).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["acceptable"], true);
    let notes = out["notes"].as_array().unwrap();
    assert!(
        notes
            .iter()
            .any(|n| n.as_str().unwrap().starts_with("bond")),
        "{notes:?}"
    );
}

#[tokio::test]
async fn validate_needs_a_subject() {
    let (status, _) = post(
        "/v1/validate",
        &json!({ "product": fixture("three_state.json") }),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}
