use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use partsketch::dataset::{generate_shape, ShapeClass};
use partsketch::editing::{EditConfig, Editor};
use partsketch::model::{ModelConfig, Refiner, SketchModel};
use partsketch::render::{render_outline, Camera, GrayImage};
use partsketch::service::{router, AppState};

fn app() -> axum::Router {
    let cfg = ModelConfig::desk();
    let editor = Editor::new(
        SketchModel::new(&cfg, 5).unwrap(),
        Some(Refiner::new(&cfg, 6).unwrap()),
        EditConfig {
            grid_res: 16,
            ..EditConfig::default()
        },
    )
    .unwrap();
    router(AppState::new(editor))
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn png_b64(img: &GrayImage) -> String {
    B64.encode(img.to_png_bytes().unwrap())
}

fn chair_sketch() -> GrayImage {
    let rec = generate_shape(3, ShapeClass::Chair, 8, 32).unwrap();
    render_outline(&rec.parts, &Camera::standard_views()[1]).unwrap()
}

async fn new_session(app: &axum::Router) -> String {
    let (status, body) = call(app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_and_session_lifecycle() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");

    let id = new_session(&app).await;
    let uri = format!("/api/sessions/{id}");
    assert_eq!(call(&app, Method::DELETE, &uri, None).await.0, StatusCode::OK);
    let (status, body) = call(&app, Method::DELETE, &uri, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "no_session");
}

#[tokio::test]
async fn generate_reports_error_codes() {
    let app = app();
    let id = new_session(&app).await;
    let uri = format!("/api/sessions/{id}/generate");

    let blank = GrayImage::filled(256, 256, 1.0);
    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"sketch_png_base64": png_b64(&blank)}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "empty_sketch");

    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"sketch_png_base64": "not base64!"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");

    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"sketch": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");

    let (status, body) = call(&app, Method::POST, "/api/sessions/missing/generate", Some(json!({"sketch_png_base64": png_b64(&blank)}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "no_session");
}

#[tokio::test]
async fn editing_round_trip() {
    let app = app();
    let id = new_session(&app).await;
    let base = format!("/api/sessions/{id}");
    let sketch = json!({"sketch_png_base64": png_b64(&chair_sketch())});

    let (status, body) = call(&app, Method::POST, &format!("{base}/generate"), Some(sketch.clone())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["presence"].as_array().unwrap().len(), 8);
    assert_eq!(body["completion"].as_array().unwrap().len(), 8);

    let (status, body) = call(&app, Method::POST, &format!("{base}/blend"), Some(sketch.clone())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_selection");

    let (status, body) = call(&app, Method::POST, &format!("{base}/select"), Some(json!({"part_ids": [0, 99]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_selection");

    let (status, body) = call(&app, Method::POST, &format!("{base}/select"), Some(json!({"part_ids": [2, 3]}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["selected"], json!([2, 3]));

    let (status, body) = call(&app, Method::POST, &format!("{base}/refine"), Some(json!({}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["presence"][2], 1.0);

    let (status, _) = call(&app, Method::POST, &format!("{base}/blend"), Some(sketch)).await;
    assert_eq!(status, StatusCode::OK);

    let (status, _) = call(&app, Method::POST, &format!("{base}/undo"), None).await;
    assert_eq!(status, StatusCode::OK);

    let (status, body) = call(&app, Method::GET, &format!("{base}/outline?azimuth=60&elevation=20"), None).await;
    if status == StatusCode::OK {
        let png = B64.decode(body["sketch_png_base64"].as_str().unwrap()).unwrap();
        let img = GrayImage::from_png_bytes(&png).unwrap();
        assert_eq!((img.width(), img.height()), (256, 256));
    } else {
        // an untrained model may place nothing above the inclusion threshold
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(body["code"], "empty_shape");
    }
}

#[tokio::test]
async fn outline_of_an_empty_session_is_empty_shape() {
    let app = app();
    let id = new_session(&app).await;
    let (status, body) = call(&app, Method::GET, &format!("/api/sessions/{id}/outline"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "empty_shape");
}

#[tokio::test]
async fn unknown_routes_are_rejected() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/api/nope", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");
}
