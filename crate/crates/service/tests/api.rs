use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use p3_core::detect::{self, DetectConfig, P3Moment};
use p3_core::kpi::{self, Group, KpiFilters};
use p3_core::metrics::roc_curve;
use p3_core::model::{extract_features, save_model, train_baseline, BaselineConfig, SavedModel};
use p3_core::render::{encode_png, render_moment, RenderConfig};
use p3_core::scoring::{score_moment, ScoreRecord, SplitSide};
use p3_core::store::{self, write_file, write_json, write_jsonl};
use p3_core::synth::{self, SynthConfig};
use p3_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use std::path::Path;
use std::sync::Arc;
use tempfile::TempDir;
use tower::ServiceExt;

struct Fixture {
    _dir: TempDir,
    config: ServiceConfig,
    moments: Vec<P3Moment>,
    scores: Vec<ScoreRecord>,
}

fn small_render() -> RenderConfig {
    RenderConfig {
        width: 48,
        height: 48,
        ..RenderConfig::default()
    }
}

/// Three synthetic matches taken through every offline stage, with a
/// baseline model so what-ifs are cheap.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let raw = root.join("raw");
    synth::write_raw(
        &synth::generate(&SynthConfig {
            matches: 3,
            moments_per_match: 8,
            ..SynthConfig::default()
        }),
        &raw,
    )
    .unwrap();
    let store_dir = root.join("store");
    store::write_store(&store_dir, &store::ingest_dir(&raw).unwrap()).unwrap();
    let (moments, _) = detect::scan_corpus(&store_dir, &DetectConfig::default()).unwrap();
    write_jsonl(&detect::moments_path(&store_dir), &moments).unwrap();

    let mut config = ServiceConfig::under(root);
    config.render = small_render();
    config.model_path = root.join("models/baseline.p3m");
    for m in &moments {
        let png = encode_png(&render_moment(m, &config.render));
        write_file(
            &config.images_dir.join(format!("{}.png", m.moment_id)),
            &png,
        )
        .unwrap();
    }

    let data: Vec<_> = moments
        .iter()
        .map(|m| (extract_features(m), m.label.is_positive()))
        .collect();
    let (model, _) = train_baseline(&data, &[], &BaselineConfig::default()).unwrap();
    let model = SavedModel::Baseline(model);
    save_model(&config.model_path, &model).unwrap();
    let scores: Vec<ScoreRecord> = moments
        .iter()
        .map(|m| ScoreRecord {
            moment_id: m.moment_id.clone(),
            match_id: m.match_id.clone(),
            label: m.label,
            probability: score_moment(&model, m, &config.render).unwrap(),
            split: SplitSide::Val,
        })
        .collect();
    write_jsonl(&config.eval_dir.join("scores.jsonl"), &scores).unwrap();
    let p: Vec<f64> = scores.iter().map(|s| s.probability).collect();
    let y: Vec<bool> = scores.iter().map(|s| s.label.is_positive()).collect();
    write_json(
        &config.eval_dir.join("roc.json"),
        &roc_curve(&p, &y).unwrap(),
    )
    .unwrap();

    let rosters = store::read_rosters(&store_dir).unwrap();
    let filters = KpiFilters {
        min_minutes: 0,
        ..KpiFilters::default()
    };
    let rows = kpi::player_kpi(
        &moments,
        &kpi::minutes_played(&rosters),
        &kpi::player_directory(&rosters),
        Group::Defender,
        &filters,
    );
    write_json(&config.kpi_dir.join("players_defender.json"), &rows).unwrap();
    write_file(
        &config.kpi_dir.join("players_defender.csv"),
        &kpi::players_csv(&rows).unwrap(),
    )
    .unwrap();

    Fixture {
        _dir: dir,
        config,
        moments,
        scores,
    }
}

fn app(config: ServiceConfig) -> Router {
    router(Arc::new(AppState::load(config).unwrap())).unwrap()
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn send(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    Reply {
        status,
        headers,
        body,
    }
}

async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: impl Into<String>) -> Reply {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.into()))
        .unwrap();
    send(app, req).await
}

fn whatif_uri(m: &P3Moment) -> String {
    format!("/api/v1/moments/{}/whatif", m.moment_id)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .flatten()
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[tokio::test]
async fn health_reports_loaded_state() {
    let f = fixture();
    let app = app(f.config.clone());
    let r = get(&app, "/api/v1/health").await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["moments"], f.moments.len());
    assert_eq!(v["scored"], f.scores.len());
    assert_eq!(v["model_loaded"], true);
}

#[tokio::test]
async fn moments_are_ordered_by_probability_and_filterable() {
    let f = fixture();
    let app = app(f.config.clone());
    let v = get(&app, "/api/v1/moments?limit=200").await.json();
    let items = v["items"].as_array().unwrap();
    assert_eq!(v["total"], f.moments.len());
    let probs: Vec<f64> = items
        .iter()
        .map(|i| i["probability"].as_f64().unwrap())
        .collect();
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));

    let team = &f.moments[0].team_id;
    let v = get(
        &app,
        &format!("/api/v1/moments?team={team}&label=penetrative&limit=200"),
    )
    .await
    .json();
    let expected = f
        .moments
        .iter()
        .filter(|m| &m.team_id == team && m.label.is_positive())
        .count();
    assert_eq!(v["total"], expected);
    for i in v["items"].as_array().unwrap() {
        assert_eq!(&i["team_id"], team.as_str());
        assert_eq!(i["label"], "penetrative");
    }

    let median = {
        let mut p: Vec<f64> = f.scores.iter().map(|s| s.probability).collect();
        p.sort_by(f64::total_cmp);
        p[p.len() / 2]
    };
    let v = get(
        &app,
        &format!("/api/v1/moments?min_probability={median}&limit=200"),
    )
    .await
    .json();
    let expected = f.scores.iter().filter(|s| s.probability >= median).count();
    assert_eq!(v["total"], expected);

    let v = get(&app, "/api/v1/moments?min_x=50&max_x=60&limit=200")
        .await
        .json();
    for i in v["items"].as_array().unwrap() {
        let x = i["origin"]["x"].as_f64().unwrap();
        assert!((50.0..=60.0).contains(&x));
    }

    let v = get(
        &app,
        &format!("/api/v1/moments?offset={}", f.moments.len() + 5),
    )
    .await
    .json();
    assert_eq!(v["items"].as_array().unwrap().len(), 0);
    assert_eq!(v["total"], f.moments.len());
}

#[tokio::test]
async fn bad_queries_are_rejected_with_json_errors() {
    let f = fixture();
    let app = app(f.config);
    for (uri, status) in [
        ("/api/v1/moments?limit=abc", StatusCode::BAD_REQUEST),
        ("/api/v1/moments?colour=red", StatusCode::BAD_REQUEST),
        ("/api/v1/moments?label=maybe", StatusCode::BAD_REQUEST),
        (
            "/api/v1/moments?limit=201",
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            "/api/v1/moments?min_probability=0.8&max_probability=0.2",
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            "/api/v1/moments?min_x=100&max_x=130",
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        ("/api/v1/moments/nope", StatusCode::NOT_FOUND),
        ("/api/v1/nothing", StatusCode::NOT_FOUND),
        ("/api/v1/model/weights", StatusCode::NOT_FOUND),
        ("/api/v1/kpi/players", StatusCode::BAD_REQUEST),
        ("/api/v1/kpi/players?group=keepers", StatusCode::BAD_REQUEST),
        (
            "/api/v1/kpi/players?group=defender&format=xml",
            StatusCode::BAD_REQUEST,
        ),
    ] {
        let r = get(&app, uri).await;
        assert_eq!(r.status, status, "{uri}");
        assert!(r.json()["error"].is_string(), "{uri}");
    }
}

#[tokio::test]
async fn moment_detail_and_image() {
    let f = fixture();
    let app = app(f.config.clone());
    let m = &f.moments[0];
    let v = get(&app, &format!("/api/v1/moments/{}", m.moment_id))
        .await
        .json();
    assert_eq!(v["moment_id"], m.moment_id.as_str());
    assert_eq!(
        v["all_players"].as_array().unwrap().len(),
        m.all_players.len()
    );
    assert_eq!(
        v["image"],
        format!("/api/v1/moments/{}/image.png", m.moment_id)
    );

    let r = get(&app, v["image"].as_str().unwrap()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[header::CONTENT_TYPE], "image/png");
    let on_disk = std::fs::read(f.config.images_dir.join(format!("{}.png", m.moment_id))).unwrap();
    assert_eq!(r.body, on_disk);

    let etag = r.headers[header::ETAG].clone();
    let req = Request::get(v["image"].as_str().unwrap())
        .header(header::IF_NONE_MATCH, etag)
        .body(Body::empty())
        .unwrap();
    let r = send(&app, req).await;
    assert_eq!(r.status, StatusCode::NOT_MODIFIED);
    assert!(r.body.is_empty());
}

#[tokio::test]
async fn missing_artifacts_point_at_the_stage_to_run() {
    let f = fixture();
    std::fs::remove_file(
        f.config
            .images_dir
            .join(format!("{}.png", f.moments[0].moment_id)),
    )
    .unwrap();
    let app = app(f.config.clone());
    let r = get(
        &app,
        &format!("/api/v1/moments/{}/image.png", f.moments[0].moment_id),
    )
    .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["hint"], "run `p3 render` first");

    let r = get(&app, "/api/v1/model/histogram").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["hint"], "run `p3 eval` first");

    let r = get(&app, "/api/v1/kpi/teams?side=defense").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["hint"], "run `p3 kpi --teams` first");
}

#[tokio::test]
async fn kpi_and_model_artifacts_are_served_verbatim() {
    let f = fixture();
    let app = app(f.config.clone());
    let r = get(&app, "/api/v1/kpi/players?group=defender").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[header::CONTENT_TYPE], "application/json");
    assert_eq!(
        r.body,
        std::fs::read(f.config.kpi_dir.join("players_defender.json")).unwrap()
    );

    let r = get(&app, "/api/v1/kpi/players?group=defender&format=csv").await;
    assert_eq!(r.headers[header::CONTENT_TYPE], "text/csv");
    assert!(r.body.starts_with(b"player_id,"));

    let r = get(&app, "/api/v1/model/roc").await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.json()["auc"].is_number());
}

#[tokio::test]
async fn identity_whatif_reproduces_the_stored_score() {
    let f = fixture();
    let app = app(f.config.clone());
    for (m, s) in f.moments.iter().zip(&f.scores).take(5) {
        let v = post(&app, &whatif_uri(m), r#"{"edits": []}"#).await.json();
        assert_eq!(v["still_p3"], true);
        assert_eq!(
            v["probability"].as_f64().unwrap().to_bits(),
            s.probability.to_bits()
        );
        assert_eq!(
            v["original_probability"].as_f64().unwrap().to_bits(),
            s.probability.to_bits()
        );
        let img = get(&app, v["image"].as_str().unwrap()).await;
        assert_eq!(img.status, StatusCode::OK);
        let on_disk =
            std::fs::read(f.config.images_dir.join(format!("{}.png", m.moment_id))).unwrap();
        assert_eq!(img.body, on_disk);
    }
}

#[tokio::test]
async fn whatif_rejections_and_validation() {
    let f = fixture();
    let app = app(f.config.clone());
    let m = &f.moments[0];
    let uri = whatif_uri(m);

    // pull every opponent behind the ball: nothing left to build a hull from
    let edits: Vec<Value> = m
        .all_players
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.teammate)
        .map(|(i, _)| json!({"index": i, "x": 1.0, "y": 40.0}))
        .collect();
    let v = post(&app, &uri, json!({ "edits": edits }).to_string())
        .await
        .json();
    assert_eq!(v["still_p3"], false);
    assert_eq!(v["rejection_reason"], "insufficient opponents");
    assert!(v["probability"].is_null() && v["image"].is_null());

    let n = m.all_players.len();
    for (body, status) in [
        ("not json".to_string(), StatusCode::BAD_REQUEST),
        (
            r#"{"edits": [{"index": 0, "x": 1, "y": 1, "z": 0}]}"#.into(),
            StatusCode::BAD_REQUEST,
        ),
        (
            json!({"edits": [{"index": n, "x": 1, "y": 1}]}).to_string(),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            r#"{"edits": [{"index": 0, "x": 121, "y": 1}]}"#.into(),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            r#"{"edits": [{"index": 0, "x": 1, "y": -0.5}]}"#.into(),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            json!({"edits": vec![json!({"index": 0, "x": 1, "y": 1}); 23]}).to_string(),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
    ] {
        let r = post(&app, &uri, body.clone()).await;
        assert_eq!(r.status, status, "{body}");
    }
    let r = post(&app, "/api/v1/moments/nope/whatif", r#"{"edits": []}"#).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = get(&app, "/api/v1/whatif/0123456789abcdef/image.png").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn whatif_is_cached_and_never_touches_the_store() {
    let f = fixture();
    let state = Arc::new(AppState::load(f.config.clone()).unwrap());
    let app = router(state.clone()).unwrap();
    let before = (files(&f.config.store_dir), files(&f.config.images_dir));
    let m = &f.moments[1];
    let detail_before = get(&app, &format!("/api/v1/moments/{}", m.moment_id))
        .await
        .body;

    let body = json!({"edits": [{"index": 0, "x": 70.5, "y": 30.25}]}).to_string();
    let a = post(&app, &whatif_uri(m), body.clone()).await.json();
    let b = post(&app, &whatif_uri(m), body).await.json();
    assert_eq!(a, b);
    assert_eq!(state.cached_whatifs(), 1);
    assert_eq!(a["request_id"].as_str().unwrap().len(), 32);

    let detail_after = get(&app, &format!("/api/v1/moments/{}", m.moment_id))
        .await
        .body;
    assert_eq!(detail_before, detail_after);
    assert_eq!(
        before,
        (files(&f.config.store_dir), files(&f.config.images_dir))
    );
}

#[tokio::test]
async fn moving_the_passer_moves_the_pass_origin() {
    let f = fixture();
    let app = app(f.config.clone());
    let m = &f.moments[0];
    let passer = m.passer_index().expect("synthetic frames flag the passer");
    // far back on the own half: the origin leaves the zone
    let edits = json!({"edits": [{"index": passer, "x": 5.0, "y": m.origin.y}]});
    let v = post(&app, &whatif_uri(m), edits.to_string()).await.json();
    assert_eq!(v["rejection_reason"], "outside zone");
}

#[tokio::test]
async fn whatif_without_a_model_explains_itself() {
    let f = fixture();
    let mut config = f.config.clone();
    config.model_path = config.model_path.with_file_name("absent.p3m");
    let app = app(config);
    let r = post(&app, &whatif_uri(&f.moments[0]), r#"{"edits": []}"#).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["hint"], "run `p3 train` first");
}

#[tokio::test]
async fn empty_store_serves_an_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(ServiceConfig::under(dir.path()));
    let v = get(&app, "/api/v1/moments").await.json();
    assert_eq!(v["total"], 0);
    assert_eq!(
        get(&app, "/api/v1/health").await.json()["model_loaded"],
        false
    );
}

#[tokio::test]
async fn cors_only_for_configured_origins() {
    let f = fixture();
    let preflight = || {
        Request::options("/api/v1/moments")
            .header(header::ORIGIN, "http://localhost:5173")
            .header(header::ACCESS_CONTROL_REQUEST_METHOD, "GET")
            .body(Body::empty())
            .unwrap()
    };
    let closed = app(f.config.clone());
    let r = send(&closed, preflight()).await;
    assert!(!r.headers.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));

    let mut config = f.config.clone();
    config.cors_origins = vec!["http://localhost:5173".into()];
    let open = app(config);
    let r = send(&open, preflight()).await;
    assert_eq!(
        r.headers[header::ACCESS_CONTROL_ALLOW_ORIGIN],
        "http://localhost:5173"
    );

    let mut config = f.config.clone();
    config.cors_origins = vec!["bad\norigin".into()];
    assert!(router(Arc::new(AppState::load(config).unwrap())).is_err());
}
