mod common;

use std::io::{BufRead, BufReader};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::fixtures;
use serde_json::{json, Value};
use spatial_gym::catalog::Catalog;
use spatial_gym::log::{group_sessions, read_logs, replay_session, LogWriter};
use spatial_gym::service::{self, ActionResponse, CreateRequest, CreateResponse, ServiceConfig, SessionService, Snapshot};
use spatial_gym_core::metrics::EpisodeStatus;
use spatial_gym_core::{Action, Mode, Status};

struct Server {
    _rt: tokio::runtime::Runtime,
    base: String,
    http: ureq::Agent,
}

impl Server {
    fn start(service: SessionService) -> Server {
        let rt = tokio::runtime::Runtime::new().unwrap();
        let addr = rt.block_on(service::spawn("127.0.0.1:0".parse().unwrap(), service)).unwrap();
        let http = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Server { _rt: rt, base: format!("http://{addr}"), http }
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.http.get(&format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut r = self.http.post(&format!("{}{path}", self.base)).send_json(&body).unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn act(&self, id: &str, action: Value) -> (u16, Value) {
        self.post(&format!("/sessions/{id}/actions"), json!({ "action": action }))
    }
}

fn service_with(config: ServiceConfig, log: Option<Arc<LogWriter>>) -> SessionService {
    SessionService::new(Catalog::load(&fixtures()).unwrap(), config, log)
}

fn create_stars(server: &Server) -> CreateResponse {
    let (code, body) = server.post("/sessions", json!({"puzzle_id": "c2f1726c32030b96", "mode": "no_backtrack"}));
    assert_eq!(code, 201, "{body}");
    serde_json::from_value(body).unwrap()
}

#[test]
fn worked_session_over_http() {
    let server = Server::start(service_with(ServiceConfig::default(), None));
    let created = create_stars(&server);
    assert_eq!(created.snapshot.legal, vec![Action::Up, Action::Down]);
    assert_eq!(created.snapshot.step, 0);
    assert_eq!(created.snapshot.mode, Mode::NoBacktrack);
    assert_eq!(created.snapshot.grid[1][1], "*-Y");
    assert!(created.observation_text.starts_with("Step: 1\nCurrent Position: (0, 1)\nLegal Actions: [1=UP,3=DOWN]"));

    let actions = [json!(3), json!("D"), json!("down"), json!(0), json!("RIGHT")];
    let mut last = None;
    for a in actions {
        let (code, body) = server.act(&created.session_id, a);
        assert_eq!(code, 200, "{body}");
        last = Some(serde_json::from_value::<ActionResponse>(body).unwrap());
    }
    let last = last.unwrap();
    assert!(last.terminated);
    assert!(!last.truncated);
    assert_eq!(last.reward.outcome, 1);
    assert!(last.verdict.as_ref().unwrap().satisfied);
    assert_eq!(last.snapshot.status, Status::Solved);
    assert_eq!(last.snapshot.step, 5);
    assert!((last.snapshot.cumulative_reward - 1.05).abs() < 1e-9);

    let (code, body) = server.act(&created.session_id, json!(1));
    assert_eq!(code, 409);
    assert_eq!(body["error"]["kind"], "EpisodeOver");

    let (code, snap) = server.get(&format!("/sessions/{}", created.session_id));
    assert_eq!(code, 200);
    assert_eq!(serde_json::from_value::<Snapshot>(snap).unwrap(), last.snapshot);
}

#[test]
fn error_kinds() {
    let server = Server::start(service_with(ServiceConfig::default(), None));
    let created = create_stars(&server);
    let (code, body) = server.act(&created.session_id, json!(0));
    assert_eq!(code, 422);
    assert_eq!(body["error"]["kind"], "IllegalAction");
    assert_eq!(body["error"]["legal"], json!(["UP", "DOWN"]));

    assert_eq!(server.act(&created.session_id, json!(7)).1["error"]["kind"], "BadRequest");
    assert_eq!(server.act("nope", json!(0)).1["error"]["kind"], "NotFound");
    assert_eq!(server.post("/sessions", json!({"difficulty_level": 9})).1["error"]["kind"], "Unavailable");
    assert_eq!(server.post("/sessions", json!({"difficulty_level": 3})).1["error"]["kind"], "Unavailable");
    assert_eq!(server.post("/sessions", json!({"puzzle_id": "nope"})).1["error"]["kind"], "NotFound");
    assert_eq!(server.post("/sessions", json!({"mode": "sideways"})).1["error"]["kind"], "BadRequest");
    assert_eq!(server.get("/puzzles/nope").0, 404);

    let other = create_stars(&server);
    assert_ne!(other.session_id, created.session_id);
}

#[test]
fn level_selection_and_catalog_routes() {
    let server = Server::start(service_with(ServiceConfig::default(), None));
    let (_, body) = server.post("/sessions", json!({"difficulty_level": 5}));
    assert_eq!(body["snapshot"]["puzzle_id"], "poly_3x2");
    assert_eq!(body["snapshot"]["difficulty_level"], 5);
    let (code, list) = server.get("/puzzles");
    assert_eq!(code, 200);
    assert_eq!(list.as_array().unwrap().len(), 3);
    let (code, doc) = server.get("/puzzles/poly_3x2");
    assert_eq!(code, 200);
    assert_eq!(doc["shapes"]["16"], json!([[1]]));
}

#[test]
fn events_stream_pushes_snapshots() {
    let server = Server::start(service_with(ServiceConfig::default(), None));
    let created = create_stars(&server);
    let url = format!("{}/sessions/{}/events", server.base, created.session_id);
    let response = server.http.get(&url).call().unwrap();
    assert_eq!(response.status().as_u16(), 200);
    let reader = BufReader::new(response.into_body().into_reader());

    let id = created.session_id.clone();
    let base = server.base.clone();
    let poster = std::thread::spawn(move || {
        let http: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        for a in [3, 3, 3, 0, 0] {
            http.post(&format!("{base}/sessions/{id}/actions")).send_json(json!({ "action": a })).unwrap();
        }
    });
    let snapshots: Vec<Snapshot> = reader
        .lines()
        .map(Result::unwrap)
        .filter_map(|l| l.strip_prefix("data:").map(|d| serde_json::from_str(d.trim()).unwrap()))
        .collect();
    poster.join().unwrap();
    assert_eq!(snapshots.len(), 6);
    assert_eq!(snapshots.iter().map(|s| s.step).collect::<Vec<_>>(), [0, 1, 2, 3, 4, 5]);
    assert!(snapshots[5].terminated);
}

#[test]
fn idle_sessions_expire_and_are_logged_abandoned() {
    let dir = tempfile::tempdir().unwrap();
    let log = Arc::new(LogWriter::new(dir.path()).unwrap());
    let config = ServiceConfig { idle_ttl: Duration::from_millis(200), ..ServiceConfig::default() };
    let svc = service_with(config, Some(log));
    let request = CreateRequest { puzzle_id: Some("poly_3x2".into()), owner: spatial_gym::service::Owner::Human, ..Default::default() };
    let a = svc.create_session(&request).unwrap();
    let b = svc.create_session(&request).unwrap();
    svc.apply_action(&a.session_id, Action::Down).unwrap();
    std::thread::sleep(Duration::from_millis(300));
    assert_eq!(svc.sweep(Instant::now()), 2);
    let err = svc.apply_action(&a.session_id, Action::Down).unwrap_err();
    assert_eq!(err.kind(), "SessionExpired");
    assert!(svc.snapshot(&b.session_id).unwrap().expired);

    let sessions = group_sessions(read_logs(dir.path()).unwrap());
    assert_eq!(sessions.len(), 2);
    for entries in sessions.values() {
        let replay = replay_session(entries).unwrap();
        assert_eq!(replay.record.status, EpisodeStatus::Abandoned);
        assert!(replay.integrity.ok, "{:?}", replay.integrity.mismatches);
    }
}

#[test]
fn concurrent_actions_on_one_session_serialise() {
    let dir = tempfile::tempdir().unwrap();
    let log = Arc::new(LogWriter::new(dir.path()).unwrap());
    let svc = service_with(ServiceConfig::default(), Some(log));
    let request = CreateRequest { puzzle_id: Some("poly_3x2".into()), mode: Mode::Backtrack, step_limit: Some(400), ..Default::default() };
    let created = svc.create_session(&request).unwrap();
    let id = created.session_id.as_str();
    // Up/Down toggles between start and its upper neighbour in backtrack mode.
    std::thread::scope(|s| {
        for t in 0..8 {
            let svc = svc.clone();
            s.spawn(move || {
                for k in 0..25 {
                    let action = if (t + k) % 2 == 0 { Action::Up } else { Action::Down };
                    if let Ok(r) = svc.apply_action(id, action) {
                        let snap = r.snapshot;
                        assert_eq!(snap.path.last(), Some(&snap.position));
                        let header = format!("Step: {}\nCurrent Position: {}\n", snap.step + 1, snap.position);
                        assert!(snap.observation_text.starts_with(&header), "{}", snap.observation_text);
                    }
                }
            });
        }
    });
    let snap = svc.snapshot(id).unwrap();
    let sessions = group_sessions(read_logs(dir.path()).unwrap());
    let replay = replay_session(&sessions[id]).unwrap();
    assert!(replay.integrity.ok, "{:?}", replay.integrity.mismatches);
    assert_eq!(replay.record.total_actions, snap.step);
    assert_eq!(replay.record.final_observation.as_deref(), Some(snap.observation_text.as_str()));
}

#[test]
fn distinct_sessions_do_not_interfere() {
    let svc = service_with(ServiceConfig::default(), None);
    let req = |id: &str| CreateRequest { puzzle_id: Some(id.into()), mode: Mode::Backtrack, ..Default::default() };
    let ids: Vec<String> = (0..6)
        .map(|i| svc.create_session(&req(if i % 2 == 0 { "ring" } else { "poly_3x2" })).unwrap().session_id)
        .collect();
    std::thread::scope(|s| {
        for (i, id) in ids.iter().enumerate() {
            let svc = svc.clone();
            s.spawn(move || {
                for _ in 0..i {
                    let legal = svc.snapshot(id).unwrap().legal;
                    if let Some(&a) = legal.first() {
                        svc.apply_action(id, a).unwrap();
                    }
                }
            });
        }
    });
    for (i, id) in ids.iter().enumerate() {
        let snap = svc.snapshot(id).unwrap();
        assert!(snap.step as usize <= i);
        assert_eq!(snap.puzzle_id, if i % 2 == 0 { "ring" } else { "poly_3x2" });
    }
}
