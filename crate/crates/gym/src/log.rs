//! Append-only episode logs.
//!
//! One JSON object per line, one file per UTC day (`episodes-YYYY-MM-DD.jsonl`).
//! Entries of a session carry a consecutive `seq` starting at 0 and a
//! checksum chained over the session's previous entry:
//! `checksum = sha256(prev_checksum || body)`, where `body` is the entry
//! serialised without its `checksum` field and `prev_checksum` is empty for
//! `seq` 0. Event payloads:
//!
//! - `reset`: [`ResetPayload`] (includes the full puzzle document, so logs
//!   replay without a catalog)
//! - `action`: [`ActionPayload`]
//! - `terminal`: [`TerminalPayload`], always the last entry of a session

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spatial_gym_core::metrics::{EpisodeRecord, EpisodeStatus, StepRecord, TokenCounts};
use spatial_gym_core::{Action, EnvConfig, EnvState, Mode, RewardSignal, Verdict};

use crate::document::PuzzleDocument;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Reset,
    Action,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub v: u32,
    /// RFC 3339 UTC timestamp.
    pub ts: String,
    pub session_id: String,
    pub puzzle_id: String,
    pub seq: u64,
    pub event: Event,
    pub payload: serde_json::Value,
    pub checksum: String,
}

#[derive(Serialize)]
struct EntryBody<'a> {
    v: u32,
    ts: &'a str,
    session_id: &'a str,
    puzzle_id: &'a str,
    seq: u64,
    event: Event,
    payload: &'a serde_json::Value,
}

fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl LogEntry {
    pub fn compute_checksum(&self, prev: &str) -> String {
        let body = EntryBody {
            v: self.v,
            ts: &self.ts,
            session_id: &self.session_id,
            puzzle_id: &self.puzzle_id,
            seq: self.seq,
            event: self.event,
            payload: &self.payload,
        };
        let mut hasher = Sha256::new();
        hasher.update(prev.as_bytes());
        hasher.update(serde_json::to_vec(&body).expect("serialisable"));
        hex(&hasher.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetPayload {
    pub mode: Mode,
    pub agent: String,
    pub config: EnvConfig,
    pub puzzle: PuzzleDocument,
    pub observation_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPayload {
    /// Environment step counter after the action.
    pub step: u32,
    pub action: Action,
    pub raw_response: Option<String>,
    pub retries: u32,
    pub tokens: Option<TokenCounts>,
    pub reward: RewardSignal,
    pub backtracked: bool,
    /// Observation shown after the action.
    pub observation_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalPayload {
    pub status: EpisodeStatus,
    pub total_actions: u32,
    pub forward_edges: u32,
    pub wall_time_ms: u64,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Shared appender for one log directory. Each entry is written with a single
/// `write_all` on an append-mode file under a lock, so lines never interleave.
#[derive(Debug)]
pub struct LogWriter {
    dir: PathBuf,
    file: Mutex<Option<(String, File)>>,
}

impl LogWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<LogWriter, LogError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| LogError::Io { path: dir.display().to_string(), source })?;
        Ok(LogWriter { dir, file: Mutex::new(None) })
    }

    pub fn dir(&self) -> &FsPath {
        &self.dir
    }

    pub fn file_for_day(&self, day: &str) -> PathBuf {
        self.dir.join(format!("episodes-{day}.jsonl"))
    }

    fn append(&self, entry: &LogEntry) -> Result<(), LogError> {
        let mut line = serde_json::to_string(entry).expect("serialisable");
        line.push('\n');
        let day = entry.ts.get(..10).unwrap_or("unknown").to_string();
        let mut guard = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if guard.as_ref().is_none_or(|(d, _)| *d != day) {
            let path = self.file_for_day(&day);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|source| LogError::Io { path: path.display().to_string(), source })?;
            *guard = Some((day, file));
        }
        let (day, file) = guard.as_mut().expect("opened above");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|source| LogError::Io { path: self.file_for_day(day).display().to_string(), source })
    }
}

/// Chain state for one session's entries.
#[derive(Debug)]
pub struct SessionLog {
    writer: Arc<LogWriter>,
    session_id: String,
    puzzle_id: String,
    seq: u64,
    prev: String,
}

impl SessionLog {
    pub fn new(writer: Arc<LogWriter>, session_id: impl Into<String>, puzzle_id: impl Into<String>) -> SessionLog {
        SessionLog { writer, session_id: session_id.into(), puzzle_id: puzzle_id.into(), seq: 0, prev: String::new() }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn log<T: Serialize>(&mut self, event: Event, payload: &T) -> Result<(), LogError> {
        let mut entry = LogEntry {
            v: LOG_VERSION,
            ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            session_id: self.session_id.clone(),
            puzzle_id: self.puzzle_id.clone(),
            seq: self.seq,
            event,
            payload: serde_json::to_value(payload).expect("serialisable"),
            checksum: String::new(),
        };
        entry.checksum = entry.compute_checksum(&self.prev);
        self.writer.append(&entry)?;
        self.prev = entry.checksum;
        self.seq += 1;
        Ok(())
    }
}

/// Parses a log file; a blank trailing line is allowed.
pub fn read_log(path: &FsPath) -> Result<Vec<LogEntry>, LogError> {
    let io = |source| LogError::Io { path: path.display().to_string(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(&line)
            .map_err(|e| LogError::CorruptLog(format!("line {}: {e}", n + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Reads every `*.jsonl` file in a directory (or a single file), in name order.
pub fn read_logs(path: &FsPath) -> Result<Vec<LogEntry>, LogError> {
    if !path.is_dir() {
        return read_log(path);
    }
    let io = |source| LogError::Io { path: path.display().to_string(), source };
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    let mut entries = Vec::new();
    for file in files {
        entries.extend(read_log(&file)?);
    }
    Ok(entries)
}

/// Groups entries by session, keeping file order within each session.
pub fn group_sessions(entries: Vec<LogEntry>) -> BTreeMap<String, Vec<LogEntry>> {
    let mut sessions: BTreeMap<String, Vec<LogEntry>> = BTreeMap::new();
    for entry in entries {
        sessions.entry(entry.session_id.clone()).or_default().push(entry);
    }
    sessions
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Integrity {
    pub ok: bool,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub session_id: String,
    pub record: EpisodeRecord,
    pub integrity: Integrity,
}

fn decode<T: for<'de> Deserialize<'de>>(entry: &LogEntry) -> Result<T, LogError> {
    serde_json::from_value(entry.payload.clone())
        .map_err(|e| LogError::CorruptLog(format!("seq {} ({:?}) payload: {e}", entry.seq, entry.event)))
}

/// Checks ordering and checksums of one session's entries, rebuilds its
/// [`EpisodeRecord`] and re-runs the actions through a fresh environment,
/// comparing every observation, reward and the terminal status.
pub fn replay_session(entries: &[LogEntry]) -> Result<Replay, LogError> {
    let first = entries.first().ok_or_else(|| LogError::CorruptLog("no entries".into()))?;
    let mut prev = String::new();
    for (i, entry) in entries.iter().enumerate() {
        if entry.v != LOG_VERSION {
            return Err(LogError::CorruptLog(format!("seq {}: unsupported version {}", entry.seq, entry.v)));
        }
        if entry.session_id != first.session_id || entry.puzzle_id != first.puzzle_id {
            return Err(LogError::CorruptLog(format!("seq {}: session or puzzle id changed", entry.seq)));
        }
        if entry.seq != i as u64 {
            return Err(LogError::CorruptLog(format!("expected seq {i}, found {}", entry.seq)));
        }
        let expected_event = match i {
            0 => entry.event == Event::Reset,
            _ if entry.event == Event::Terminal => i + 1 == entries.len(),
            _ => entry.event == Event::Action,
        };
        if !expected_event {
            return Err(LogError::CorruptLog(format!("seq {}: unexpected {:?} event", entry.seq, entry.event)));
        }
        if entry.compute_checksum(&prev) != entry.checksum {
            return Err(LogError::CorruptLog(format!("seq {}: checksum mismatch", entry.seq)));
        }
        prev = entry.checksum.clone();
    }

    let reset: ResetPayload = decode(first)?;
    let puzzle = reset
        .puzzle
        .to_puzzle()
        .map_err(|e| LogError::CorruptLog(format!("reset puzzle: {e}")))?;
    let terminal: Option<TerminalPayload> = match entries.last() {
        Some(e) if e.event == Event::Terminal => Some(decode(e)?),
        _ => None,
    };
    let actions: Vec<ActionPayload> = entries
        .iter()
        .filter(|e| e.event == Event::Action)
        .map(decode)
        .collect::<Result<_, _>>()?;

    let mut steps = Vec::with_capacity(actions.len());
    let mut shown = reset.observation_text.clone();
    for a in &actions {
        steps.push(StepRecord {
            observation_text: std::mem::replace(&mut shown, a.observation_text.clone()),
            raw_response: a.raw_response.clone(),
            parsed_action: a.action,
            reward: a.reward,
            is_backtrack: a.backtracked,
            retries: a.retries,
            tokens: a.tokens,
        });
    }

    let mut mismatches = Vec::new();
    let puzzle = Arc::new(puzzle);
    let env = EnvState::reset(puzzle.clone(), reset.mode, reset.config, None);
    let final_status = match env {
        Err(e) => {
            mismatches.push(format!("reset failed: {e}"));
            None
        }
        Ok((mut env, obs)) => {
            if obs.text != reset.observation_text {
                mismatches.push("reset observation differs".into());
            }
            for a in &actions {
                match env.step(a.action) {
                    Ok(t) => {
                        if t.observation.text != a.observation_text {
                            mismatches.push(format!("step {}: observation differs", a.step));
                        }
                        if t.reward != a.reward {
                            mismatches.push(format!("step {}: reward differs", a.step));
                        }
                        if t.backtracked != a.backtracked || env.step_count() != a.step {
                            mismatches.push(format!("step {}: path bookkeeping differs", a.step));
                        }
                    }
                    Err(e) => {
                        mismatches.push(format!("step {}: {e}", a.step));
                        break;
                    }
                }
            }
            Some((EpisodeStatus::from_env(env.status()), env.path().edge_count() as u32))
        }
    };

    let status = terminal.as_ref().map_or(EpisodeStatus::Incomplete, |t| t.status);
    if let (Some(t), Some((replayed, edges))) = (&terminal, final_status) {
        // Statuses decided outside the environment keep a Running env.
        let external = matches!(
            t.status,
            EpisodeStatus::ParseFailure | EpisodeStatus::Aborted | EpisodeStatus::Abandoned
        );
        let consistent = if external { replayed == EpisodeStatus::Incomplete } else { replayed == t.status };
        if !consistent {
            mismatches.push(format!("terminal status {} but replay gives {}", t.status.name(), replayed.name()));
        }
        if t.forward_edges != edges {
            mismatches.push(format!("forward_edges {} but replay gives {edges}", t.forward_edges));
        }
        if t.total_actions as usize != actions.len() {
            mismatches.push(format!("total_actions {} but {} action entries", t.total_actions, actions.len()));
        }
    }

    let forward_edges = final_status.map_or(0, |(_, e)| e);
    let record = EpisodeRecord {
        puzzle_id: first.puzzle_id.clone(),
        mode: reset.mode,
        agent: reset.agent,
        status,
        total_actions: actions.len() as u32,
        forward_edges: terminal.as_ref().map_or(forward_edges, |t| t.forward_edges),
        wall_time_ms: terminal.as_ref().map_or(0, |t| t.wall_time_ms),
        final_observation: actions.last().map(|a| a.observation_text.clone()),
        error: terminal.and_then(|t| t.error),
        steps,
    };
    Ok(Replay {
        session_id: first.session_id.clone(),
        record,
        integrity: Integrity { ok: mismatches.is_empty(), mismatches },
    })
}
