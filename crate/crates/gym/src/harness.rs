//! Drives agents through episodes and records transcripts.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use spatial_gym_core::generator::batch_seed;
use spatial_gym_core::metrics::{EpisodeRecord, EpisodeStatus, StepRecord, TokenCounts};
use spatial_gym_core::prompt::system_prompt;
use spatial_gym_core::{
    astar_path, parse_action, random_walk_action, Action, ActionSet, EnvConfig, EnvState, Mode, Observation,
    ParseError, Position, ProcessReward, Puzzle, SolutionSet,
};

use crate::catalog::Catalog;
use crate::document::PuzzleDocument;
use crate::log::{ActionPayload, Event, LogWriter, ResetPayload, SessionLog, TerminalPayload};

pub const DEFAULT_RETRY_LIMIT: u32 = 3;
pub const DEFAULT_API_KEY_ENV: &str = "SPATIAL_GYM_API_KEY";

/// What the agent is asked to respond to.
#[derive(Debug, Clone, Copy)]
pub enum Turn<'a> {
    Observation(&'a Observation),
    /// The previous reply was unusable; the agent should answer again.
    Correction { error: &'a ParseError, legal: ActionSet },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    /// Free text, parsed for a `Final:` line.
    Text { text: String, tokens: Option<TokenCounts> },
    /// A direct choice, as baselines produce.
    Action(Action),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("agent error: {0}")]
    Policy(String),
}

pub trait Agent: Send {
    fn name(&self) -> String;
    /// Called once per episode before the first turn.
    fn begin(&mut self, puzzle: &Puzzle, mode: Mode) -> Result<(), AgentError>;
    fn respond(&mut self, turn: Turn<'_>) -> Result<Reply, AgentError>;
}

fn correction_text(error: &ParseError, legal: ActionSet) -> String {
    format!(
        "Your previous reply could not be used: {error}. End your response with a line \
         \"Final: <action>\" where <action> is one of {legal}."
    )
}

fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { temperature: 0.0, max_tokens: 2048 }
    }
}

/// Chat-completions client. One conversation per episode: the system prompt,
/// then alternating observations (or corrections) and replies.
pub struct ChatAgent {
    url: String,
    model: String,
    sampling: Sampling,
    api_key: Option<String>,
    transport_retries: u32,
    http: ureq::Agent,
    messages: Vec<serde_json::Value>,
}

impl ChatAgent {
    /// `base_url` is the API root; requests go to `{base_url}/chat/completions`.
    pub fn new(base_url: &str, model: &str, sampling: Sampling, api_key: Option<String>) -> ChatAgent {
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build()
            .into();
        ChatAgent {
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: model.to_string(),
            sampling,
            api_key,
            transport_retries: 3,
            http,
            messages: Vec::new(),
        }
    }

    pub fn with_transport_retries(mut self, retries: u32) -> ChatAgent {
        self.transport_retries = retries;
        self
    }

    fn post(&self) -> Result<serde_json::Value, (bool, String)> {
        let body = json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.sampling.temperature,
            "max_tokens": self.sampling.max_tokens,
        });
        let mut request = self.http.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| (true, e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| (true, e.to_string()))?;
        if status != 200 {
            let retryable = status == 429 || status >= 500;
            return Err((retryable, format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        serde_json::from_str(&text).map_err(|e| (false, format!("bad response body: {e}")))
    }

    fn complete(&mut self) -> Result<Reply, AgentError> {
        let mut attempt = 0;
        let value = loop {
            match self.post() {
                Ok(v) => break v,
                Err((true, msg)) if attempt < self.transport_retries => {
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(250 << attempt));
                    let _ = msg;
                }
                Err((_, msg)) => return Err(AgentError::Endpoint(msg)),
            }
        };
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| AgentError::Endpoint("response has no choices[0].message.content".into()))?
            .to_string();
        let usage = &value["usage"];
        let tokens = match (usage["prompt_tokens"].as_u64(), usage["completion_tokens"].as_u64()) {
            (Some(prompt), Some(completion)) => TokenCounts { prompt, completion, estimated: false },
            _ => TokenCounts {
                prompt: self.messages.iter().map(|m| whitespace_tokens(m["content"].as_str().unwrap_or(""))).sum(),
                completion: whitespace_tokens(&text),
                estimated: true,
            },
        };
        self.messages.push(json!({"role": "assistant", "content": text}));
        Ok(Reply::Text { text, tokens: Some(tokens) })
    }
}

impl Agent for ChatAgent {
    fn name(&self) -> String {
        format!("chat:{}", self.model)
    }

    fn begin(&mut self, puzzle: &Puzzle, mode: Mode) -> Result<(), AgentError> {
        self.messages = vec![json!({"role": "system", "content": system_prompt(puzzle, mode)})];
        Ok(())
    }

    fn respond(&mut self, turn: Turn<'_>) -> Result<Reply, AgentError> {
        let content = match turn {
            Turn::Observation(obs) => obs.text.clone(),
            Turn::Correction { error, legal } => correction_text(error, legal),
        };
        self.messages.push(json!({"role": "user", "content": content}));
        self.complete()
    }
}

/// Uniform random legal action, reproducible from the seed and step.
pub struct RandomWalkAgent {
    seed: u64,
}

impl RandomWalkAgent {
    pub fn new(seed: u64) -> Self {
        RandomWalkAgent { seed }
    }
}

fn legal_of(obs: &Observation) -> ActionSet {
    obs.legal.iter().copied().collect()
}

impl Agent for RandomWalkAgent {
    fn name(&self) -> String {
        "random_walk".into()
    }

    fn begin(&mut self, _: &Puzzle, _: Mode) -> Result<(), AgentError> {
        Ok(())
    }

    fn respond(&mut self, turn: Turn<'_>) -> Result<Reply, AgentError> {
        let Turn::Observation(obs) = turn else {
            return Err(AgentError::Policy("random walk never produces unparsable replies".into()));
        };
        random_walk_action(legal_of(obs), self.seed, u64::from(obs.step - 1))
            .map(Reply::Action)
            .map_err(|e| AgentError::Policy(e.to_string()))
    }
}

/// Follows the rule-blind shortest path to End.
#[derive(Default)]
pub struct AStarAgent {
    plan: Vec<Position>,
}

impl AStarAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Agent for AStarAgent {
    fn name(&self) -> String {
        "astar".into()
    }

    fn begin(&mut self, puzzle: &Puzzle, _: Mode) -> Result<(), AgentError> {
        self.plan = astar_path(puzzle).map(|p| p.into_positions()).unwrap_or_default();
        Ok(())
    }

    fn respond(&mut self, turn: Turn<'_>) -> Result<Reply, AgentError> {
        let Turn::Observation(obs) = turn else {
            return Err(AgentError::Policy("A* never produces unparsable replies".into()));
        };
        let legal = legal_of(obs);
        let planned = self
            .plan
            .iter()
            .position(|&p| p == obs.position)
            .and_then(|i| self.plan.get(i + 1))
            .and_then(|&next| Action::between(obs.position, next))
            .filter(|&a| legal.contains(a));
        planned
            .or_else(|| legal.iter().next())
            .map(Reply::Action)
            .ok_or_else(|| AgentError::Policy("no legal action".into()))
    }
}

/// Replays a fixed list of replies, one per turn.
pub struct ScriptedAgent {
    replies: Vec<Reply>,
    next: usize,
}

impl ScriptedAgent {
    pub fn actions(actions: impl IntoIterator<Item = Action>) -> Self {
        ScriptedAgent { replies: actions.into_iter().map(Reply::Action).collect(), next: 0 }
    }

    pub fn texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        let replies = texts.into_iter().map(|t| Reply::Text { text: t.into(), tokens: None }).collect();
        ScriptedAgent { replies, next: 0 }
    }

    /// Each entry is an action (digit, letter R/U/L/D or name) or else reply text.
    pub fn from_script(script: &[String]) -> Self {
        let replies = script
            .iter()
            .map(|s| match parse_action_token(s) {
                Some(a) => Reply::Action(a),
                None => Reply::Text { text: s.clone(), tokens: None },
            })
            .collect();
        ScriptedAgent { replies, next: 0 }
    }
}

/// Parses a bare action token: digit, single letter or direction name.
pub fn parse_action_token(token: &str) -> Option<Action> {
    let t = token.trim();
    let mut chars = t.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_digit() => c.to_digit(10).and_then(|d| Action::from_digit(d as u8)),
        (Some(c), None) => Action::from_letter(c.to_ascii_uppercase()),
        _ => Action::from_name(t),
    }
}

impl Agent for ScriptedAgent {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn begin(&mut self, _: &Puzzle, _: Mode) -> Result<(), AgentError> {
        self.next = 0;
        Ok(())
    }

    fn respond(&mut self, _: Turn<'_>) -> Result<Reply, AgentError> {
        let reply = self.replies.get(self.next).cloned().ok_or_else(|| AgentError::Policy("script exhausted".into()))?;
        self.next += 1;
        Ok(reply)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    ChatModel,
    RandomWalk,
    #[serde(rename = "astar")]
    AStar,
    Scripted,
}

/// Serialisable agent description, as read from eval configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBinding {
    pub kind: AgentKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    /// Environment variable holding the endpoint key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    /// Replies for `scripted` agents.
    #[serde(default)]
    pub script: Vec<String>,
}

fn default_retry_limit() -> u32 {
    DEFAULT_RETRY_LIMIT
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid agent binding: {0}")]
pub struct BindingError(pub String);

impl AgentBinding {
    pub fn new(kind: AgentKind) -> AgentBinding {
        AgentBinding {
            kind,
            endpoint: None,
            model_name: String::new(),
            sampling: Sampling::default(),
            retry_limit: DEFAULT_RETRY_LIMIT,
            api_key_env: default_key_env(),
            script: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), BindingError> {
        if self.kind == AgentKind::ChatModel {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(BindingError("chat_model requires an endpoint".into()));
            }
            if self.model_name.is_empty() {
                return Err(BindingError("chat_model requires a model_name".into()));
            }
        }
        Ok(())
    }

    /// Builds a fresh agent; `seed` feeds the random walk.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Agent>, BindingError> {
        self.validate()?;
        Ok(match self.kind {
            AgentKind::ChatModel => Box::new(ChatAgent::new(
                self.endpoint.as_deref().unwrap_or_default(),
                &self.model_name,
                self.sampling,
                std::env::var(&self.api_key_env).ok(),
            )),
            AgentKind::RandomWalk => Box::new(RandomWalkAgent::new(seed)),
            AgentKind::AStar => Box::new(AStarAgent::new()),
            AgentKind::Scripted => Box::new(ScriptedAgent::from_script(&self.script)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub env: EnvConfig,
    /// Corrective re-prompts allowed per step before the episode fails.
    pub retry_limit: u32,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { env: EnvConfig::default(), retry_limit: DEFAULT_RETRY_LIMIT }
    }
}

fn add_tokens(total: &mut Option<TokenCounts>, more: Option<TokenCounts>) {
    if let Some(more) = more {
        let t = total.get_or_insert_with(TokenCounts::default);
        t.prompt += more.prompt;
        t.completion += more.completion;
        t.estimated |= more.estimated;
    }
}

enum Choice {
    Chosen { action: Action, raw: Option<String>, retries: u32, tokens: Option<TokenCounts> },
    Failed { status: EpisodeStatus, error: String },
}

fn choose(agent: &mut dyn Agent, obs: &Observation, legal: ActionSet, retry_limit: u32) -> Choice {
    let mut tokens = None;
    let mut retries = 0;
    let mut pending: Option<ParseError> = None;
    loop {
        let turn = match &pending {
            None => Turn::Observation(obs),
            Some(error) => Turn::Correction { error, legal },
        };
        let (parsed, raw) = match agent.respond(turn) {
            Err(AgentError::Endpoint(msg)) => {
                return Choice::Failed { status: EpisodeStatus::Aborted, error: format!("endpoint error: {msg}") }
            }
            Err(AgentError::Policy(msg)) => return Choice::Failed { status: EpisodeStatus::Aborted, error: msg },
            Ok(Reply::Action(action)) => {
                let parsed = if legal.contains(action) { Ok(action) } else { Err(ParseError::IllegalChoice { action, legal }) };
                (parsed, None)
            }
            Ok(Reply::Text { text, tokens: t }) => {
                add_tokens(&mut tokens, t);
                (parse_action(&text, legal), Some(text))
            }
        };
        match parsed {
            Ok(action) => return Choice::Chosen { action, raw, retries, tokens },
            Err(error) if retries >= retry_limit => {
                let last = raw.map(|r| format!("; last reply: {r:?}")).unwrap_or_default();
                return Choice::Failed {
                    status: EpisodeStatus::ParseFailure,
                    error: format!("no usable action after {retries} re-prompts: {error}{last}"),
                };
            }
            Err(error) => {
                retries += 1;
                pending = Some(error);
            }
        }
    }
}

fn aborted(puzzle: &Puzzle, mode: Mode, agent: String, error: String, started: Instant) -> EpisodeRecord {
    EpisodeRecord {
        puzzle_id: puzzle.id().to_string(),
        mode,
        agent,
        steps: Vec::new(),
        status: EpisodeStatus::Aborted,
        total_actions: 0,
        forward_edges: 0,
        wall_time_ms: started.elapsed().as_millis() as u64,
        final_observation: None,
        error: Some(error),
    }
}

/// Runs one episode to termination, parse failure or transport failure.
///
/// A start with no legal move is stepped once without querying the agent
/// (with `RIGHT`, which the environment accepts there) so the Deadlock is
/// recorded like any other terminal step.
pub fn run_episode(
    agent: &mut dyn Agent,
    puzzle: Arc<Puzzle>,
    mode: Mode,
    config: &EpisodeConfig,
    solutions: Option<Arc<SolutionSet>>,
    mut log: Option<&mut SessionLog>,
) -> EpisodeRecord {
    let started = Instant::now();
    let name = agent.name();
    let (mut env, mut obs) = match EnvState::reset(puzzle.clone(), mode, config.env, solutions) {
        Ok(pair) => pair,
        Err(e) => return aborted(&puzzle, mode, name, format!("reset failed: {e}"), started),
    };
    if let Err(e) = agent.begin(&puzzle, mode) {
        return aborted(&puzzle, mode, name, e.to_string(), started);
    }
    let mut log_error = None;
    let mut write = |log: &mut Option<&mut SessionLog>, event: Event, payload: serde_json::Value| {
        if let Some(log) = log.as_deref_mut() {
            if let Err(e) = log.log(event, &payload) {
                log_error.get_or_insert(e.to_string());
            }
        }
    };
    write(
        &mut log,
        Event::Reset,
        serde_json::to_value(ResetPayload {
            mode,
            agent: name.clone(),
            config: config.env,
            puzzle: PuzzleDocument::from_puzzle(&puzzle, None),
            observation_text: obs.text.clone(),
        })
        .expect("serialisable"),
    );

    let mut steps = Vec::new();
    let mut failure: Option<(EpisodeStatus, String)> = None;
    while !env.status().is_terminal() {
        let legal = env.legal();
        let (action, raw, retries, tokens) = if legal.is_empty() {
            (Action::Right, None, 0, None)
        } else {
            match choose(agent, &obs, legal, config.retry_limit) {
                Choice::Chosen { action, raw, retries, tokens } => (action, raw, retries, tokens),
                Choice::Failed { status, error } => {
                    failure = Some((status, error));
                    break;
                }
            }
        };
        let t = match env.step(action) {
            Ok(t) => t,
            Err(e) => {
                failure = Some((EpisodeStatus::Aborted, format!("environment rejected {action}: {e}")));
                break;
            }
        };
        write(
            &mut log,
            Event::Action,
            serde_json::to_value(ActionPayload {
                step: env.step_count(),
                action,
                raw_response: raw.clone(),
                retries,
                tokens,
                reward: t.reward,
                backtracked: t.backtracked,
                observation_text: t.observation.text.clone(),
            })
            .expect("serialisable"),
        );
        steps.push(StepRecord {
            observation_text: std::mem::replace(&mut obs, t.observation).text,
            raw_response: raw,
            parsed_action: action,
            reward: t.reward,
            is_backtrack: t.backtracked,
            retries,
            tokens,
        });
    }

    let (status, error) = match failure {
        Some((status, error)) => (status, Some(error)),
        None => (EpisodeStatus::from_env(env.status()), None),
    };
    let record = EpisodeRecord {
        puzzle_id: puzzle.id().to_string(),
        mode,
        agent: name,
        total_actions: steps.len() as u32,
        forward_edges: env.path().edge_count() as u32,
        wall_time_ms: started.elapsed().as_millis() as u64,
        final_observation: (!steps.is_empty()).then(|| obs.text.clone()),
        steps,
        status,
        error,
    };
    write(
        &mut log,
        Event::Terminal,
        serde_json::to_value(TerminalPayload {
            status: record.status,
            total_actions: record.total_actions,
            forward_edges: record.forward_edges,
            wall_time_ms: record.wall_time_ms,
            verdict: env.verdict().cloned(),
            error: record.error.clone(),
        })
        .expect("serialisable"),
    );
    if let Some(e) = log_error {
        eprintln!("warning: episode log write failed: {e}");
    }
    record
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub mode: Mode,
    pub episode: EpisodeConfig,
    /// Episodes in flight at once (at least 1).
    pub parallel: usize,
    pub seed: u64,
}

/// Runs one episode per puzzle id, in parallel up to `options.parallel`.
/// Records come back in input order. Episode `i` uses agent seed
/// `batch_seed(seed, i)` and is logged as session `eval-{seed}-{i}`.
pub fn eval(
    binding: &AgentBinding,
    catalog: &Catalog,
    ids: &[String],
    options: &EvalOptions,
    log: Option<Arc<LogWriter>>,
) -> Result<Vec<EpisodeRecord>, BindingError> {
    binding.validate()?;
    let mut episode = options.episode;
    episode.retry_limit = binding.retry_limit;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<EpisodeRecord>>> = Mutex::new(vec![None; ids.len()]);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(id) = ids.get(i) else { break };
        let started = Instant::now();
        let record = match (catalog.get(id), binding.build(batch_seed(options.seed, i as u64))) {
            (None, _) => EpisodeRecord {
                puzzle_id: id.clone(),
                mode: options.mode,
                agent: format!("{:?}", binding.kind),
                steps: Vec::new(),
                status: EpisodeStatus::Aborted,
                total_actions: 0,
                forward_edges: 0,
                wall_time_ms: 0,
                final_observation: None,
                error: Some(format!("unknown puzzle {id}")),
            },
            (Some(puzzle), Err(e)) => aborted(&puzzle, options.mode, format!("{:?}", binding.kind), e.to_string(), started),
            (Some(puzzle), Ok(mut agent)) => {
                let solutions = (episode.env.process_reward != ProcessReward::Disabled)
                    .then(|| catalog.solutions(id, episode.env.budget))
                    .flatten();
                let mut session = log
                    .as_ref()
                    .map(|w| SessionLog::new(w.clone(), format!("eval-{:016x}-{i:05}", options.seed), id.clone()));
                run_episode(agent.as_mut(), puzzle, options.mode, &episode, solutions, session.as_mut())
            }
        };
        results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(record);
    };
    std::thread::scope(|scope| {
        for _ in 0..options.parallel.max(1).min(ids.len().max(1)) {
            scope.spawn(worker);
        }
    });
    Ok(results
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every index is processed"))
        .collect())
}
