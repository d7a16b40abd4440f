use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spatial_gym::catalog::{Catalog, CatalogError};
use spatial_gym::clock::InstantClock;
use spatial_gym::document::{
    read_puzzle, serialize_puzzle, DocumentError, Manifest, ManifestEntry, SolverReport, VerdictReport, SCHEMA_VERSION,
};
use spatial_gym::harness::{eval, AgentBinding, AgentKind, EpisodeConfig, EvalOptions};
use spatial_gym::import::{import_records, parse_records};
use spatial_gym::log::{group_sessions, read_logs, replay_session, LogError, LogWriter};
use spatial_gym::service::{self, ServiceConfig, SessionService};
use spatial_gym_core::difficulty::difficulty_level;
use spatial_gym_core::generator::{batch_seed, generate_puzzle_with, GenConfig};
use spatial_gym_core::metrics::aggregate;
use spatial_gym_core::path::parse_path_text;
use spatial_gym_core::{
    enumerate_solutions_with, verify, EnvConfig, Mode, Path, ProcessReward, Pruning, SearchBudget,
};

#[derive(Parser)]
#[command(name = "spatial-gym", version, about = "Grid path puzzles: generate, solve, verify, evaluate, serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate puzzles plus a manifest.
    Generate {
        #[arg(long, default_value_t = 1)]
        count: u32,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, or a `.puz`/`.json` file when `--count 1`.
        #[arg(long)]
        out: PathBuf,
        /// Generator config as JSON; flags override its seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_cols: Option<usize>,
        #[arg(long)]
        max_rows: Option<usize>,
    },
    /// Enumerate solutions of a puzzle.
    Solve {
        puzzle: PathBuf,
        #[arg(long)]
        max_solutions: Option<usize>,
        #[arg(long)]
        max_nodes: Option<u64>,
        #[arg(long)]
        max_time_ms: Option<u64>,
        /// Disable every pruning rule.
        #[arg(long)]
        no_prune: bool,
    },
    /// Check a path against a puzzle's rules.
    Verify {
        puzzle: PathBuf,
        /// `(x,y)->(x,y)->...` or a direction string such as `DDDRR`.
        #[arg(long)]
        path: String,
    },
    /// Run an agent over a puzzle set and write records and a report.
    Eval {
        #[arg(long, value_enum)]
        agent: Option<AgentArg>,
        /// Agent binding as JSON (overrides `--agent`).
        #[arg(long)]
        agent_config: Option<PathBuf>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::NoBacktrack)]
        mode: ModeArg,
        #[arg(long)]
        puzzles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        step_limit: Option<u32>,
        #[arg(long, value_enum, default_value_t = RewardArg::Any)]
        process_reward: RewardArg,
        /// Evaluate only the first N puzzles (id order).
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        puzzles: PathBuf,
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1800)]
        ttl_secs: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rebuild transcripts from an episode log and re-check them.
    Replay {
        /// A log file or a directory of `*.jsonl` logs.
        log: PathBuf,
        #[arg(long)]
        session: Option<String>,
    },
    /// Convert upstream records (JSON array or JSON lines) into puzzle documents.
    Import {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip solution enumeration (manifest counts are then 0, not exhausted).
        #[arg(long)]
        no_solve: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Chat,
    RandomWalk,
    Astar,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    NoBacktrack,
    Backtrack,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::NoBacktrack => Mode::NoBacktrack,
            ModeArg::Backtrack => Mode::Backtrack,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Any,
    Canonical,
    Off,
}

impl From<RewardArg> for ProcessReward {
    fn from(r: RewardArg) -> ProcessReward {
        match r {
            RewardArg::Any => ProcessReward::AnySolution,
            RewardArg::Canonical => ProcessReward::CanonicalSolution,
            RewardArg::Off => ProcessReward::Disabled,
        }
    }
}

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
    code: u8,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), code: 1 }
    }
}

impl From<DocumentError> for CliError {
    fn from(e: DocumentError) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        let kind = match &e {
            CatalogError::Document { source, .. } => source.kind(),
            CatalogError::Duplicate { .. } => "duplicate_id",
            CatalogError::Io { .. } => "io",
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        let kind = match e {
            LogError::CorruptLog(_) => "corrupt_log",
            LogError::Io { .. } => "io",
        };
        CliError::new(kind, e.to_string())
    }
}

fn io_error(path: &FsPath) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::new("io", format!("{}: {e}", path.display()))
}

/// Writes to stdout; a closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) {
    use std::io::Write as _;
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn write_json<T: Serialize>(path: &FsPath, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    std::fs::write(path, text).map_err(io_error(path))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = rand::random();
        eprintln!("info: no --seed given, using {seed}");
        seed
    })
}

fn generate(
    count: u32,
    seed: Option<u64>,
    out: &FsPath,
    config: Option<&FsPath>,
    max_cols: Option<usize>,
    max_rows: Option<usize>,
) -> Result<(), CliError> {
    let seed = resolve_seed(seed);
    let mut base = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            serde_json::from_str::<GenConfig>(&text).map_err(|e| CliError::new("schema", e.to_string()))?
        }
        None => GenConfig::default(),
    };
    if let Some(c) = max_cols {
        base.cols_range = (base.cols_range.0.min(c), c);
    }
    if let Some(r) = max_rows {
        base.rows_range = (base.rows_range.0.min(r), r);
    }
    let single = count == 1 && out.extension().is_some_and(|e| e == "puz" || e == "json");
    if !single {
        std::fs::create_dir_all(out).map_err(io_error(out))?;
    }
    let mut entries = Vec::new();
    for i in 0..count {
        let mut cfg = base.clone();
        cfg.seed = batch_seed(seed, u64::from(i));
        let generated = generate_puzzle_with(&cfg, &InstantClock::new())
            .map_err(|e| CliError::new("generation", format!("puzzle {i}: {e}")))?;
        let file = if single { out.to_path_buf() } else { out.join(format!("{}.puz", generated.puzzle.id())) };
        let text = serialize_puzzle(&generated.puzzle, Some(&cfg.difficulty));
        std::fs::write(&file, text).map_err(io_error(&file))?;
        entries.push(ManifestEntry {
            puzzle_id: generated.puzzle.id().to_string(),
            file: file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            difficulty_score: Some(generated.score),
            level: Some(generated.level),
            n_solutions: generated.solutions.len(),
            exhausted: generated.solutions.exhausted,
        });
    }
    let manifest = Manifest { version: SCHEMA_VERSION, seed: Some(seed), puzzles: entries };
    if !single {
        write_json(&out.join("manifest.json"), &manifest)?;
    }
    print_json(&manifest);
    Ok(())
}

fn solve(
    puzzle: &FsPath,
    max_solutions: Option<usize>,
    max_nodes: Option<u64>,
    max_time_ms: Option<u64>,
    no_prune: bool,
) -> Result<(), CliError> {
    let puzzle = read_puzzle(puzzle)?;
    let mut budget = SearchBudget::default();
    if let Some(n) = max_solutions {
        budget.max_solutions = n;
    }
    if let Some(n) = max_nodes {
        budget.max_nodes = n;
    }
    if let Some(ms) = max_time_ms {
        budget.max_time = Duration::from_millis(ms);
    }
    let pruning = if no_prune { Pruning::NONE } else { Pruning::ALL };
    let set = enumerate_solutions_with(&puzzle, budget, pruning, &InstantClock::new());
    print_json(&SolverReport::new(&puzzle, &set));
    Ok(())
}

fn verify_cmd(puzzle: &FsPath, path_text: &str) -> Result<(), CliError> {
    let puzzle = read_puzzle(puzzle)?;
    let positions =
        parse_path_text(path_text, puzzle.start()).map_err(|e| CliError::new("path_syntax", e.to_string()))?;
    let path = Path::new(&puzzle, positions).map_err(|e| CliError::new("invalid_path", e.to_string()))?;
    let verdict = verify(&puzzle, &path);
    print_json(&VerdictReport { puzzle_id: puzzle.id().to_string(), path: path.to_canonical_string(), verdict });
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    agent: &'a AgentBinding,
    mode: Mode,
    seed: u64,
    n_puzzles: usize,
    report: spatial_gym_core::metrics::MetricsReport,
}

#[allow(clippy::too_many_arguments)]
fn eval_cmd(
    agent: Option<AgentArg>,
    agent_config: Option<&FsPath>,
    endpoint: Option<String>,
    model: Option<String>,
    mode: Mode,
    puzzles: &FsPath,
    out: &FsPath,
    parallel: usize,
    seed: Option<u64>,
    log_dir: Option<&FsPath>,
    step_limit: Option<u32>,
    process_reward: ProcessReward,
    limit: Option<usize>,
) -> Result<(), CliError> {
    let mut binding = match (agent_config, agent) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            serde_json::from_str::<AgentBinding>(&text).map_err(|e| CliError::new("schema", e.to_string()))?
        }
        (None, Some(AgentArg::Chat)) => AgentBinding::new(AgentKind::ChatModel),
        (None, Some(AgentArg::RandomWalk)) => AgentBinding::new(AgentKind::RandomWalk),
        (None, Some(AgentArg::Astar)) => AgentBinding::new(AgentKind::AStar),
        (None, None) => return Err(CliError { code: 2, ..CliError::new("usage", "one of --agent or --agent-config is required") }),
    };
    if endpoint.is_some() {
        binding.endpoint = endpoint;
    }
    if let Some(m) = model {
        binding.model_name = m;
    }
    binding.validate().map_err(|e| CliError::new("agent_binding", e.to_string()))?;
    let seed = resolve_seed(seed);
    let catalog = Catalog::load(puzzles)?;
    let mut ids: Vec<String> = catalog.puzzles().map(|p| p.id().to_string()).collect();
    if let Some(n) = limit {
        ids.truncate(n);
    }
    let mut env = EnvConfig { process_reward, ..EnvConfig::default() };
    if let Some(s) = step_limit {
        env.step_limit = s;
    }
    let options = EvalOptions { mode, episode: EpisodeConfig { env, retry_limit: binding.retry_limit }, parallel, seed };
    let log = match log_dir {
        Some(dir) => Some(Arc::new(LogWriter::new(dir)?)),
        None => None,
    };
    let records = eval(&binding, &catalog, &ids, &options, log).map_err(|e| CliError::new("agent_binding", e.to_string()))?;
    let report = aggregate(&records, &catalog.summaries()).map_err(|e| CliError::new("unknown_puzzle", e.to_string()))?;

    std::fs::create_dir_all(out).map_err(io_error(out))?;
    let records_path = out.join("records.jsonl");
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).expect("serialisable"));
        lines.push('\n');
    }
    std::fs::write(&records_path, lines).map_err(io_error(&records_path))?;
    let label = format!("{:?} ({})", binding.kind, if mode == Mode::Backtrack { "backtrack" } else { "no backtrack" });
    let table = out.join("report.txt");
    std::fs::write(&table, report.to_table(&label)).map_err(io_error(&table))?;
    let summary = EvalSummary { agent: &binding, mode, seed, n_puzzles: ids.len(), report };
    write_json(&out.join("report.json"), &summary)?;
    print_json(&summary);
    Ok(())
}

fn serve_cmd(
    port: u16,
    host: &str,
    puzzles: &FsPath,
    log_dir: Option<&FsPath>,
    ttl_secs: u64,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let catalog = Catalog::load(puzzles)?;
    let seed = resolve_seed(seed);
    let log = match log_dir {
        Some(dir) => Some(Arc::new(LogWriter::new(dir)?)),
        None => None,
    };
    let config = ServiceConfig { idle_ttl: Duration::from_secs(ttl_secs), seed, ..ServiceConfig::default() };
    let service = SessionService::new(catalog, config, log);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError { code: 2, ..CliError::new("usage", format!("bad address {host}:{port}: {e}")) })?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::new("io", format!("bind {addr}: {e}")))?;
        eprintln!("info: listening on http://{}", listener.local_addr().map_err(|e| CliError::new("io", e.to_string()))?);
        service::serve(listener, service).await.map_err(|e| CliError::new("io", e.to_string()))
    })
}

fn replay_cmd(log: &FsPath, session: Option<&str>) -> Result<bool, CliError> {
    let mut sessions = group_sessions(read_logs(log)?);
    if let Some(id) = session {
        sessions.retain(|k, _| k == id);
        if sessions.is_empty() {
            return Err(CliError::new("not_found", format!("no session {id} in {}", log.display())));
        }
    }
    let replays = sessions.values().map(|entries| replay_session(entries)).collect::<Result<Vec<_>, _>>()?;
    let ok = replays.iter().all(|r| r.integrity.ok);
    print_json(&replays);
    Ok(ok)
}

#[derive(Serialize)]
struct ImportSummary {
    imported: usize,
    failed: Vec<spatial_gym::import::ImportFailure>,
    reference_solutions_failing: Vec<String>,
    manifest: Manifest,
}

fn import_cmd(input: &FsPath, out: &FsPath, no_solve: bool) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input).map_err(io_error(input))?;
    let records = parse_records(&text).map_err(|e| CliError::new("schema", e))?;
    let result = import_records(&records);
    std::fs::create_dir_all(out).map_err(io_error(out))?;
    let mut entries = Vec::new();
    let mut failing = Vec::new();
    for (puzzle, info) in &result.puzzles {
        let name: String = puzzle.id().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
        let file = out.join(format!("{name}.puz"));
        std::fs::write(&file, serialize_puzzle(puzzle, None)).map_err(io_error(&file))?;
        let (n, exhausted) = if no_solve {
            (0, false)
        } else {
            let set = enumerate_solutions_with(puzzle, SearchBudget::default(), Pruning::ALL, &InstantClock::new());
            (set.len(), set.exhausted)
        };
        if info.reference_solution_ok == Some(false) {
            failing.push(puzzle.id().to_string());
        }
        entries.push(ManifestEntry {
            puzzle_id: puzzle.id().to_string(),
            file: format!("{name}.puz"),
            difficulty_score: puzzle.difficulty_score(),
            level: puzzle.difficulty_score().map(difficulty_level),
            n_solutions: n,
            exhausted,
        });
    }
    let manifest = Manifest { version: SCHEMA_VERSION, seed: None, puzzles: entries };
    write_json(&out.join("manifest.json"), &manifest)?;
    print_json(&ImportSummary {
        imported: result.puzzles.len(),
        failed: result.failures,
        reference_solutions_failing: failing,
        manifest,
    });
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Generate { count, seed, out, config, max_cols, max_rows } => {
            generate(count, seed, &out, config.as_deref(), max_cols, max_rows)?
        }
        Command::Solve { puzzle, max_solutions, max_nodes, max_time_ms, no_prune } => {
            solve(&puzzle, max_solutions, max_nodes, max_time_ms, no_prune)?
        }
        Command::Verify { puzzle, path } => verify_cmd(&puzzle, &path)?,
        Command::Eval {
            agent,
            agent_config,
            endpoint,
            model,
            mode,
            puzzles,
            out,
            parallel,
            seed,
            log_dir,
            step_limit,
            process_reward,
            limit,
        } => eval_cmd(
            agent,
            agent_config.as_deref(),
            endpoint,
            model,
            mode.into(),
            &puzzles,
            &out,
            parallel,
            seed,
            log_dir.as_deref(),
            step_limit,
            process_reward.into(),
            limit,
        )?,
        Command::Serve { port, host, puzzles, log_dir, ttl_secs, seed } => {
            serve_cmd(port, &host, &puzzles, log_dir.as_deref(), ttl_secs, seed)?
        }
        Command::Replay { log, session } => {
            if !replay_cmd(&log, session.as_deref())? {
                eprintln!("{}", error_line("integrity", "replay does not reproduce the log"));
                return Ok(ExitCode::from(1));
            }
        }
        Command::Import { input, out, no_solve } => import_cmd(&input, &out, no_solve)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn error_line(kind: &str, message: &str) -> String {
    let body: BTreeMap<&str, &str> = [("kind", kind), ("message", message)].into_iter().collect();
    format!("error: {}", serde_json::to_string(&body).expect("serialisable"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim().trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_line(e.kind, &e.message));
            ExitCode::from(e.code)
        }
    }
}
