//! Episode transcripts and the aggregate report.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::difficulty::difficulty_level;
use crate::env::{RewardSignal, Status};
use crate::grid::Puzzle;
use crate::path::{Action, Mode};
use crate::verify::Rule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EpisodeStatus {
    Solved,
    FailedRules,
    Deadlock,
    StepLimit,
    /// The agent produced no usable action within the retry limit.
    ParseFailure,
    /// Transport failure; excluded from metrics.
    Aborted,
    /// Ended without a terminal event (truncated log); excluded.
    Incomplete,
    /// Idle session expired before termination; excluded.
    Abandoned,
}

impl EpisodeStatus {
    /// Maps a terminal environment status; `Running` becomes `Incomplete`.
    pub fn from_env(status: Status) -> EpisodeStatus {
        match status {
            Status::Solved => EpisodeStatus::Solved,
            Status::FailedRules => EpisodeStatus::FailedRules,
            Status::Deadlock => EpisodeStatus::Deadlock,
            Status::StepLimit => EpisodeStatus::StepLimit,
            Status::Running => EpisodeStatus::Incomplete,
        }
    }

    pub fn counts_toward_metrics(self) -> bool {
        !matches!(self, EpisodeStatus::Aborted | EpisodeStatus::Incomplete | EpisodeStatus::Abandoned)
    }

    pub fn name(self) -> &'static str {
        match self {
            EpisodeStatus::Solved => "solved",
            EpisodeStatus::FailedRules => "failed_rules",
            EpisodeStatus::Deadlock => "deadlock",
            EpisodeStatus::StepLimit => "step_limit",
            EpisodeStatus::ParseFailure => "parse_failure",
            EpisodeStatus::Aborted => "aborted",
            EpisodeStatus::Incomplete => "incomplete",
            EpisodeStatus::Abandoned => "abandoned",
        }
    }

    pub fn reached_end(self) -> bool {
        matches!(self, EpisodeStatus::Solved | EpisodeStatus::FailedRules)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenCounts {
    pub prompt: u64,
    pub completion: u64,
    /// Whitespace-split estimates rather than endpoint-reported usage.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub observation_text: String,
    /// Final reply for this step; absent for non-text agents.
    pub raw_response: Option<String>,
    pub parsed_action: Action,
    pub reward: RewardSignal,
    pub is_backtrack: bool,
    /// Corrective re-prompts issued before a usable reply.
    pub retries: u32,
    pub tokens: Option<TokenCounts>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeRecord {
    pub puzzle_id: String,
    pub mode: Mode,
    pub agent: String,
    pub steps: Vec<StepRecord>,
    pub status: EpisodeStatus,
    pub total_actions: u32,
    /// Edge count of the final path.
    pub forward_edges: u32,
    pub wall_time_ms: u64,
    /// Observation shown after the last action.
    pub final_observation: Option<String>,
    pub error: Option<String>,
}

impl EpisodeRecord {
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.steps.iter().map(|s| s.parsed_action)
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.total()).sum()
    }

    /// Total actions over final path edges; `None` when the path has no edges.
    pub fn backtracking_ratio(&self) -> Option<f64> {
        (self.forward_edges > 0).then(|| f64::from(self.total_actions) / f64::from(self.forward_edges))
    }
}

/// The catalog facts `aggregate` needs about a puzzle.
#[derive(Debug, Clone, PartialEq)]
pub struct PuzzleSummary {
    pub level: Option<u8>,
    pub rules: Vec<Rule>,
}

impl PuzzleSummary {
    pub fn of(puzzle: &Puzzle) -> PuzzleSummary {
        let mut rules: Vec<Rule> = puzzle.symbols().filter_map(|(_, s)| Rule::of_symbol(s)).collect();
        rules.sort();
        rules.dedup();
        PuzzleSummary { level: puzzle.difficulty_score().map(difficulty_level), rules }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketStat {
    pub episodes: usize,
    pub solved: usize,
    /// Percent solved; absent for an empty bucket.
    pub accuracy: Option<f64>,
}

impl BucketStat {
    fn new(episodes: usize, solved: usize) -> BucketStat {
        let accuracy = (episodes > 0).then(|| percent(solved, episodes));
        BucketStat { episodes, solved, accuracy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioSummary {
    pub n: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub iqr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub n_episodes: usize,
    pub n_aborted: usize,
    pub n_incomplete: usize,
    pub n_abandoned: usize,
    pub accuracy: f64,
    pub completion_rate: f64,
    /// Mean actions per episode, backtracks included.
    pub avg_steps: f64,
    /// Mean final path edges per episode.
    pub avg_forward_steps: f64,
    /// Levels 1 through 5.
    pub per_difficulty: [BucketStat; 5],
    pub per_rule: BTreeMap<Rule, BucketStat>,
    pub backtracking_ratio: RatioSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown puzzle {0:?}")]
pub struct UnknownPuzzle(pub String);

fn percent(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn aggregate(
    records: &[EpisodeRecord],
    puzzles: &BTreeMap<String, PuzzleSummary>,
) -> Result<MetricsReport, UnknownPuzzle> {
    let mut n = 0;
    let (mut aborted, mut incomplete, mut abandoned) = (0, 0, 0);
    let (mut solved, mut reached) = (0, 0);
    let (mut actions, mut edges) = (0u64, 0u64);
    let mut levels = [(0usize, 0usize); 5];
    let mut rules: BTreeMap<Rule, (usize, usize)> = BTreeMap::new();
    let mut ratios = Vec::new();

    for r in records {
        let summary = puzzles.get(&r.puzzle_id).ok_or_else(|| UnknownPuzzle(r.puzzle_id.clone()))?;
        match r.status {
            EpisodeStatus::Aborted => aborted += 1,
            EpisodeStatus::Incomplete => incomplete += 1,
            EpisodeStatus::Abandoned => abandoned += 1,
            _ => {}
        }
        if !r.status.counts_toward_metrics() {
            continue;
        }
        n += 1;
        let won = usize::from(r.status == EpisodeStatus::Solved);
        solved += won;
        reached += usize::from(r.status.reached_end());
        actions += u64::from(r.total_actions);
        edges += u64::from(r.forward_edges);
        if let Some(level) = summary.level {
            let slot = &mut levels[usize::from(level.clamp(1, 5)) - 1];
            slot.0 += 1;
            slot.1 += won;
        }
        for rule in &summary.rules {
            let slot = rules.entry(*rule).or_default();
            slot.0 += 1;
            slot.1 += won;
        }
        if let Some(ratio) = r.backtracking_ratio() {
            ratios.push(ratio);
        }
    }

    ratios.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&ratios, 0.25), quantile(&ratios, 0.5), quantile(&ratios, 0.75));
    let mean = |total: u64| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    Ok(MetricsReport {
        n_episodes: n,
        n_aborted: aborted,
        n_incomplete: incomplete,
        n_abandoned: abandoned,
        accuracy: percent(solved, n),
        completion_rate: percent(reached, n),
        avg_steps: mean(actions),
        avg_forward_steps: mean(edges),
        per_difficulty: levels.map(|(e, s)| BucketStat::new(e, s)),
        per_rule: rules.into_iter().map(|(k, (e, s))| (k, BucketStat::new(e, s))).collect(),
        backtracking_ratio: RatioSummary {
            n: ratios.len(),
            median,
            q1,
            q3,
            iqr: q1.zip(q3).map(|(a, b)| b - a),
        },
    })
}

impl MetricsReport {
    /// Aligned plain-text table: one labelled row, columns Accuracy, D1..D5, Avg. Steps.
    pub fn to_table(&self, label: &str) -> String {
        let mut header: Vec<String> = Vec::from([String::from("Agent"), String::from("Accuracy")]);
        header.extend((1..=5).map(|d| format!("D{d}")));
        header.push(String::from("Avg. Steps"));
        let mut row: Vec<String> = Vec::from([String::from(label), format!("{:.1}", self.accuracy)]);
        row.extend(self.per_difficulty.iter().map(|b| match b.accuracy {
            Some(a) => format!("{a:.1}"),
            None => String::from("-"),
        }));
        row.push(format!("{:.1}", self.avg_steps));
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(k, (c, w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            padded.join("  ")
        };
        format!("{}\n{}\n", line(&header), line(&row))
    }
}
