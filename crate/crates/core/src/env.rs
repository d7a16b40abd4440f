//! Step environment: episode state, masked transitions, termination and rewards.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::grid::{render_grid_tokens, Position, Puzzle};
use crate::path::{legal_moves, Action, ActionSet, Mode, Path};
use crate::search::{enumerate_solutions, SearchBudget, SolutionSet};
use crate::verify::{verify, Verdict};

pub const DEFAULT_STEP_LIMIT: u32 = 100;
pub const PROCESS_REWARD: f64 = 0.01;

const INSTRUCTIONS: &str = "You MAY think step-by-step, but you MUST end your response with:\n\
Final: <action>\n\
Where <action> is one of 0=RIGHT, 1=UP, 2=LEFT, 3=DOWN\n  \
(you may also write the direction name, e.g. Final: right).";

/// What the per-step process signal compares the path against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProcessReward {
    Disabled,
    /// Prefix of any enumerated solution.
    #[default]
    AnySolution,
    /// Prefix of the first enumerated solution only.
    CanonicalSolution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvConfig {
    pub step_limit: u32,
    pub process_reward: ProcessReward,
    /// Used when process rewards need a solution set that was not supplied.
    pub budget: SearchBudget,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            step_limit: DEFAULT_STEP_LIMIT,
            process_reward: ProcessReward::AnySolution,
            budget: SearchBudget::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Status {
    Running,
    Solved,
    FailedRules,
    Deadlock,
    StepLimit,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Solved => "solved",
            Status::FailedRules => "failed_rules",
            Status::Deadlock => "deadlock",
            Status::StepLimit => "step_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("action {action} is not legal; legal actions: {legal}")]
    IllegalAction { action: Action, legal: ActionSet },
    #[error("episode is over ({})", .0.name())]
    EpisodeOver(Status),
    #[error("puzzle has no solution")]
    UnsolvablePuzzle,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardSignal {
    /// +1 or -1 on the terminating transition, 0 otherwise.
    pub outcome: i8,
    pub process: f64,
}

impl RewardSignal {
    pub fn total(self) -> f64 {
        f64::from(self.outcome) + self.process
    }
}

/// The text shown to the agent, with the fields it is rendered from.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub text: String,
    /// 1-based display step.
    pub step: u32,
    pub position: Position,
    pub legal: Vec<Action>,
    pub grid_rows: Vec<String>,
}

impl Observation {
    pub fn new(step: u32, position: Position, legal: ActionSet, grid_rows: Vec<String>) -> Observation {
        let text = render_text(step, position, legal, &grid_rows);
        Observation { text, step, position, legal: legal.to_vec(), grid_rows }
    }
}

/// Fills the fixed observation template.
pub fn render_text(step: u32, position: Position, legal: ActionSet, grid_rows: &[String]) -> String {
    let mut text = String::new();
    let _ = write!(text, "Step: {step}\nCurrent Position: {position}\nLegal Actions: {legal}\n\nGrid State:\n");
    for row in grid_rows {
        text.push_str(row);
        text.push('\n');
    }
    text.push('\n');
    text.push_str(INSTRUCTIONS);
    text
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub reward: RewardSignal,
    pub terminated: bool,
    pub status: Status,
    /// The action popped the head instead of extending the path.
    pub backtracked: bool,
}

#[derive(Debug, Clone)]
pub struct EnvState {
    puzzle: Arc<Puzzle>,
    path: Path,
    step_count: u32,
    mode: Mode,
    status: Status,
    config: EnvConfig,
    solutions: Option<Arc<SolutionSet>>,
    verdict: Option<Verdict>,
}

impl EnvState {
    /// Starts an episode at the puzzle's start. A solution set is enumerated
    /// when process rewards are on and none is supplied.
    pub fn reset(
        puzzle: Arc<Puzzle>,
        mode: Mode,
        config: EnvConfig,
        solutions: Option<Arc<SolutionSet>>,
    ) -> Result<(EnvState, Observation), EnvError> {
        let solutions = match (config.process_reward, solutions) {
            (ProcessReward::Disabled, s) => s,
            (_, Some(s)) => Some(s),
            (_, None) => Some(Arc::new(enumerate_solutions(&puzzle, config.budget))),
        };
        if config.process_reward != ProcessReward::Disabled {
            let s = solutions.as_deref().expect("set above");
            if s.exhausted && s.is_empty() {
                return Err(EnvError::UnsolvablePuzzle);
            }
        }
        let state = EnvState {
            path: Path::at_start(&puzzle),
            puzzle,
            step_count: 0,
            mode,
            status: Status::Running,
            config,
            solutions,
            verdict: None,
        };
        let obs = state.observation();
        Ok((state, obs))
    }

    pub fn puzzle(&self) -> &Arc<Puzzle> {
        &self.puzzle
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn solutions(&self) -> Option<&Arc<SolutionSet>> {
        self.solutions.as_ref()
    }

    /// Rule verdict, present once the head has reached End.
    pub fn verdict(&self) -> Option<&Verdict> {
        self.verdict.as_ref()
    }

    pub fn legal(&self) -> ActionSet {
        if self.status.is_terminal() {
            return ActionSet::EMPTY;
        }
        legal_moves(&self.puzzle, &self.path, self.mode)
    }

    pub fn observation(&self) -> Observation {
        Observation::new(
            self.step_count + 1,
            self.path.head(),
            self.legal(),
            render_grid_tokens(&self.puzzle, Some(&self.path)),
        )
    }

    /// Applies one action. A running state with no legal action (sealed
    /// start) accepts any action and terminates as a deadlock without moving.
    pub fn step(&mut self, action: Action) -> Result<Transition, EnvError> {
        if self.status.is_terminal() {
            return Err(EnvError::EpisodeOver(self.status));
        }
        let legal = self.legal();
        let mut backtracked = false;
        if legal.is_empty() {
            self.status = Status::Deadlock;
        } else {
            if !legal.contains(action) {
                return Err(EnvError::IllegalAction { action, legal });
            }
            backtracked = self
                .path
                .apply(&self.puzzle, action, self.mode)
                .expect("action checked against the legal set");
            self.step_count += 1;
            self.status = if self.path.head() == self.puzzle.end() {
                let verdict = verify(&self.puzzle, &self.path);
                let status = if verdict.satisfied { Status::Solved } else { Status::FailedRules };
                self.verdict = Some(verdict);
                status
            } else if legal_moves(&self.puzzle, &self.path, self.mode).is_empty() {
                Status::Deadlock
            } else if self.step_count >= self.config.step_limit {
                Status::StepLimit
            } else {
                Status::Running
            };
        }
        let outcome = match self.status {
            Status::Running => 0,
            Status::Solved => 1,
            _ => -1,
        };
        let reward = RewardSignal { outcome, process: self.process_signal() };
        Ok(Transition {
            observation: self.observation(),
            reward,
            terminated: self.status.is_terminal(),
            status: self.status,
            backtracked,
        })
    }

    fn process_signal(&self) -> f64 {
        let Some(solutions) = self.solutions.as_deref() else {
            return 0.0;
        };
        let on_track = match self.config.process_reward {
            ProcessReward::Disabled => return 0.0,
            ProcessReward::AnySolution => solutions.has_prefix(&self.path),
            ProcessReward::CanonicalSolution => {
                solutions.solutions.first().is_some_and(|s| self.path.is_prefix_of(s))
            }
        };
        if on_track {
            PROCESS_REWARD
        } else {
            -PROCESS_REWARD
        }
    }
}
