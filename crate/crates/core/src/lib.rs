//! Puzzle engine for grid pathfinding puzzles with region constraints.
//!
//! The crate is `no_std` with `alloc`. File formats, the HTTP service and the
//! command line live in the `spatial-gym` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod astar;
pub mod baseline;
pub mod difficulty;
pub mod env;
pub mod generator;
pub mod grid;
pub mod metrics;
pub mod path;
pub mod polyomino;
pub mod prompt;
pub mod region;
pub mod reply;
pub mod search;
pub mod verify;

pub use astar::astar_path;
pub use baseline::{random_walk_action, NoLegalAction};
pub use env::{EnvConfig, EnvError, EnvState, Observation, ProcessReward, RewardSignal, Status, Transition};
pub use grid::{Color, ParityClass, Polyshape, Position, Puzzle, PuzzleError, ShapeId, Symbol};
pub use path::{legal_moves, Action, ActionSet, IllegalMove, Mode, Path, PathError};
pub use region::{compute_regions, edge_touch_count, CellCoord, RegionPartition};
pub use reply::{parse_action, ParseError};
pub use search::{enumerate_solutions, enumerate_solutions_with, Clock, NoClock, Pruning, SearchBudget, SolutionSet};
pub use verify::{verify, Rule, Verdict, Violation};
