//! Paths, actions and move legality.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use thiserror::Error;

use crate::grid::{Position, Puzzle};

/// Movement by one symbol-grid position. Digits are fixed by the text protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
#[repr(u8)]
pub enum Action {
    Right = 0,
    Up = 1,
    Left = 2,
    Down = 3,
}

impl Action {
    /// All actions in digit order.
    pub const ALL: [Action; 4] = [Action::Right, Action::Up, Action::Left, Action::Down];

    pub fn digit(self) -> u8 {
        self as u8
    }

    pub fn from_digit(d: u8) -> Option<Action> {
        Action::ALL.get(usize::from(d)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Right => "RIGHT",
            Action::Up => "UP",
            Action::Left => "LEFT",
            Action::Down => "DOWN",
        }
    }

    /// Case-insensitive direction name lookup.
    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(name))
    }

    /// One-letter code used by compact direction strings.
    pub fn letter(self) -> char {
        match self {
            Action::Right => 'R',
            Action::Up => 'U',
            Action::Left => 'L',
            Action::Down => 'D',
        }
    }

    pub fn from_letter(c: char) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.letter() == c.to_ascii_uppercase())
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Right => (1, 0),
            Action::Up => (0, -1),
            Action::Left => (-1, 0),
            Action::Down => (0, 1),
        }
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Right => Action::Left,
            Action::Up => Action::Down,
            Action::Left => Action::Right,
            Action::Down => Action::Up,
        }
    }

    /// The action that moves from `from` to the adjacent position `to`.
    pub fn between(from: Position, to: Position) -> Option<Action> {
        Action::ALL.into_iter().find(|a| from.offset(a.delta().0, a.delta().1) == Some(to))
    }

    pub fn apply(self, p: Position) -> Option<Position> {
        let (dx, dy) = self.delta();
        p.offset(dx, dy)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of actions, iterated in ascending digit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.digit();
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.digit()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }

    pub fn to_vec(self) -> Vec<Action> {
        self.iter().collect()
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::EMPTY;
        for a in iter {
            set.insert(a);
        }
        set
    }
}

/// Renders as `[1=UP,3=DOWN]`.
impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('[')?;
        for (i, a) in self.iter().enumerate() {
            if i > 0 {
                f.write_char(',')?;
            }
            write!(f, "{}={}", a.digit(), a.name())?;
        }
        f.write_char(']')
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    #[default]
    NoBacktrack,
    Backtrack,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path is empty")]
    Empty,
    #[error("{0} is outside the grid")]
    OutOfBounds(Position),
    #[error("{0} is a rule cell")]
    OnCell(Position),
    #[error("{0} is a gap")]
    OnGap(Position),
    #[error("{0} and {1} are not adjacent")]
    NotAdjacent(Position, Position),
    #[error("{0} is visited twice")]
    Revisit(Position),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{action} is not a legal move from {from}")]
pub struct IllegalMove {
    pub action: Action,
    pub from: Position,
}

/// A simple path over node and edge positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    positions: Vec<Position>,
}

impl Path {
    /// The one-position path at the puzzle's start.
    pub fn at_start(puzzle: &Puzzle) -> Path {
        Path { positions: alloc::vec![puzzle.start()] }
    }

    /// Validates adjacency, passability and simplicity. The first position is
    /// not required to be the start; the verifier reports that separately.
    pub fn new(puzzle: &Puzzle, positions: Vec<Position>) -> Result<Path, PathError> {
        if positions.is_empty() {
            return Err(PathError::Empty);
        }
        for (i, &p) in positions.iter().enumerate() {
            if !puzzle.in_bounds(p) {
                return Err(PathError::OutOfBounds(p));
            }
            if !p.class().is_path_class() {
                return Err(PathError::OnCell(p));
            }
            if !puzzle.is_passable(p) {
                return Err(PathError::OnGap(p));
            }
            if i > 0 && positions[i - 1].manhattan(p) != 1 {
                return Err(PathError::NotAdjacent(positions[i - 1], p));
            }
            if positions[..i].contains(&p) {
                return Err(PathError::Revisit(p));
            }
        }
        Ok(Path { positions })
    }

    /// Wraps positions that are already known to form a valid path.
    pub(crate) fn from_trusted(positions: Vec<Position>) -> Path {
        debug_assert!(!positions.is_empty());
        Path { positions }
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<Position> {
        self.positions
    }

    pub fn head(&self) -> Position {
        *self.positions.last().expect("paths are non-empty")
    }

    pub fn first(&self) -> Position {
        self.positions[0]
    }

    /// Position before the head, if any.
    pub fn predecessor(&self) -> Option<Position> {
        self.positions.len().checked_sub(2).map(|i| self.positions[i])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number of half-step moves, `len - 1`.
    pub fn edge_count(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn contains(&self, p: Position) -> bool {
        self.positions.contains(&p)
    }

    pub fn is_prefix_of(&self, other: &Path) -> bool {
        other.positions.starts_with(&self.positions)
    }

    /// Canonical text form, `(x0,y0)->(x1,y1)->...`.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.positions.iter().enumerate() {
            if i > 0 {
                out.push_str("->");
            }
            let _ = write!(out, "({},{})", p.x, p.y);
        }
        out
    }

    /// Compact direction string (`R`, `U`, `L`, `D`) of the moves after the first position.
    pub fn to_direction_string(&self) -> String {
        self.positions
            .windows(2)
            .map(|w| Action::between(w[0], w[1]).expect("adjacent").letter())
            .collect()
    }

    /// Applies a move in place. Returns `true` when the move popped the head.
    pub fn apply(&mut self, puzzle: &Puzzle, action: Action, mode: Mode) -> Result<bool, IllegalMove> {
        let illegal = IllegalMove { action, from: self.head() };
        if self.head() == puzzle.end() {
            return Err(illegal);
        }
        let target = action.apply(self.head()).ok_or(illegal)?;
        if mode == Mode::Backtrack && self.predecessor() == Some(target) {
            self.positions.pop();
            return Ok(true);
        }
        if !puzzle.is_passable(target) || self.contains(target) {
            return Err(illegal);
        }
        self.positions.push(target);
        Ok(false)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

/// Actions available from the path head. None once the head is on End.
pub fn legal_moves(puzzle: &Puzzle, path: &Path, mode: Mode) -> ActionSet {
    let head = path.head();
    if head == puzzle.end() {
        return ActionSet::EMPTY;
    }
    let back = match mode {
        Mode::Backtrack => path.predecessor(),
        Mode::NoBacktrack => None,
    };
    Action::ALL
        .into_iter()
        .filter(|a| match a.apply(head) {
            Some(t) if Some(t) == back => true,
            Some(t) => puzzle.is_passable(t) && !path.contains(t),
            None => false,
        })
        .collect()
}

/// Returns the path after applying `action`.
pub fn apply_move(puzzle: &Puzzle, path: &Path, action: Action, mode: Mode) -> Result<Path, IllegalMove> {
    let mut next = path.clone();
    next.apply(puzzle, action, mode)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed path text: {0}")]
pub struct PathSyntaxError(pub String);

/// Parses either `(x,y)->(x,y)->...` or a compact direction string such as
/// `DDDRR`, which is walked from `start`. Geometry is not validated here.
pub fn parse_path_text(text: &str, start: Position) -> Result<Vec<Position>, PathSyntaxError> {
    let text = text.trim();
    if text.starts_with('(') {
        text.split("->")
            .map(|part| {
                let inner = part
                    .trim()
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| PathSyntaxError(format!("bad coordinate {part:?}")))?;
                let (x, y) = inner
                    .split_once(',')
                    .ok_or_else(|| PathSyntaxError(format!("bad coordinate {part:?}")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| PathSyntaxError(format!("bad coordinate {part:?}")))
                };
                Ok(Position::new(parse(x)?, parse(y)?))
            })
            .collect()
    } else {
        let mut positions = alloc::vec![start];
        let mut at = start;
        for c in text.chars().filter(|c| !c.is_whitespace()) {
            let action =
                Action::from_letter(c).ok_or_else(|| PathSyntaxError(format!("bad direction {c:?}")))?;
            at = action
                .apply(at)
                .ok_or_else(|| PathSyntaxError(format!("move {c} leaves the grid")))?;
            positions.push(at);
        }
        Ok(positions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn stars() -> Puzzle {
        Puzzle::from_tokens(
            "stars",
            &[
                ["+", "+", "+", "+", "+"],
                ["S", "*-Y", "+", "*-Y", "+"],
                ["+", "+", "+", "+", "+"],
                ["+", "*-K", "+", "*-K", "+"],
                ["+", "+", "E", "+", "+"],
            ],
            BTreeMap::new(),
            None,
        )
        .unwrap()
    }

    fn p(x: usize, y: usize) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn action_digits_and_names() {
        for a in Action::ALL {
            assert_eq!(Action::from_digit(a.digit()), Some(a));
            assert_eq!(Action::from_name(&a.name().to_lowercase()), Some(a));
            assert_eq!(a.opposite().opposite(), a);
        }
        assert_eq!(Action::from_digit(4), None);
    }

    #[test]
    fn legal_sets_render() {
        let set: ActionSet = [Action::Down, Action::Up].into_iter().collect();
        assert_eq!(set.to_string(), "[1=UP,3=DOWN]");
        assert_eq!(ActionSet::EMPTY.to_string(), "[]");
    }

    #[test]
    fn legal_moves_at_start() {
        let puzzle = stars();
        let path = Path::at_start(&puzzle);
        let legal = legal_moves(&puzzle, &path, Mode::NoBacktrack);
        assert_eq!(legal.to_vec(), vec![Action::Up, Action::Down]);
    }

    #[test]
    fn legal_moves_in_corner() {
        let puzzle = stars();
        let path = Path::new(&puzzle, vec![p(0, 1), p(0, 2), p(0, 3), p(0, 4)]).unwrap();
        assert_eq!(legal_moves(&puzzle, &path, Mode::NoBacktrack).to_vec(), vec![Action::Right]);
    }

    #[test]
    fn backtrack_offers_predecessor() {
        let puzzle = stars();
        let mut path = Path::new(&puzzle, vec![p(0, 1), p(0, 2)]).unwrap();
        let legal = legal_moves(&puzzle, &path, Mode::Backtrack);
        assert_eq!(legal.to_vec(), vec![Action::Right, Action::Up, Action::Down]);
        assert!(!legal_moves(&puzzle, &path, Mode::NoBacktrack).contains(Action::Up));
        assert!(path.apply(&puzzle, Action::Up, Mode::Backtrack).unwrap());
        assert_eq!(path.positions(), &[p(0, 1)]);
        // nothing to undo at the start
        assert!(!legal_moves(&puzzle, &path, Mode::Backtrack).contains(Action::Left));
    }

    #[test]
    fn moving_into_a_rule_cell_is_illegal() {
        let puzzle = stars();
        let path = Path::at_start(&puzzle);
        assert!(apply_move(&puzzle, &path, Action::Right, Mode::NoBacktrack).is_err());
        let next = apply_move(&puzzle, &path, Action::Down, Mode::NoBacktrack).unwrap();
        assert_eq!(next.positions(), &[p(0, 1), p(0, 2)]);
    }

    #[test]
    fn path_validation() {
        let puzzle = stars();
        assert_eq!(Path::new(&puzzle, vec![]), Err(PathError::Empty));
        assert_eq!(Path::new(&puzzle, vec![p(0, 1), p(1, 1)]), Err(PathError::OnCell(p(1, 1))));
        assert_eq!(Path::new(&puzzle, vec![p(0, 1), p(0, 3)]), Err(PathError::NotAdjacent(p(0, 1), p(0, 3))));
        assert_eq!(
            Path::new(&puzzle, vec![p(0, 1), p(0, 2), p(0, 1)]),
            Err(PathError::Revisit(p(0, 1)))
        );
        assert_eq!(Path::new(&puzzle, vec![p(9, 0)]), Err(PathError::OutOfBounds(p(9, 0))));
    }

    #[test]
    fn text_forms() {
        let puzzle = stars();
        let path = Path::new(&puzzle, vec![p(0, 1), p(0, 2), p(0, 3), p(0, 4), p(1, 4), p(2, 4)]).unwrap();
        let canonical = path.to_canonical_string();
        assert_eq!(canonical, "(0,1)->(0,2)->(0,3)->(0,4)->(1,4)->(2,4)");
        assert_eq!(parse_path_text(&canonical, puzzle.start()).unwrap(), path.positions());
        assert_eq!(path.to_direction_string(), "DDDRR");
        assert_eq!(parse_path_text("DDDRR", puzzle.start()).unwrap(), path.positions());
        assert_eq!(parse_path_text("( 0, 1 ) -> (0,2)", puzzle.start()).unwrap(), vec![p(0, 1), p(0, 2)]);
        assert!(parse_path_text("DQ", puzzle.start()).is_err());
        assert!(parse_path_text("(0,1)->(0,", puzzle.start()).is_err());
        assert!(parse_path_text("LL", puzzle.start()).is_err());
    }
}
