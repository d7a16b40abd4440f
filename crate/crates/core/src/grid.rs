//! Symbol-grid data model.
//!
//! A puzzle with `C` x `R` rule cells is stored as a `(2R+1) x (2C+1)` matrix of
//! symbols. Positions with both coordinates odd are rule cells; all other
//! positions (nodes and the edge midpoints between them) can carry the path.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::path::Path;

/// Largest supported number of rule cells along either axis.
pub const MAX_CELLS_PER_SIDE: usize = 6;

/// Column/row index into the symbol grid. `(0, 0)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Position {
    pub x: usize,
    pub y: usize,
}

impl Position {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn class(self) -> ParityClass {
        classify_position(self)
    }

    pub(crate) fn offset(self, dx: isize, dy: isize) -> Option<Position> {
        Some(Position {
            x: self.x.checked_add_signed(dx)?,
            y: self.y.checked_add_signed(dy)?,
        })
    }

    pub fn manhattan(self, other: Position) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParityClass {
    Node,
    Edge,
    Cell,
}

impl ParityClass {
    /// Nodes and edges can be occupied by the path.
    pub fn is_path_class(self) -> bool {
        !matches!(self, ParityClass::Cell)
    }
}

pub fn classify_position(p: Position) -> ParityClass {
    match (p.x % 2, p.y % 2) {
        (0, 0) => ParityClass::Node,
        (1, 1) => ParityClass::Cell,
        _ => ParityClass::Edge,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Color {
    #[cfg_attr(feature = "serde", serde(rename = "R"))]
    Red,
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    Blue,
    #[cfg_attr(feature = "serde", serde(rename = "G"))]
    Green,
    #[cfg_attr(feature = "serde", serde(rename = "Y"))]
    Yellow,
    #[cfg_attr(feature = "serde", serde(rename = "W"))]
    White,
    #[cfg_attr(feature = "serde", serde(rename = "O"))]
    Orange,
    #[cfg_attr(feature = "serde", serde(rename = "P"))]
    Purple,
    #[cfg_attr(feature = "serde", serde(rename = "K"))]
    Black,
}

impl Color {
    pub const ALL: [Color; 8] = [
        Color::Red,
        Color::Blue,
        Color::Green,
        Color::Yellow,
        Color::White,
        Color::Orange,
        Color::Purple,
        Color::Black,
    ];

    pub fn code(self) -> char {
        match self {
            Color::Red => 'R',
            Color::Blue => 'B',
            Color::Green => 'G',
            Color::Yellow => 'Y',
            Color::White => 'W',
            Color::Orange => 'O',
            Color::Purple => 'P',
            Color::Black => 'K',
        }
    }

    pub fn from_code(c: char) -> Option<Color> {
        Color::ALL.into_iter().find(|color| color.code() == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "Red",
            Color::Blue => "Blue",
            Color::Green => "Green",
            Color::Yellow => "Yellow",
            Color::White => "White",
            Color::Orange => "Orange",
            Color::Purple => "Purple",
            Color::Black => "Black",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

/// Key into a puzzle's polyshape catalog. The numeric value carries no meaning.
pub type ShapeId = u32;

/// One grid token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Open,
    Dot,
    Gap,
    Start,
    End,
    EmptyCell,
    Square(Color),
    Star(Color),
    /// `count` is the number of cell edges the path has to touch (1..=4).
    Triangle { count: u8, color: Color },
    Poly { color: Color, shape: ShapeId },
    Ylop { color: Color, shape: ShapeId },
}

impl Symbol {
    /// Whether the symbol belongs on a rule-cell position.
    pub fn is_cell_symbol(self) -> bool {
        matches!(
            self,
            Symbol::EmptyCell
                | Symbol::Square(_)
                | Symbol::Star(_)
                | Symbol::Triangle { .. }
                | Symbol::Poly { .. }
                | Symbol::Ylop { .. }
        )
    }

    pub fn color(self) -> Option<Color> {
        match self {
            Symbol::Square(c) | Symbol::Star(c) => Some(c),
            Symbol::Triangle { color, .. } | Symbol::Poly { color, .. } | Symbol::Ylop { color, .. } => {
                Some(color)
            }
            _ => None,
        }
    }

    /// Rule cells that impose a constraint, i.e. everything but `N`.
    pub fn is_rule(self) -> bool {
        self.is_cell_symbol() && self != Symbol::EmptyCell
    }

    pub fn shape(self) -> Option<ShapeId> {
        match self {
            Symbol::Poly { shape, .. } | Symbol::Ylop { shape, .. } => Some(shape),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Symbol::Open => f.write_str("+"),
            Symbol::Dot => f.write_str("."),
            Symbol::Gap => f.write_str("G"),
            Symbol::Start => f.write_str("S"),
            Symbol::End => f.write_str("E"),
            Symbol::EmptyCell => f.write_str("N"),
            Symbol::Square(c) => write!(f, "o-{}", c.code()),
            Symbol::Star(c) => write!(f, "*-{}", c.code()),
            Symbol::Triangle { count, color } => {
                write!(f, "{}-{}", char::from(b'A' + count - 1), color.code())
            }
            Symbol::Poly { color, shape } => write!(f, "P-{}-{}", color.code(), shape),
            Symbol::Ylop { color, shape } => write!(f, "Y-{}-{}", color.code(), shape),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unrecognised grid token {0:?}")]
pub struct TokenError(pub String);

impl FromStr for Symbol {
    type Err = TokenError;

    fn from_str(token: &str) -> Result<Self, Self::Err> {
        let bad = || TokenError(token.to_string());
        let single_color = |rest: &str| {
            let mut chars = rest.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Color::from_code(c),
                _ => None,
            }
        };
        match token {
            "+" => return Ok(Symbol::Open),
            "." => return Ok(Symbol::Dot),
            "G" => return Ok(Symbol::Gap),
            "S" => return Ok(Symbol::Start),
            "E" => return Ok(Symbol::End),
            "N" => return Ok(Symbol::EmptyCell),
            _ => {}
        }
        let (head, rest) = token.split_once('-').ok_or_else(bad)?;
        match head {
            "o" => single_color(rest).map(Symbol::Square).ok_or_else(bad),
            "*" => single_color(rest).map(Symbol::Star).ok_or_else(bad),
            "A" | "B" | "C" | "D" => {
                let count = head.as_bytes()[0] - b'A' + 1;
                single_color(rest)
                    .map(|color| Symbol::Triangle { count, color })
                    .ok_or_else(bad)
            }
            "P" | "Y" => {
                let (color, id) = rest.split_once('-').ok_or_else(bad)?;
                let color = single_color(color).ok_or_else(bad)?;
                let shape: ShapeId = id.parse().map_err(|_| bad())?;
                Ok(if head == "P" {
                    Symbol::Poly { color, shape }
                } else {
                    Symbol::Ylop { color, shape }
                })
            }
            _ => Err(bad()),
        }
    }
}

/// A fixed-orientation polyomino, trimmed to its bounding box.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Polyshape {
    width: usize,
    height: usize,
    /// `(col, row)` offsets, sorted row-major.
    cells: Vec<(usize, usize)>,
}

impl Polyshape {
    /// Builds a shape from a 0/1 matrix, trimming empty outer rows and columns.
    /// Returns `None` when no cell is occupied.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Option<Self> {
        let mut cells: Vec<(usize, usize)> = Vec::new();
        for (row, line) in rows.iter().enumerate() {
            for (col, &v) in line.as_ref().iter().enumerate() {
                if v != 0 {
                    cells.push((col, row));
                }
            }
        }
        Self::from_cells(cells)
    }

    /// Builds a shape from arbitrary `(col, row)` offsets.
    pub fn from_cells(mut cells: Vec<(usize, usize)>) -> Option<Self> {
        let min_col = cells.iter().map(|c| c.0).min()?;
        let min_row = cells.iter().map(|c| c.1).min()?;
        for c in cells.iter_mut() {
            c.0 -= min_col;
            c.1 -= min_row;
        }
        cells.sort_by_key(|&(col, row)| (row, col));
        cells.dedup();
        let width = cells.iter().map(|c| c.0).max()? + 1;
        let height = cells.iter().map(|c| c.1).max()? + 1;
        Some(Self { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    /// Occupied `(col, row)` offsets in row-major order.
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        let mut rows = alloc::vec![alloc::vec![0u8; self.width]; self.height];
        for &(col, row) in &self.cells {
            rows[row][col] = 1;
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PuzzleError {
    #[error("grid shape: {0}")]
    GridShape(String),
    #[error("at {position}: {source}")]
    Token {
        position: Position,
        #[source]
        source: TokenError,
    },
    #[error("symbol {token} cannot be placed at {position}")]
    SymbolPlacement { position: Position, token: String },
    #[error("shape {0} is referenced but not defined")]
    MissingShape(ShapeId),
    #[error("shape {0} has no occupied cells")]
    EmptyShape(ShapeId),
    #[error("endpoint: {0}")]
    Endpoint(String),
}

/// Immutable board definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Puzzle {
    id: String,
    cols: usize,
    rows: usize,
    grid: Vec<Symbol>,
    start: Position,
    end: Position,
    shapes: BTreeMap<ShapeId, Polyshape>,
    difficulty_score: Option<f64>,
}

impl Puzzle {
    /// Validates a symbol matrix (indexed `grid[y][x]`) and builds the puzzle.
    /// Start and end are taken from the `S` and `E` symbols.
    pub fn new(
        id: impl Into<String>,
        grid: Vec<Vec<Symbol>>,
        shapes: BTreeMap<ShapeId, Polyshape>,
        difficulty_score: Option<f64>,
    ) -> Result<Self, PuzzleError> {
        let height = grid.len();
        let width = grid.first().map_or(0, Vec::len);
        if height < 3 || width < 3 || height.is_multiple_of(2) || width.is_multiple_of(2) {
            return Err(PuzzleError::GridShape(format!(
                "{height} rows x {width} columns is not a (2R+1) x (2C+1) grid"
            )));
        }
        if let Some((y, row)) = grid.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(PuzzleError::GridShape(format!(
                "row {y} has {} tokens, expected {width}",
                row.len()
            )));
        }
        let cols = (width - 1) / 2;
        let rows = (height - 1) / 2;
        if cols > MAX_CELLS_PER_SIDE || rows > MAX_CELLS_PER_SIDE {
            return Err(PuzzleError::GridShape(format!(
                "{cols}x{rows} cells exceeds the {MAX_CELLS_PER_SIDE}x{MAX_CELLS_PER_SIDE} limit"
            )));
        }

        let mut start = None;
        let mut end = None;
        for (y, row) in grid.iter().enumerate() {
            for (x, &symbol) in row.iter().enumerate() {
                let position = Position::new(x, y);
                if let Symbol::Triangle { count, .. } = symbol {
                    if !(1..=4).contains(&count) {
                        return Err(PuzzleError::Token {
                            position,
                            source: TokenError(format!("triangle count {count}")),
                        });
                    }
                }
                let is_cell = position.class() == ParityClass::Cell;
                if is_cell != symbol.is_cell_symbol() {
                    return Err(PuzzleError::SymbolPlacement {
                        position,
                        token: symbol.to_string(),
                    });
                }
                if let Some(shape) = symbol.shape() {
                    match shapes.get(&shape) {
                        None => return Err(PuzzleError::MissingShape(shape)),
                        Some(s) if s.area() == 0 => return Err(PuzzleError::EmptyShape(shape)),
                        Some(_) => {}
                    }
                }
                let slot = match symbol {
                    Symbol::Start => &mut start,
                    Symbol::End => &mut end,
                    _ => continue,
                };
                if slot.replace(position).is_some() {
                    return Err(PuzzleError::Endpoint(format!("more than one {symbol} symbol")));
                }
            }
        }
        let start = start.ok_or_else(|| PuzzleError::Endpoint("no start symbol".into()))?;
        let end = end.ok_or_else(|| PuzzleError::Endpoint("no end symbol".into()))?;
        for (name, p) in [("start", start), ("end", end)] {
            let on_border = p.x == 0 || p.y == 0 || p.x == width - 1 || p.y == height - 1;
            if !on_border {
                return Err(PuzzleError::Endpoint(format!("{name} {p} is not on the border")));
            }
        }

        Ok(Self {
            id: id.into(),
            cols,
            rows,
            grid: grid.into_iter().flatten().collect(),
            start,
            end,
            shapes,
            difficulty_score,
        })
    }

    /// Parses token rows such as `["S", "*-Y", "+"]`.
    pub fn from_tokens<R, T>(
        id: impl Into<String>,
        rows: &[R],
        shapes: BTreeMap<ShapeId, Polyshape>,
        difficulty_score: Option<f64>,
    ) -> Result<Self, PuzzleError>
    where
        R: AsRef<[T]>,
        T: AsRef<str>,
    {
        let mut grid = Vec::with_capacity(rows.len());
        for (y, row) in rows.iter().enumerate() {
            let mut symbols = Vec::new();
            for (x, token) in row.as_ref().iter().enumerate() {
                let symbol = token.as_ref().parse().map_err(|source| PuzzleError::Token {
                    position: Position::new(x, y),
                    source,
                })?;
                symbols.push(symbol);
            }
            grid.push(symbols);
        }
        Self::new(id, grid, shapes, difficulty_score)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Number of rule-cell columns (`C`).
    pub fn cell_cols(&self) -> usize {
        self.cols
    }

    /// Number of rule-cell rows (`R`).
    pub fn cell_rows(&self) -> usize {
        self.rows
    }

    /// Symbol-grid width, `2C+1`.
    pub fn width(&self) -> usize {
        2 * self.cols + 1
    }

    /// Symbol-grid height, `2R+1`.
    pub fn height(&self) -> usize {
        2 * self.rows + 1
    }

    pub fn start(&self) -> Position {
        self.start
    }

    pub fn end(&self) -> Position {
        self.end
    }

    pub fn shapes(&self) -> &BTreeMap<ShapeId, Polyshape> {
        &self.shapes
    }

    pub fn shape(&self, id: ShapeId) -> Option<&Polyshape> {
        self.shapes.get(&id)
    }

    pub fn difficulty_score(&self) -> Option<f64> {
        self.difficulty_score
    }

    pub fn with_difficulty_score(mut self, score: Option<f64>) -> Self {
        self.difficulty_score = score;
        self
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.x < self.width() && p.y < self.height()
    }

    pub fn symbol(&self, p: Position) -> Option<Symbol> {
        self.in_bounds(p).then(|| self.grid[p.y * self.width() + p.x])
    }

    /// Whether the path may occupy `p`: in bounds, node or edge, and not a gap.
    pub fn is_passable(&self, p: Position) -> bool {
        self.in_bounds(p) && p.class().is_path_class() && self.symbol(p) != Some(Symbol::Gap)
    }

    /// All positions in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        let w = self.width();
        (0..self.grid.len()).map(move |i| Position::new(i % w, i / w))
    }

    /// `(position, symbol)` pairs in row-major order.
    pub fn symbols(&self) -> impl Iterator<Item = (Position, Symbol)> + '_ {
        self.positions().zip(self.grid.iter().copied())
    }

    /// Rows of grid tokens without any path overlay.
    pub fn token_rows(&self) -> Vec<Vec<String>> {
        self.grid
            .chunks(self.width())
            .map(|row| row.iter().map(ToString::to_string).collect())
            .collect()
    }
}

/// Renders each grid row as a bracketed, quoted token list, e.g.
/// `['L', '*-Y', '+']`. Path positions render as `V` except the head (`L`).
pub fn render_grid_tokens(puzzle: &Puzzle, path: Option<&Path>) -> Vec<String> {
    let head = path.map(Path::head);
    (0..puzzle.height())
        .map(|y| {
            let mut line = String::from("[");
            for x in 0..puzzle.width() {
                let p = Position::new(x, y);
                if x > 0 {
                    line.push_str(", ");
                }
                line.push('\'');
                if head == Some(p) {
                    line.push('L');
                } else if path.is_some_and(|path| path.contains(p)) {
                    line.push('V');
                } else {
                    line.push_str(&puzzle.symbol(p).expect("in bounds").to_string());
                }
                line.push('\'');
            }
            line.push(']');
            line
        })
        .collect()
}
