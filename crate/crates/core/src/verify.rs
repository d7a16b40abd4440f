//! Full-path rule verification.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::{Color, Position, Puzzle, Symbol};
use crate::path::Path;
use crate::polyomino::fit_polyominoes;
use crate::region::{compute_regions, edge_touch_count, CellCoord, RegionPartition};

/// Rule families a violation can be attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Rule {
    Endpoint,
    Dot,
    Gap,
    Square,
    Star,
    Triangle,
    Poly,
    Ylop,
}

impl Rule {
    /// The seven puzzle rule types (excludes `Endpoint`).
    pub const PUZZLE_RULES: [Rule; 7] = [
        Rule::Dot,
        Rule::Gap,
        Rule::Square,
        Rule::Star,
        Rule::Triangle,
        Rule::Poly,
        Rule::Ylop,
    ];

    /// Rule type carried by a symbol, if any.
    pub fn of_symbol(symbol: Symbol) -> Option<Rule> {
        Some(match symbol {
            Symbol::Dot => Rule::Dot,
            Symbol::Gap => Rule::Gap,
            Symbol::Square(_) => Rule::Square,
            Symbol::Star(_) => Rule::Star,
            Symbol::Triangle { .. } => Rule::Triangle,
            Symbol::Poly { .. } => Rule::Poly,
            Symbol::Ylop { .. } => Rule::Ylop,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::Endpoint => "endpoint",
            Rule::Dot => "dot",
            Rule::Gap => "gap",
            Rule::Square => "square",
            Rule::Star => "star",
            Rule::Triangle => "triangle",
            Rule::Poly => "poly",
            Rule::Ylop => "ylop",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub rule: Rule,
    /// Symbol-grid position of the offending symbol (or path end for `Endpoint`).
    pub location: Position,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
}

impl Verdict {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Verdict { satisfied: violations.is_empty(), violations }
    }
}

/// Checks a complete path against every rule.
pub fn verify(puzzle: &Puzzle, path: &Path) -> Verdict {
    let mut out = Vec::new();

    if path.first() != puzzle.start() {
        out.push(Violation {
            rule: Rule::Endpoint,
            location: path.first(),
            detail: format!("path starts at {} instead of {}", path.first(), puzzle.start()),
        });
    }
    if path.head() != puzzle.end() {
        out.push(Violation {
            rule: Rule::Endpoint,
            location: path.head(),
            detail: format!("path ends at {} instead of {}", path.head(), puzzle.end()),
        });
    }

    for (p, symbol) in puzzle.symbols() {
        match symbol {
            Symbol::Dot if !path.contains(p) => out.push(Violation {
                rule: Rule::Dot,
                location: p,
                detail: format!("dot at {p} is not on the path"),
            }),
            Symbol::Gap if path.contains(p) => out.push(Violation {
                rule: Rule::Gap,
                location: p,
                detail: format!("path crosses the gap at {p}"),
            }),
            _ => {}
        }
    }

    let partition = compute_regions(puzzle, path);
    for region in partition.regions() {
        region_violations(puzzle, region, false, &mut out);
    }

    for (p, symbol) in puzzle.symbols() {
        if let Symbol::Triangle { count, .. } = symbol {
            let cell = CellCoord::from_position(p).expect("triangles sit on cells");
            let touched = edge_touch_count(path, cell);
            if touched != usize::from(count) {
                out.push(Violation {
                    rule: Rule::Triangle,
                    location: p,
                    detail: format!("path touches {touched} edges, triangle requires {count}"),
                });
            }
        }
    }

    // Keep the documented check order stable for consumers.
    out.sort_by_key(|v| rule_order(v.rule));
    Verdict::from_violations(out)
}

fn rule_order(rule: Rule) -> u8 {
    match rule {
        Rule::Endpoint => 0,
        Rule::Dot => 1,
        Rule::Gap => 2,
        Rule::Square => 3,
        Rule::Star => 4,
        Rule::Triangle => 5,
        Rule::Poly => 6,
        Rule::Ylop => 7,
    }
}

/// Colored elements of the star's color in its region, excluding the star.
pub fn star_partners(puzzle: &Puzzle, partition: &RegionPartition, star_cell: CellCoord) -> usize {
    let Some(Symbol::Star(color)) = puzzle.symbol(star_cell.position()) else {
        return 0;
    };
    partition
        .region(partition.region_of(star_cell))
        .iter()
        .filter(|&&c| c != star_cell)
        .filter(|c| puzzle.symbol(c.position()).and_then(Symbol::color) == Some(color))
        .count()
}

/// Region-scoped rules (squares, stars, polys, ylops) for one region.
/// With `first_only`, stops after the first violation.
pub(crate) fn region_violations(puzzle: &Puzzle, region: &[CellCoord], first_only: bool, out: &mut Vec<Violation>) {
    let start_len = out.len();
    let done = |out: &Vec<Violation>| first_only && out.len() > start_len;

    let mut color_counts = [0usize; 8];
    let mut square_colors = 0u8;
    let mut polys: Vec<(Position, Color, u32)> = Vec::new();
    let mut ylops: Vec<(Position, Color, u32)> = Vec::new();
    for &cell in region {
        let p = cell.position();
        let symbol = puzzle.symbol(p).expect("cell in bounds");
        if let Some(color) = symbol.color() {
            color_counts[color.index()] += 1;
        }
        match symbol {
            Symbol::Square(c) => square_colors |= 1 << c.index(),
            Symbol::Poly { color, shape } => polys.push((p, color, shape)),
            Symbol::Ylop { color, shape } => ylops.push((p, color, shape)),
            _ => {}
        }
    }

    if square_colors.count_ones() > 1 {
        for &cell in region {
            if let Some(Symbol::Square(_)) = puzzle.symbol(cell.position()) {
                out.push(Violation {
                    rule: Rule::Square,
                    location: cell.position(),
                    detail: format!("region mixes {} square colors", square_colors.count_ones()),
                });
                if done(out) {
                    return;
                }
            }
        }
    }

    for &cell in region {
        if let Some(Symbol::Star(color)) = puzzle.symbol(cell.position()) {
            let partners = color_counts[color.index()] - 1;
            if partners != 1 {
                out.push(Violation {
                    rule: Rule::Star,
                    location: cell.position(),
                    detail: format!("{} star has {partners} same-color partners, needs exactly 1", color.name()),
                });
                if done(out) {
                    return;
                }
            }
        }
    }

    if polys.is_empty() && ylops.is_empty() {
        return;
    }
    // Each ylop cancels one poly of identical shape and color.
    let mut remaining_polys = polys;
    let mut remaining_ylops = Vec::new();
    for ylop in ylops {
        let ylop_shape = puzzle.shape(ylop.2);
        let hit = remaining_polys
            .iter()
            .position(|poly| poly.1 == ylop.1 && puzzle.shape(poly.2) == ylop_shape);
        match hit {
            Some(i) => {
                remaining_polys.swap_remove(i);
            }
            None => remaining_ylops.push(ylop),
        }
    }
    for (p, color, shape) in &remaining_ylops {
        out.push(Violation {
            rule: Rule::Ylop,
            location: *p,
            detail: format!("{} ylop {shape} has no matching poly to cancel", color.name()),
        });
        if done(out) {
            return;
        }
    }
    if remaining_polys.is_empty() {
        return;
    }
    remaining_polys.sort_by_key(|poly| poly.0);
    let shapes: Vec<_> = remaining_polys
        .iter()
        .map(|poly| puzzle.shape(poly.2).expect("shape ids are validated"))
        .collect();
    if !fit_polyominoes(region, &shapes) {
        let area: usize = shapes.iter().map(|s| s.area()).sum();
        for (p, _, shape) in &remaining_polys {
            out.push(Violation {
                rule: Rule::Poly,
                location: *p,
                detail: format!(
                    "region of {} cells cannot be tiled by its polys (shape {shape}, total area {area})",
                    region.len()
                ),
            });
            if done(out) {
                return;
            }
        }
    }
}
