//! Best-effort conversion of upstream SPaRC-style records into puzzle documents.
//!
//! Input is a JSON array of records or JSON lines. Recognised fields:
//!
//! - `id` or `puzzle_id` (string or number)
//! - `puzzle_array` or `grid`: rows of grid tokens
//! - `polyshapes`: object of shape id to 0/1 rows, or a string holding that object
//! - `difficulty_score` (number, optional)
//! - `solutions` (optional): a list of paths, each a list of `{"x":..,"y":..}`
//!   or `[x, y]`, or an object with such a list under `path`; the first one
//!   is checked against the verifier
//!
//! Records that fail to convert are reported, not fatal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use spatial_gym_core::{verify, Path, Polyshape, Position, Puzzle, ShapeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportFailure {
    /// Zero-based record index in the input.
    pub index: usize,
    pub id: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imported {
    pub index: usize,
    /// Result of verifying the record's first listed solution, if any.
    pub reference_solution_ok: Option<bool>,
}

#[derive(Debug, Default)]
pub struct ImportResult {
    pub puzzles: Vec<(Puzzle, Imported)>,
    pub failures: Vec<ImportFailure>,
}

/// Splits input into records: a JSON array, a single object, or JSON lines.
pub fn parse_records(text: &str) -> Result<Vec<Value>, String> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str::<Vec<Value>>(text).map_err(|e| format!("bad JSON array: {e}"));
    }
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(text) {
        return Ok(vec![v]);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", n + 1)))
        .collect()
}

fn record_id(record: &Value) -> Option<String> {
    match record.get("id").or_else(|| record.get("puzzle_id"))? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn shape_rows(value: &Value) -> Option<Vec<Vec<u8>>> {
    value
        .as_array()?
        .iter()
        .map(|row| row.as_array()?.iter().map(|c| c.as_u64().map(|v| u8::from(v != 0))).collect())
        .collect()
}

fn parse_shapes(value: Option<&Value>) -> Result<BTreeMap<ShapeId, Polyshape>, String> {
    let owned;
    let object = match value {
        None | Some(Value::Null) => return Ok(BTreeMap::new()),
        Some(Value::String(s)) if s.trim().is_empty() => return Ok(BTreeMap::new()),
        Some(Value::String(s)) => {
            owned = serde_json::from_str::<Value>(s).map_err(|e| format!("polyshapes string: {e}"))?;
            &owned
        }
        Some(v) => v,
    };
    let map = object.as_object().ok_or("polyshapes is not an object")?;
    let mut shapes = BTreeMap::new();
    for (key, rows) in map {
        let id: ShapeId = key.trim().parse().map_err(|_| format!("shape id {key:?} is not a number"))?;
        let rows = shape_rows(rows).ok_or_else(|| format!("shape {key} is not a 0/1 matrix"))?;
        let shape = Polyshape::from_rows(&rows).ok_or_else(|| format!("shape {key} is empty"))?;
        shapes.insert(id, shape);
    }
    Ok(shapes)
}

fn parse_point(value: &Value) -> Option<Position> {
    let (x, y) = match value {
        Value::Object(o) => (o.get("x")?.as_u64()?, o.get("y")?.as_u64()?),
        Value::Array(a) if a.len() == 2 => (a[0].as_u64()?, a[1].as_u64()?),
        _ => return None,
    };
    Some(Position::new(x as usize, y as usize))
}

fn first_solution(record: &Value) -> Option<Vec<Position>> {
    let first = record.get("solutions")?.as_array()?.first()?;
    let points = first.get("path").unwrap_or(first).as_array()?;
    points.iter().map(parse_point).collect()
}

pub fn convert_record(record: &Value) -> Result<(Puzzle, Option<bool>), String> {
    let id = record_id(record).ok_or("missing id")?;
    let grid = record.get("puzzle_array").or_else(|| record.get("grid")).ok_or("missing puzzle_array")?;
    let rows: Vec<Vec<String>> = grid
        .as_array()
        .ok_or("puzzle_array is not a list")?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or("puzzle_array row is not a list")?
                .iter()
                .map(|t| match t {
                    Value::String(s) => Ok(s.trim().to_string()),
                    other => Err(format!("token {other} is not a string")),
                })
                .collect::<Result<Vec<_>, String>>()
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, String>>()?;
    let shapes = parse_shapes(record.get("polyshapes"))?;
    let score = record.get("difficulty_score").and_then(Value::as_f64);
    let puzzle = Puzzle::from_tokens(id, &rows, shapes, score).map_err(|e| e.to_string())?;
    let check = first_solution(record).map(|positions| match Path::new(&puzzle, positions) {
        Ok(path) => verify(&puzzle, &path).satisfied,
        Err(_) => false,
    });
    Ok((puzzle, check))
}

pub fn import_records(records: &[Value]) -> ImportResult {
    let mut result = ImportResult::default();
    let mut seen = std::collections::BTreeSet::new();
    for (index, record) in records.iter().enumerate() {
        match convert_record(record) {
            Ok((puzzle, _)) if !seen.insert(puzzle.id().to_string()) => result.failures.push(ImportFailure {
                index,
                id: Some(puzzle.id().to_string()),
                error: "duplicate id".into(),
            }),
            Ok((puzzle, check)) => {
                result.puzzles.push((puzzle, Imported { index, reference_solution_ok: check }));
            }
            Err(error) => result.failures.push(ImportFailure { index, id: record_id(record), error }),
        }
    }
    result
}
