//! Color grids and the geometric transforms of the restricted action set.
//!
//! All transforms are pure and work on rectangular grids; rotations swap
//! the dimensions. Rotation names count clockwise degrees, so
//! [`rotate270`] is a single counterclockwise quarter-turn.

use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest side length of an ARC grid.
pub const MAX_SIDE: usize = 30;
/// Number of ARC colors.
pub const NUM_COLORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid has no cells")]
    Empty,
    #[error("row {row} has {len} cells, expected {expected}")]
    RaggedRows { row: usize, len: usize, expected: usize },
    #[error("color {0} is outside the palette 0..=9")]
    ColorOutOfRange(i64),
    #[error("grid side {0} exceeds the maximum of 30")]
    TooLarge(usize),
    #[error("cell buffer has {got} entries for a {rows}x{cols} grid")]
    BadLength { rows: usize, cols: usize, got: usize },
    #[error("malformed grid text: {0}")]
    Syntax(String),
}

/// One ARC color, `0..=9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Color(u8);

impl Color {
    pub fn new(value: u8) -> Result<Self, GridError> {
        if (value as usize) < NUM_COLORS {
            Ok(Color(value))
        } else {
            Err(GridError::ColorOutOfRange(value as i64))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Color {
    type Error = GridError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Color::new(value)
    }
}

/// A rectangular grid of colors stored row-major.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, cells: Vec<u8>) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::Empty);
        }
        if rows > MAX_SIDE {
            return Err(GridError::TooLarge(rows));
        }
        if cols > MAX_SIDE {
            return Err(GridError::TooLarge(cols));
        }
        if cells.len() != rows * cols {
            return Err(GridError::BadLength { rows, cols, got: cells.len() });
        }
        if let Some(&bad) = cells.iter().find(|&&v| v as usize >= NUM_COLORS) {
            return Err(GridError::ColorOutOfRange(bad as i64));
        }
        Ok(Grid { rows, cols, cells })
    }

    /// Builds a grid from nested rows, validating shape and palette.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, GridError> {
        let first = rows.first().ok_or(GridError::Empty)?.as_ref().len();
        let mut cells = Vec::with_capacity(rows.len() * first);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != first {
                return Err(GridError::RaggedRows { row: i, len: row.len(), expected: first });
            }
            cells.extend_from_slice(row);
        }
        Grid::new(rows.len(), first, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Color {
        Color(self.cells[row * self.cols + col])
    }

    /// Raw row-major cell values.
    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.cols).map(<[u8]>::to_vec).collect()
    }

    /// Per-color cell counts.
    pub fn color_histogram(&self) -> [usize; NUM_COLORS] {
        let mut hist = [0; NUM_COLORS];
        for &c in &self.cells {
            hist[c as usize] += 1;
        }
        hist
    }

    /// Builds an `out_rows x out_cols` grid whose cell `(i, j)` is copied
    /// from `self` at `src(i, j)`.
    fn remap(&self, out_rows: usize, out_cols: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Grid {
        let mut cells = Vec::with_capacity(out_rows * out_cols);
        for i in 0..out_rows {
            for j in 0..out_cols {
                let (r, c) = src(i, j);
                cells.push(self.cells[r * self.cols + c]);
            }
        }
        Grid { rows: out_rows, cols: out_cols, cells }
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid{}", emit_grid(self))
    }
}

impl Serialize for Grid {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        grid_from_json(&value).map_err(serde::de::Error::custom)
    }
}

/// Clockwise quarter-turn: `out[i][j] = in[r-1-j][i]`.
pub fn rotate90(g: &Grid) -> Grid {
    let r = g.rows;
    g.remap(g.cols, g.rows, |i, j| (r - 1 - j, i))
}

/// Counterclockwise quarter-turn: `out[i][j] = in[j][c-1-i]`.
pub fn rotate270(g: &Grid) -> Grid {
    let c = g.cols;
    g.remap(g.cols, g.rows, |i, j| (j, c - 1 - i))
}

/// Left-right mirror.
pub fn flip_h(g: &Grid) -> Grid {
    let c = g.cols;
    g.remap(g.rows, g.cols, |i, j| (i, c - 1 - j))
}

/// Up-down mirror.
pub fn flip_v(g: &Grid) -> Grid {
    let r = g.rows;
    g.remap(g.rows, g.cols, |i, j| (r - 1 - i, j))
}

/// Reflection across the main diagonal.
pub fn transpose(g: &Grid) -> Grid {
    g.remap(g.cols, g.rows, |i, j| (j, i))
}

/// Reflection across the anti-diagonal: `out[i][j] = in[r-1-j][c-1-i]`
/// (for square grids, `in[n-1-j][n-1-i]`).
pub fn anti_transpose(g: &Grid) -> Grid {
    let (r, c) = (g.rows, g.cols);
    g.remap(g.cols, g.rows, |i, j| (r - 1 - j, c - 1 - i))
}

/// Stable 64-bit FNV-1a digest over the dimensions and every cell.
pub fn grid_digest(g: &Grid) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(&[g.rows as u8, g.cols as u8]);
    hasher.write(&g.cells);
    hasher.finish()
}

fn grid_from_json(value: &serde_json::Value) -> Result<Grid, GridError> {
    let outer = value
        .as_array()
        .ok_or_else(|| GridError::Syntax("expected an array of rows".into()))?;
    if outer.is_empty() {
        return Err(GridError::Empty);
    }
    let mut rows: Vec<Vec<u8>> = Vec::with_capacity(outer.len());
    for row in outer {
        let row = row
            .as_array()
            .ok_or_else(|| GridError::Syntax("expected each row to be an array".into()))?;
        let mut cells = Vec::with_capacity(row.len());
        for cell in row {
            let v = cell
                .as_i64()
                .ok_or_else(|| GridError::Syntax(format!("non-integer cell {cell}")))?;
            if !(0..NUM_COLORS as i64).contains(&v) {
                return Err(GridError::ColorOutOfRange(v));
            }
            cells.push(v as u8);
        }
        rows.push(cells);
    }
    if rows[0].is_empty() {
        return Err(GridError::Empty);
    }
    Grid::from_rows(&rows)
}

/// Parses an ARC grid fragment such as `[[0,1],[2,3]]`.
pub fn parse_grid(text: &str) -> Result<Grid, GridError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GridError::Syntax(e.to_string()))?;
    grid_from_json(&value)
}

/// Emits the compact ARC form, e.g. `[[0,1],[2,3]]`.
pub fn emit_grid(g: &Grid) -> String {
    let mut out = String::with_capacity(g.cells.len() * 2 + g.rows * 2 + 2);
    out.push('[');
    for (i, row) in g.cells.chunks(g.cols).enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push((b'0' + v) as char);
        }
        out.push(']');
    }
    out.push(']');
    out
}
