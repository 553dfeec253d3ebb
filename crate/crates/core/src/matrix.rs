//! Dense real matrices and tri-state binary matrices.

use std::collections::HashSet;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A dense, finite, row-major real matrix with at least one row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(Array2<f64>);

impl DenseMatrix {
    pub fn new(array: Array2<f64>) -> Result<Self> {
        let (rows, cols) = array.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::argument(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if let Some(v) = array.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "matrix contains non-finite value {v}"
            )));
        }
        Ok(DenseMatrix(array))
    }

    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::argument(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        let array = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::argument(e.to_string()))?;
        Self::new(array)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut((usize, usize)) -> f64) -> Result<Self> {
        Self::new(Array2::from_shape_fn((rows, cols), f))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn view(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Values in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.0 * c)
    }
}

#[derive(Serialize, Deserialize)]
struct DenseRepr {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DenseRepr {
            rows: self.rows(),
            cols: self.cols(),
            values: self.to_row_major(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = DenseRepr::deserialize(d)?;
        DenseMatrix::from_row_major(repr.rows, repr.cols, repr.values)
            .map_err(serde::de::Error::custom)
    }
}

/// One cell of a partially observed binary matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Zero,
    One,
    Unknown,
}

impl Cell {
    pub fn is_observed(self) -> bool {
        self != Cell::Unknown
    }

    fn to_char(self) -> char {
        match self {
            Cell::Zero => '0',
            Cell::One => '1',
            Cell::Unknown => '.',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(Cell::Zero),
            '1' => Some(Cell::One),
            '.' => Some(Cell::Unknown),
            _ => None,
        }
    }
}

/// A labelled binary matrix in which each cell is a present link, an absent
/// link, or unknown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedBinaryMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Cell>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl MaskedBinaryMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        entries: Vec<Cell>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::argument("binary matrix must be non-empty"));
        }
        if entries.len() != rows * cols {
            return Err(Error::argument(format!(
                "expected {} cells, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if row_labels.len() != rows || col_labels.len() != cols {
            return Err(Error::argument("label counts do not match matrix shape"));
        }
        check_unique(&row_labels, "row")?;
        check_unique(&col_labels, "column")?;
        if !entries.iter().any(|c| c.is_observed()) {
            return Err(Error::domain("binary matrix has no observed cells"));
        }
        Ok(MaskedBinaryMatrix {
            rows,
            cols,
            entries,
            row_labels,
            col_labels,
        })
    }

    /// Builds a matrix with generated labels `r0..`, `c0..`.
    pub fn from_cells(rows: usize, cols: usize, entries: Vec<Cell>) -> Result<Self> {
        let row_labels = (0..rows).map(|i| format!("r{i}")).collect();
        let col_labels = (0..cols).map(|j| format!("c{j}")).collect();
        Self::new(rows, cols, entries, row_labels, col_labels)
    }

    /// Fully observed matrix from booleans.
    pub fn from_bools(rows: usize, cols: usize, values: &[bool]) -> Result<Self> {
        let cells = values
            .iter()
            .map(|&b| if b { Cell::One } else { Cell::Zero })
            .collect();
        Self::from_cells(rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Cell] {
        &self.entries
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.col_labels.iter().position(|l| l == label)
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.row_labels.iter().position(|l| l == label)
    }

    pub fn observed_count(&self) -> usize {
        self.entries.iter().filter(|c| c.is_observed()).count()
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.entries.iter().filter(|&&c| c == cell).count()
    }

    /// Iterates `(row, col, cell)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        let cols = self.cols;
        self.entries
            .iter()
            .enumerate()
            .map(move |(idx, &c)| (idx / cols, idx % cols, c))
    }

    /// Returns a copy with the listed cells replaced by `cell`.
    pub fn with_cells(&self, cells: &[(usize, usize)], cell: Cell) -> Result<Self> {
        let mut out = self.clone();
        for &(i, j) in cells {
            if i >= self.rows || j >= self.cols {
                return Err(Error::argument(format!("cell ({i}, {j}) out of range")));
            }
            out.entries[i * self.cols + j] = cell;
        }
        if !out.entries.iter().any(|c| c.is_observed()) {
            return Err(Error::domain("masking left no observed cells"));
        }
        Ok(out)
    }

    /// Real-valued copy with unknown cells imputed as zero.
    pub fn imputed(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.rows, self.cols), |(i, j)| match self.get(i, j) {
            Cell::One => 1.0,
            _ => 0.0,
        })
    }

    /// Observation mask: 1 for observed cells, 0 for unknown.
    pub fn mask(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.rows, self.cols), |(i, j)| {
            if self.get(i, j).is_observed() {
                1.0
            } else {
                0.0
            }
        })
    }
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::argument(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

impl fmt::Display for MaskedBinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let line: String = (0..self.cols).map(|j| self.get(i, j).to_char()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MaskedRepr {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    /// One string per row; `1`, `0`, `.` for one, zero, unknown.
    cells: Vec<String>,
}

impl Serialize for MaskedBinaryMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cells = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_char()).collect())
            .collect();
        MaskedRepr {
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            cells,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MaskedBinaryMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = MaskedRepr::deserialize(d)?;
        let rows = repr.row_labels.len();
        let cols = repr.col_labels.len();
        if repr.cells.len() != rows {
            return Err(D::Error::custom("cell row count does not match labels"));
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for line in &repr.cells {
            let before = entries.len();
            for c in line.chars() {
                entries.push(
                    Cell::from_char(c)
                        .ok_or_else(|| D::Error::custom(format!("bad cell `{c}`")))?,
                );
            }
            if entries.len() - before != cols {
                return Err(D::Error::custom("cell column count does not match labels"));
            }
        }
        MaskedBinaryMatrix::new(rows, cols, entries, repr.row_labels, repr.col_labels)
            .map_err(D::Error::custom)
    }
}
