//! Two-way contingency tables and the cell-set geometry used by the models.
//!
//! Cells are addressed by 1-based `(row, col)` pairs. Every vectorization in
//! the crate uses the same row-major order: cell `(i, j)` sits at linear index
//! `(i - 1) * cols + (j - 1)`.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// A 1-based `(row, col)` cell address.
pub type Cell = (usize, usize);

/// An R×C table of nonnegative integer counts, R, C ≥ 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Table {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl Table {
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        check_grid(rows, cols)?;
        if counts.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cells", rows * cols),
                found: format!("{} cells", counts.len()),
            });
        }
        Ok(Table { rows, cols, counts })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Table::new(rows, cols, vec![0; rows * cols])
    }

    /// Builds a table from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::InvalidTable("ragged rows".into()));
        }
        let counts = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Table::new(rows.len(), cols, counts)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub(crate) fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    /// Count at the 1-based cell `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[cell_index(self.cols, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: u64) {
        let k = cell_index(self.cols, i, j);
        self.counts[k] = value;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0; self.cols];
        for row in self.counts.chunks(self.cols) {
            for (s, &x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    /// Sum of the counts over a cell set.
    pub fn subtable_sum(&self, set: &CellSet) -> u64 {
        set.indices().map(|k| self.counts[k]).sum()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.cols)
    }

    /// Reads a table from comma-separated nonnegative integers, one table
    /// row per line. With `header`, the first line and the first field of
    /// every other line are treated as labels and skipped.
    pub fn read_csv<R: Read>(reader: R, header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let fields = record.iter().skip(usize::from(header));
            let row = fields
                .map(|f| {
                    f.parse::<u64>().map_err(|_| {
                        Error::Parse(format!(
                            "line {}: `{f}` is not a nonnegative integer",
                            line + 1 + usize::from(header)
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Table::from_rows(&rows)
    }

    /// Writes the table as plain CSV with no header, `\n` line endings.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.iter_rows() {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// The table with rows and columns exchanged.
    pub fn transposed(&self) -> Table {
        let mut counts = vec![0; self.counts.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                counts[j * self.rows + i] = self.counts[i * self.cols + j];
            }
        }
        Table {
            rows: self.cols,
            cols: self.rows,
            counts,
        }
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.iter_rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:>4}")).collect();
            writeln!(f, "{}", line.join(""))?;
        }
        Ok(())
    }
}

pub(crate) fn check_grid(rows: usize, cols: usize) -> Result<()> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidTable(format!(
            "a table needs at least 2 rows and 2 columns, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// Row-major linear index of the 1-based cell `(i, j)`.
#[inline]
pub fn cell_index(cols: usize, i: usize, j: usize) -> usize {
    (i - 1) * cols + (j - 1)
}

/// Inverse of [`cell_index`].
#[inline]
pub fn index_cell(cols: usize, k: usize) -> Cell {
    (k / cols + 1, k % cols + 1)
}

/// An axis-aligned block of cells `a1..=a2` × `b1..=b2` (1-based, inclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rectangle {
    pub a1: usize,
    pub a2: usize,
    pub b1: usize,
    pub b2: usize,
}

impl Rectangle {
    pub fn new(a1: usize, a2: usize, b1: usize, b2: usize) -> Self {
        Rectangle { a1, a2, b1, b2 }
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.a1 <= i && i <= self.a2 && self.b1 <= j && j <= self.b2
    }

    /// Whether `self` is contained in `other`.
    pub fn is_within(&self, other: &Rectangle) -> bool {
        other.a1 <= self.a1 && self.a2 <= other.a2 && other.b1 <= self.b1 && self.b2 <= other.b2
    }

    pub fn num_cells(&self) -> usize {
        (self.a2 + 1 - self.a1) * (self.b2 + 1 - self.b1)
    }

    pub fn fits_grid(&self, rows: usize, cols: usize) -> bool {
        1 <= self.a1 && self.a1 <= self.a2 && self.a2 <= rows && 1 <= self.b1 && self.b1 <= self.b2 && self.b2 <= cols
    }

    pub fn to_cell_set(&self, rows: usize, cols: usize) -> Result<CellSet> {
        let cells = (self.a1..=self.a2).flat_map(|i| (self.b1..=self.b2).map(move |j| (i, j)));
        CellSet::from_cells(rows, cols, cells)
    }
}

impl fmt::Display for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..{}]x[{}..{}]", self.a1, self.a2, self.b1, self.b2)
    }
}

/// An explicit set of in-grid cells, stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellSet {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
}

impl CellSet {
    pub fn empty(rows: usize, cols: usize) -> Self {
        CellSet {
            rows,
            cols,
            mask: vec![false; rows * cols],
        }
    }

    /// Rejects out-of-grid and duplicate cells.
    pub fn from_cells<I: IntoIterator<Item = Cell>>(rows: usize, cols: usize, cells: I) -> Result<Self> {
        let mut set = CellSet::empty(rows, cols);
        for (i, j) in cells {
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(Error::CellOutOfGrid { row: i, col: j, rows, cols });
            }
            let k = cell_index(cols, i, j);
            if set.mask[k] {
                return Err(Error::InvalidModel(vec![format!("duplicate cell ({i},{j})")]));
            }
            set.mask[k] = true;
        }
        Ok(set)
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i <= self.rows && j <= self.cols && self.mask[cell_index(self.cols, i, j)]
    }

    #[inline]
    pub fn contains_index(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    /// Linear indices of member cells in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.indices().map(|k| index_cell(self.cols, k))
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        CellSet {
            rows: self.rows,
            cols: self.cols,
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }
}
