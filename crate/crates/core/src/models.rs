//! Subtable-effect log-linear model families and their validation.
//!
//! Every family shares the row and column main effects; they differ only in
//! which cell sets carry an additional interaction term:
//!
//! * `Independence`: none.
//! * `ChangePoint`: one term per nested rectangle `S_1 ⊂ S_2 ⊂ … ⊂ S_N ⊊ I`.
//! * `BlockDiagonalOwn`: one term per diagonal block `I_nn`.
//! * `CommonBlockDiagonal`: a single term on the union of the diagonal blocks.
//! * `GeneralBlockDiagonal`: one term per group of diagonal blocks.
//!
//! Specs are declared in the table's own coordinates and are never permuted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{check_grid, CellSet, Rectangle};

/// Block boundaries `r_1 < … < r_{N+1}` and `c_1 < … < c_{N+1}` (1-based,
/// exclusive upper ends). Block `(k, l)` covers rows `r_k..r_{k+1}` and
/// columns `c_l..c_{l+1}`.
///
/// Indices are read modulo the grid extent: when `r_1 > 1`, row `i < r_1`
/// stands for `i + R`, so blocks may wrap around the end of the table
/// (seasons of the year on a month × month table, say).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockBounds {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl BlockBounds {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        BlockBounds { rows, cols }
    }

    /// Equal-sized square blocks of side `size` tiling an `n·size` grid.
    pub fn uniform(blocks: usize, size: usize) -> Self {
        let b: Vec<usize> = (0..=blocks).map(|k| 1 + k * size).collect();
        BlockBounds::new(b.clone(), b)
    }

    /// Number of diagonal blocks N.
    pub fn num_blocks(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// The row block containing row `i` of an `extent`-row grid, or `None`
    /// for rows outside every block.
    pub fn row_block(&self, i: usize, extent: usize) -> Option<usize> {
        block_of(&self.rows, i, extent)
    }

    pub fn col_block(&self, j: usize, extent: usize) -> Option<usize> {
        block_of(&self.cols, j, extent)
    }

    /// Whether any block wraps past the last row or column.
    pub fn wraps(&self) -> bool {
        self.rows.first().is_some_and(|&r| r > 1) || self.cols.first().is_some_and(|&c| c > 1)
    }

    /// Cells of the diagonal block `I_nn`.
    pub fn diagonal_cells(&self, n: usize, rows: usize, cols: usize) -> Result<CellSet> {
        let cells = (self.rows[n - 1]..self.rows[n])
            .flat_map(|i| (self.cols[n - 1]..self.cols[n]).map(move |j| (wrap(i, rows), wrap(j, cols))));
        CellSet::from_cells(rows, cols, cells)
    }
}

fn wrap(x: usize, extent: usize) -> usize {
    (x - 1) % extent + 1
}

fn block_of(bounds: &[usize], x: usize, extent: usize) -> Option<usize> {
    let first = *bounds.first()?;
    let x = if x < first { x + extent } else { x };
    (1..bounds.len()).find(|&k| bounds[k - 1] <= x && x < bounds[k])
}

/// The identifying pair `(k, l)` of block `I_kl`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockIndex {
    pub k: usize,
    pub l: usize,
}

impl BlockIndex {
    pub fn is_diagonal(&self) -> bool {
        self.k == self.l
    }
}

/// A model family together with its subtable geometry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    Independence,
    ChangePoint { rectangles: Vec<Rectangle> },
    BlockDiagonalOwn(BlockBounds),
    CommonBlockDiagonal(BlockBounds),
    GeneralBlockDiagonal { bounds: BlockBounds, groups: Vec<Vec<usize>> },
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Independence => Family::Independence,
            ModelSpec::ChangePoint { .. } => Family::ChangePoint,
            ModelSpec::BlockDiagonalOwn(_) => Family::BlockDiagonalOwn,
            ModelSpec::CommonBlockDiagonal(_) => Family::CommonBlockDiagonal,
            ModelSpec::GeneralBlockDiagonal { .. } => Family::GeneralBlockDiagonal,
        }
    }

    pub fn bounds(&self) -> Option<&BlockBounds> {
        match self {
            ModelSpec::BlockDiagonalOwn(b) | ModelSpec::CommonBlockDiagonal(b) => Some(b),
            ModelSpec::GeneralBlockDiagonal { bounds, .. } => Some(bounds),
            _ => None,
        }
    }

    /// Checks every structural constraint of the family on an R×C grid and
    /// returns all violations found.
    pub fn validate(&self, rows: usize, cols: usize) -> std::result::Result<(), Vec<String>> {
        let mut v = Vec::new();
        if rows < 2 || cols < 2 {
            v.push(format!("grid must be at least 2x2, got {rows}x{cols}"));
            return Err(v);
        }
        match self {
            ModelSpec::Independence => {}
            ModelSpec::ChangePoint { rectangles } => validate_change_point(rectangles, rows, cols, &mut v),
            ModelSpec::BlockDiagonalOwn(b) | ModelSpec::CommonBlockDiagonal(b) => {
                validate_bounds(b, rows, cols, true, &mut v);
                if b.num_blocks() < 2 {
                    v.push("block diagonal models need at least 2 blocks".into());
                }
            }
            ModelSpec::GeneralBlockDiagonal { bounds, groups } => {
                validate_bounds(bounds, rows, cols, false, &mut v);
                validate_groups(groups, bounds.num_blocks(), &mut v);
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

fn validate_change_point(rects: &[Rectangle], rows: usize, cols: usize, v: &mut Vec<String>) {
    if rects.is_empty() {
        v.push("change point model needs at least one rectangle".into());
    }
    for (n, r) in rects.iter().enumerate() {
        if !r.fits_grid(rows, cols) {
            v.push(format!("rectangle S_{} = {r} is not a valid rectangle of the {rows}x{cols} grid", n + 1));
        } else if r.num_cells() < 2 {
            v.push(format!("rectangle S_{} = {r} is a single cell", n + 1));
        }
    }
    if !v.is_empty() {
        return;
    }
    for (n, w) in rects.windows(2).enumerate() {
        if !w[0].is_within(&w[1]) || w[0] == w[1] {
            v.push(format!("strict inclusion violated: S_{} is not a proper subset of S_{}", n + 1, n + 2));
        }
    }
    if let Some(last) = rects.last() {
        if last.num_cells() == rows * cols {
            v.push("strict inclusion violated: the largest rectangle covers the whole grid".into());
        }
    }
}

fn validate_bounds(b: &BlockBounds, rows: usize, cols: usize, full: bool, v: &mut Vec<String>) {
    for (name, bounds, extent) in [("row", &b.rows, rows), ("column", &b.cols, cols)] {
        if bounds.len() < 2 {
            v.push(format!("{name} bounds need at least two entries"));
            continue;
        }
        let first = bounds[0];
        if first < 1 || first > extent {
            v.push(format!("{name} bounds must start within 1..={extent}"));
            continue;
        }
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            v.push(format!("{name} bounds must be strictly increasing"));
        }
        let last = *bounds.last().unwrap_or(&0);
        if full && last != first + extent {
            v.push(format!("{name} bounds must end at {}", first + extent));
        } else if last > first + extent {
            v.push(format!("{name} bounds must not exceed {}", first + extent));
        }
    }
    if b.rows.len() != b.cols.len() {
        v.push("row and column bounds must define the same number of blocks".into());
    }
}

fn validate_groups(groups: &[Vec<usize>], n: usize, v: &mut Vec<String>) {
    if groups.is_empty() {
        v.push("general block diagonal model needs at least one group".into());
    }
    let mut seen = vec![false; n + 1];
    for (q, g) in groups.iter().enumerate() {
        if g.is_empty() {
            v.push(format!("group {} is empty", q + 1));
        }
        for &b in g {
            if b == 0 || b > n {
                v.push(format!("group {} refers to block {b}, outside 1..={n}", q + 1));
            } else if seen[b] {
                v.push(format!("disjoint groups violated: block {b} appears more than once"));
            } else {
                seen[b] = true;
            }
        }
    }
}

/// Model family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Independence,
    #[serde(alias = "changepoint")]
    ChangePoint,
    #[serde(alias = "own_blocks", alias = "own")]
    BlockDiagonalOwn,
    #[serde(alias = "common_blocks", alias = "common")]
    CommonBlockDiagonal,
    #[serde(alias = "general")]
    GeneralBlockDiagonal,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Independence => "independence",
            Family::ChangePoint => "change_point",
            Family::BlockDiagonalOwn => "block_diagonal_own",
            Family::CommonBlockDiagonal => "common_block_diagonal",
            Family::GeneralBlockDiagonal => "general_block_diagonal",
        };
        f.write_str(s)
    }
}

/// On-disk model-spec document.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rectangles: Vec<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub row_bounds: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub col_bounds: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<Vec<usize>>,
}

impl TryFrom<ModelFile> for ModelSpec {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let family = f.family.ok_or_else(|| Error::Parse("model spec is missing `family`".into()))?;
        let (rects, bounds, groups) = match family {
            Family::Independence => (false, false, false),
            Family::ChangePoint => (true, false, false),
            Family::BlockDiagonalOwn | Family::CommonBlockDiagonal => (false, true, false),
            Family::GeneralBlockDiagonal => (false, true, true),
        };
        let stray = [
            ("rectangles", !rects && !f.rectangles.is_empty()),
            ("row_bounds", !bounds && !f.row_bounds.is_empty()),
            ("col_bounds", !bounds && !f.col_bounds.is_empty()),
            ("groups", !groups && !f.groups.is_empty()),
        ];
        if let Some((field, _)) = stray.iter().find(|(_, bad)| *bad) {
            return Err(Error::Parse(format!("`{field}` does not apply to this model family")));
        }
        let bounds = || BlockBounds::new(f.row_bounds.clone(), f.col_bounds.clone());
        Ok(match family {
            Family::Independence => ModelSpec::Independence,
            Family::ChangePoint => ModelSpec::ChangePoint {
                rectangles: f.rectangles.iter().map(|r| Rectangle::new(r[0], r[1], r[2], r[3])).collect(),
            },
            Family::BlockDiagonalOwn => ModelSpec::BlockDiagonalOwn(bounds()),
            Family::CommonBlockDiagonal => ModelSpec::CommonBlockDiagonal(bounds()),
            Family::GeneralBlockDiagonal => ModelSpec::GeneralBlockDiagonal {
                bounds: bounds(),
                groups: f.groups.clone(),
            },
        })
    }
}

impl From<&ModelSpec> for ModelFile {
    fn from(spec: &ModelSpec) -> Self {
        let mut f = ModelFile {
            family: Some(spec.family()),
            ..Default::default()
        };
        match spec {
            ModelSpec::Independence => {}
            ModelSpec::ChangePoint { rectangles } => {
                f.rectangles = rectangles.iter().map(|r| [r.a1, r.a2, r.b1, r.b2]).collect();
            }
            ModelSpec::BlockDiagonalOwn(b) | ModelSpec::CommonBlockDiagonal(b) => {
                f.row_bounds = b.rows.clone();
                f.col_bounds = b.cols.clone();
            }
            ModelSpec::GeneralBlockDiagonal { bounds, groups } => {
                f.row_bounds = bounds.rows.clone();
                f.col_bounds = bounds.cols.clone();
                f.groups = groups.clone();
            }
        }
        f
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        ModelSpec::try_from(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model spec serializes")
    }
}

/// A model spec validated against a fixed grid, with its subtable cell sets
/// materialized in declaration order.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    rows: usize,
    cols: usize,
    terms: Vec<CellSet>,
}

impl Model {
    pub fn new(spec: ModelSpec, rows: usize, cols: usize) -> Result<Self> {
        check_grid(rows, cols)?;
        spec.validate(rows, cols).map_err(Error::InvalidModel)?;
        let terms = match &spec {
            ModelSpec::Independence => Vec::new(),
            ModelSpec::ChangePoint { rectangles } => rectangles
                .iter()
                .map(|r| r.to_cell_set(rows, cols))
                .collect::<Result<_>>()?,
            ModelSpec::BlockDiagonalOwn(b) => (1..=b.num_blocks())
                .map(|n| b.diagonal_cells(n, rows, cols))
                .collect::<Result<_>>()?,
            ModelSpec::CommonBlockDiagonal(b) => {
                vec![union_of_blocks(b, 1..=b.num_blocks(), rows, cols)?]
            }
            ModelSpec::GeneralBlockDiagonal { bounds, groups } => groups
                .iter()
                .map(|g| union_of_blocks(bounds, g.iter().copied(), rows, cols))
                .collect::<Result<_>>()?,
        };
        Ok(Model { spec, rows, cols, terms })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// The subtable cell sets carrying interaction terms, in declaration order.
    pub fn terms(&self) -> &[CellSet] {
        &self.terms
    }

    fn check_cell(&self, i: usize, j: usize) -> Result<()> {
        if i == 0 || j == 0 || i > self.rows || j > self.cols {
            return Err(Error::CellOutOfGrid {
                row: i,
                col: j,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    /// The block `I_kl` containing `(i, j)`; `None` for families without
    /// blocks or for cells outside the covered region of a general model.
    pub fn cell_block(&self, i: usize, j: usize) -> Result<Option<BlockIndex>> {
        self.check_cell(i, j)?;
        Ok(self.spec.bounds().and_then(|b| {
            let k = b.row_block(i, self.rows)?;
            let l = b.col_block(j, self.cols)?;
            Some(BlockIndex { k, l })
        }))
    }

    /// For change point models, the `n` with `(i, j) ∈ S_n ∖ S_{n-1}`, where
    /// `S_0 = ∅` and `S_{N+1}` is the whole grid. `None` for other families.
    pub fn cell_stratum(&self, i: usize, j: usize) -> Result<Option<usize>> {
        self.check_cell(i, j)?;
        Ok(match &self.spec {
            ModelSpec::ChangePoint { rectangles } => Some(
                rectangles
                    .iter()
                    .position(|r| r.contains(i, j))
                    .map_or(rectangles.len() + 1, |n| n + 1),
            ),
            _ => None,
        })
    }
}

fn union_of_blocks<I: IntoIterator<Item = usize>>(
    b: &BlockBounds,
    blocks: I,
    rows: usize,
    cols: usize,
) -> Result<CellSet> {
    let mut set = CellSet::empty(rows, cols);
    for n in blocks {
        set = set.union(&b.diagonal_cells(n, rows, cols)?);
    }
    Ok(set)
}

/// Whether `inner`'s sufficient statistic is a linear function of `outer`'s,
/// decided by exact row-space containment of the two configurations.
pub fn is_nested(inner: &Model, outer: &Model) -> bool {
    if inner.rows != outer.rows || inner.cols != outer.cols {
        return false;
    }
    let a = crate::configuration::Configuration::new(outer);
    let b = crate::configuration::Configuration::new(inner);
    crate::linalg::row_space_contains(&a.dense_i64(), &b.dense_i64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gilby_spec() -> ModelSpec {
        ModelSpec::ChangePoint {
            rectangles: vec![Rectangle::new(1, 3, 1, 1), Rectangle::new(1, 5, 1, 2)],
        }
    }

    #[test]
    fn validates_gilby_change_point() {
        assert!(gilby_spec().validate(8, 4).is_ok());
    }

    #[test]
    fn rejects_equal_rectangles() {
        let r = Rectangle::new(1, 2, 1, 2);
        let spec = ModelSpec::ChangePoint { rectangles: vec![r, r] };
        let err = spec.validate(4, 4).unwrap_err();
        assert!(err.iter().any(|e| e.contains("strict inclusion")), "{err:?}");
    }

    #[test]
    fn rejects_non_nested_and_whole_grid() {
        let spec = ModelSpec::ChangePoint {
            rectangles: vec![Rectangle::new(1, 2, 1, 2), Rectangle::new(2, 3, 2, 3)],
        };
        assert!(spec.validate(4, 4).is_err());
        let spec = ModelSpec::ChangePoint {
            rectangles: vec![Rectangle::new(1, 3, 1, 3)],
        };
        assert!(spec.validate(3, 3).is_err());
        let spec = ModelSpec::ChangePoint {
            rectangles: vec![Rectangle::new(2, 2, 2, 2)],
        };
        assert!(spec.validate(3, 3).is_err());
    }

    #[test]
    fn rejects_overlapping_groups() {
        let spec = ModelSpec::GeneralBlockDiagonal {
            bounds: BlockBounds::uniform(3, 2),
            groups: vec![vec![1, 2], vec![2, 3]],
        };
        let err = spec.validate(6, 6).unwrap_err();
        assert!(err.iter().any(|e| e.contains("disjoint groups")), "{err:?}");
    }

    #[test]
    fn block_bound_rules() {
        let own = ModelSpec::BlockDiagonalOwn(BlockBounds::new(vec![1, 3, 4], vec![1, 3, 5]));
        assert!(own.validate(4, 4).is_err(), "rows must end at R+1");
        let own = ModelSpec::BlockDiagonalOwn(BlockBounds::new(vec![1, 3, 5], vec![1, 3, 5]));
        assert!(own.validate(4, 4).is_ok());
        let own = ModelSpec::BlockDiagonalOwn(BlockBounds::new(vec![1, 3, 3, 5], vec![1, 2, 3, 5]));
        assert!(own.validate(4, 4).is_err(), "strictly increasing");
        let general = ModelSpec::GeneralBlockDiagonal {
            bounds: BlockBounds::new(vec![1, 2, 4], vec![1, 3, 4]),
            groups: vec![vec![1], vec![2]],
        };
        assert!(general.validate(5, 5).is_ok(), "general models may leave a tail uncovered");
    }

    #[test]
    fn strata_of_gilby_cells() {
        let m = Model::new(gilby_spec(), 8, 4).unwrap();
        assert_eq!(m.cell_stratum(2, 1).unwrap(), Some(1));
        assert_eq!(m.cell_stratum(5, 2).unwrap(), Some(2));
        assert_eq!(m.cell_stratum(8, 4).unwrap(), Some(3));
        assert!(m.cell_stratum(9, 1).is_err());
    }

    #[test]
    fn blocks_of_victoria_cells() {
        let m = Model::new(ModelSpec::CommonBlockDiagonal(BlockBounds::uniform(4, 3)), 12, 12).unwrap();
        assert_eq!(m.cell_block(4, 7).unwrap(), Some(BlockIndex { k: 2, l: 3 }));
        assert_eq!(m.cell_block(1, 1).unwrap(), Some(BlockIndex { k: 1, l: 1 }));
        assert!(m.terms()[0].contains(1, 1));
        assert!(!m.terms()[0].contains(4, 7));
        assert!(m.cell_block(13, 1).is_err());
    }

    #[test]
    fn wrapped_blocks() {
        let m = Model::new(ModelSpec::BlockDiagonalOwn(crate::datasets::victoria_bounds()), 12, 12).unwrap();
        // Dec–Feb is the fourth block.
        assert_eq!(m.cell_block(1, 12).unwrap(), Some(BlockIndex { k: 4, l: 4 }));
        assert_eq!(m.cell_block(2, 3).unwrap(), Some(BlockIndex { k: 4, l: 1 }));
        assert!(m.terms()[3].contains(12, 2));
        assert!(!m.terms()[3].contains(3, 1));
        assert_eq!(m.terms().iter().map(CellSet::len).sum::<usize>(), 36);
        let bad = BlockBounds::new(vec![3, 6, 9, 12, 16], vec![3, 6, 9, 12, 16]);
        assert!(ModelSpec::BlockDiagonalOwn(bad).validate(12, 12).is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = gilby_spec();
        let back = ModelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, back);
        let common = ModelSpec::from_json(r#"{"family":"common_blocks","row_bounds":[1,3,5],"col_bounds":[1,3,5]}"#).unwrap();
        assert_eq!(common, ModelSpec::CommonBlockDiagonal(BlockBounds::uniform(2, 2)));
        assert!(ModelSpec::from_json(r#"{"family":"bogus"}"#).is_err());
        let stray = ModelSpec::from_json(r#"{"family":"change_point","rectangles":[[1,2,1,2]],"groups":[[1]]}"#);
        assert!(matches!(stray, Err(Error::Parse(m)) if m.contains("groups")));
    }

    #[test]
    fn nesting() {
        let b = BlockBounds::uniform(4, 3);
        let common = Model::new(ModelSpec::CommonBlockDiagonal(b.clone()), 12, 12).unwrap();
        let own = Model::new(ModelSpec::BlockDiagonalOwn(b), 12, 12).unwrap();
        let indep = Model::new(ModelSpec::Independence, 12, 12).unwrap();
        assert!(is_nested(&common, &own));
        assert!(!is_nested(&own, &common));
        assert!(is_nested(&indep, &common));
        assert!(is_nested(&common, &common));
    }

    #[test]
    fn incomparable_change_points() {
        // Two different single rectangles: neither statistic determines the other.
        let a = Model::new(
            ModelSpec::ChangePoint { rectangles: vec![Rectangle::new(1, 2, 1, 2)] },
            4,
            4,
        )
        .unwrap();
        let b = Model::new(
            ModelSpec::ChangePoint { rectangles: vec![Rectangle::new(1, 3, 1, 2)] },
            4,
            4,
        )
        .unwrap();
        assert!(!is_nested(&a, &b));
        assert!(!is_nested(&b, &a));
    }
}
