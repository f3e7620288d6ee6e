//! Configuration matrices and sufficient statistics.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};
use crate::table::{cell_index, Table};

/// What a configuration row sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ConstraintLabel {
    RowSum(usize),
    ColSum(usize),
    Subtable(usize),
}

impl fmt::Display for ConstraintLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintLabel::RowSum(i) => write!(f, "x_{i}+"),
            ConstraintLabel::ColSum(j) => write!(f, "x_+{j}"),
            ConstraintLabel::Subtable(q) => write!(f, "x_S{q}"),
        }
    }
}

/// The 0-1 matrix `A` with `A·vec(x) = t`.
///
/// Rows are ordered row sums, column sums, then subtable terms in the order
/// the model declares them. Columns follow the row-major cell order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    rows: usize,
    cols: usize,
    labels: Vec<ConstraintLabel>,
    /// Cell indices with a 1 in each constraint row.
    supports: Vec<Vec<usize>>,
    /// Constraint rows touching each cell.
    by_cell: Vec<Vec<usize>>,
}

/// The vector `t = (x_1+, …, x_R+, x_+1, …, x_+C, x_S1, …, x_SN)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SufficientStat(pub Vec<u64>);

impl SufficientStat {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

impl Configuration {
    pub fn new(model: &Model) -> Self {
        let (rows, cols) = (model.rows(), model.cols());
        let mut labels = Vec::new();
        let mut supports: Vec<Vec<usize>> = Vec::new();
        for i in 1..=rows {
            labels.push(ConstraintLabel::RowSum(i));
            supports.push((1..=cols).map(|j| cell_index(cols, i, j)).collect());
        }
        for j in 1..=cols {
            labels.push(ConstraintLabel::ColSum(j));
            supports.push((1..=rows).map(|i| cell_index(cols, i, j)).collect());
        }
        for (q, term) in model.terms().iter().enumerate() {
            labels.push(ConstraintLabel::Subtable(q + 1));
            supports.push(term.indices().collect());
        }
        let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); rows * cols];
        for (r, sup) in supports.iter().enumerate() {
            for &k in sup {
                by_cell[k].push(r);
            }
        }
        Configuration {
            rows,
            cols,
            labels,
            supports,
            by_cell,
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn num_cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of constraint rows T.
    pub fn num_constraints(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[ConstraintLabel] {
        &self.labels
    }

    /// Cells (linear indices) summed by constraint row `r`.
    pub fn support(&self, r: usize) -> &[usize] {
        &self.supports[r]
    }

    /// Constraint rows that include cell `k`.
    pub fn constraints_of_cell(&self, k: usize) -> &[usize] {
        &self.by_cell[k]
    }

    pub fn entry(&self, r: usize, k: usize) -> u8 {
        u8::from(self.by_cell[k].contains(&r))
    }

    /// Dense T×(R·C) 0-1 matrix.
    pub fn dense(&self) -> Vec<Vec<u8>> {
        self.supports
            .iter()
            .map(|sup| {
                let mut row = vec![0u8; self.num_cells()];
                for &k in sup {
                    row[k] = 1;
                }
                row
            })
            .collect()
    }

    pub(crate) fn dense_i64(&self) -> Vec<Vec<i64>> {
        self.dense().into_iter().map(|r| r.into_iter().map(i64::from).collect()).collect()
    }

    fn check_table(&self, table: &Table) -> Result<()> {
        if table.rows() != self.rows || table.cols() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                found: format!("{}x{}", table.rows(), table.cols()),
            });
        }
        Ok(())
    }

    pub fn sufficient_statistic(&self, table: &Table) -> Result<SufficientStat> {
        self.check_table(table)?;
        Ok(SufficientStat(self.apply(table.counts())))
    }

    /// `A·v` for a raw cell vector.
    pub(crate) fn apply(&self, v: &[u64]) -> Vec<u64> {
        self.supports.iter().map(|sup| sup.iter().map(|&k| v[k]).sum()).collect()
    }

    /// `A·v` for a signed cell vector.
    pub(crate) fn apply_signed(&self, v: &[i64]) -> Vec<i64> {
        self.supports.iter().map(|sup| sup.iter().map(|&k| v[k]).sum()).collect()
    }

    /// Exact rank over the rationals.
    pub fn rank(&self) -> usize {
        crate::linalg::rank(&self.dense_i64())
    }

    /// `R·C − rank(A)`.
    pub fn degrees_of_freedom(&self) -> usize {
        self.num_cells() - self.rank()
    }

    /// Whether the all-ones vector lies in the row space of `A`.
    pub fn contains_ones_row(&self) -> bool {
        let ones = vec![vec![1i64; self.num_cells()]];
        crate::linalg::row_space_contains(&self.dense_i64(), &ones)
    }
}

/// Validates `spec` on an R×C grid and builds its configuration.
pub fn build_configuration(spec: &ModelSpec, rows: usize, cols: usize) -> Result<Configuration> {
    let model = Model::new(spec.clone(), rows, cols)?;
    Ok(Configuration::new(&model))
}

pub fn sufficient_statistic(table: &Table, cfg: &Configuration) -> Result<SufficientStat> {
    cfg.sufficient_statistic(table)
}

pub fn config_rank(cfg: &Configuration) -> usize {
    cfg.rank()
}

pub fn degrees_of_freedom(cfg: &Configuration) -> usize {
    cfg.degrees_of_freedom()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::models::BlockBounds;
    use crate::table::Rectangle;

    #[test]
    fn independence_two_by_two() {
        let cfg = build_configuration(&ModelSpec::Independence, 2, 2).unwrap();
        assert_eq!(cfg.num_constraints(), 4);
        assert_eq!(cfg.rank(), 3);
        assert_eq!(cfg.degrees_of_freedom(), 1);
        assert_eq!(
            cfg.dense(),
            vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1], vec![1, 0, 1, 0], vec![0, 1, 0, 1]]
        );
    }

    #[test]
    fn independence_rank_is_r_plus_c_minus_one() {
        let cfg = build_configuration(&ModelSpec::Independence, 8, 4).unwrap();
        assert_eq!(cfg.rank(), 11);
    }

    #[test]
    fn gilby_configuration() {
        let cfg = build_configuration(&datasets::gilby_model(), 8, 4).unwrap();
        assert_eq!(cfg.num_constraints(), 14);
        assert_eq!(cfg.num_cells(), 32);
        assert_eq!(cfg.rank(), 13);
        assert_eq!(cfg.degrees_of_freedom(), 19);
        assert!(cfg.contains_ones_row());
        // Each column has exactly one row-sum and one column-sum entry.
        for k in 0..32 {
            let c = cfg.constraints_of_cell(k);
            assert_eq!(c.iter().filter(|&&r| r < 8).count(), 1);
            assert_eq!(c.iter().filter(|&&r| (8..12).contains(&r)).count(), 1);
        }
    }

    #[test]
    fn gilby_margins() {
        let cfg = build_configuration(&datasets::gilby_model(), 8, 4).unwrap();
        let t = cfg.sufficient_statistic(&datasets::gilby()).unwrap();
        assert_eq!(&t.0[..8], &[146, 245, 46, 272, 520, 317, 44, 135]);
        assert_eq!(&t.0[8..12], &[636, 751, 265, 73]);
        assert_eq!(t.0[12], 86 + 102 + 25);
        assert_eq!(t.0[13], 86 + 49 + 102 + 116 + 25 + 19 + 137 + 98 + 209 + 222);
    }

    #[test]
    fn victoria_configuration() {
        let common = build_configuration(&datasets::victoria_common_model(), 12, 12).unwrap();
        assert_eq!(common.num_constraints(), 25);
        assert_eq!(common.num_cells(), 144);
        assert_eq!(common.rank(), 24);
        let own = build_configuration(&datasets::victoria_own_model(), 12, 12).unwrap();
        assert_eq!(own.degrees_of_freedom() + 3, common.degrees_of_freedom());
        let t = common.sufficient_statistic(&datasets::victoria()).unwrap();
        assert_eq!(t.0[..12].iter().sum::<u64>(), 82);
    }

    #[test]
    fn zero_table_has_zero_statistic() {
        let cfg = build_configuration(
            &ModelSpec::ChangePoint { rectangles: vec![Rectangle::new(1, 2, 1, 2)] },
            3,
            3,
        )
        .unwrap();
        let t = cfg.sufficient_statistic(&Table::zeros(3, 3).unwrap()).unwrap();
        assert!(t.0.iter().all(|&v| v == 0));
        assert!(cfg.sufficient_statistic(&Table::zeros(2, 3).unwrap()).is_err());
    }

    #[test]
    fn ones_row_for_every_family() {
        let specs = [
            ModelSpec::Independence,
            datasets::gilby_model(),
            ModelSpec::BlockDiagonalOwn(BlockBounds::uniform(3, 2)),
            ModelSpec::CommonBlockDiagonal(BlockBounds::uniform(3, 2)),
            ModelSpec::GeneralBlockDiagonal {
                bounds: BlockBounds::new(vec![1, 3, 5], vec![1, 2, 4]),
                groups: vec![vec![2]],
            },
        ];
        for spec in specs {
            let (r, c) = if matches!(spec, ModelSpec::ChangePoint { .. }) { (8, 4) } else { (6, 6) };
            let cfg = build_configuration(&spec, r, c).unwrap();
            assert!(cfg.contains_ones_row(), "{spec:?}");
        }
    }
}
