//! Embedded example datasets and their model specs.

use crate::models::{BlockBounds, ModelSpec};
use crate::table::{Rectangle, Table};

/// School (rows, ascending wealth) by clothing neatness (columns I, II, III,
/// IV & V) for 1725 children, Gilby (1911).
pub const GILBY: [[u64; 4]; 8] = [
    [86, 49, 10, 1],
    [102, 116, 24, 3],
    [25, 19, 2, 0],
    [137, 98, 33, 4],
    [209, 222, 73, 16],
    [65, 154, 71, 27],
    [9, 33, 1, 1],
    [3, 60, 51, 21],
];

/// Birth month (rows) by death month (columns), January to December, for
/// 82 descendants of Queen Victoria.
pub const VICTORIA: [[u64; 12]; 12] = [
    [1, 0, 0, 0, 1, 2, 0, 0, 1, 0, 1, 0],
    [1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 2],
    [1, 0, 0, 0, 2, 1, 0, 0, 0, 0, 0, 1],
    [3, 0, 2, 0, 0, 0, 1, 0, 1, 3, 1, 1],
    [2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0],
    [2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
    [2, 0, 2, 1, 0, 0, 0, 0, 1, 1, 1, 2],
    [0, 0, 0, 3, 0, 0, 1, 0, 0, 1, 0, 2],
    [0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 1, 0],
    [1, 1, 0, 2, 0, 0, 1, 0, 0, 1, 1, 0],
    [0, 1, 1, 1, 2, 0, 0, 2, 0, 1, 1, 0],
    [0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0],
];

pub fn gilby() -> Table {
    Table::from_rows(&GILBY).expect("embedded table is valid")
}

pub fn victoria() -> Table {
    Table::from_rows(&VICTORIA).expect("embedded table is valid")
}

/// Change point model with `S_1` = rows 1–3 × column 1 and `S_2` = rows 1–5 ×
/// columns 1–2.
pub fn gilby_model() -> ModelSpec {
    ModelSpec::ChangePoint {
        rectangles: vec![Rectangle::new(1, 3, 1, 1), Rectangle::new(1, 5, 1, 2)],
    }
}

/// Four 3×3 diagonal blocks on the 12×12 grid, one per season: Mar–May,
/// Jun–Aug, Sep–Nov and Dec–Feb, the last wrapping around the year end.
pub fn victoria_bounds() -> BlockBounds {
    let b = vec![3, 6, 9, 12, 15];
    BlockBounds::new(b.clone(), b)
}

pub fn victoria_common_model() -> ModelSpec {
    ModelSpec::CommonBlockDiagonal(victoria_bounds())
}

pub fn victoria_own_model() -> ModelSpec {
    ModelSpec::BlockDiagonalOwn(victoria_bounds())
}

/// A named dataset as exposed by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dataset {
    Gilby,
    Victoria,
}

impl Dataset {
    pub const ALL: [Dataset; 2] = [Dataset::Gilby, Dataset::Victoria];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Gilby => "gilby",
            Dataset::Victoria => "victoria",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Dataset::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn table(self) -> Table {
        match self {
            Dataset::Gilby => gilby(),
            Dataset::Victoria => victoria(),
        }
    }

    /// The named model specs shipped with this dataset.
    pub fn models(self) -> Vec<(&'static str, ModelSpec)> {
        match self {
            Dataset::Gilby => vec![("changepoint-gilby", gilby_model())],
            Dataset::Victoria => vec![
                ("common-blocks", victoria_common_model()),
                ("own-blocks", victoria_own_model()),
            ],
        }
    }
}

/// Looks up a built-in model spec by name.
pub fn named_model(name: &str) -> Option<ModelSpec> {
    if name == "independence" {
        return Some(ModelSpec::Independence);
    }
    Dataset::ALL
        .into_iter()
        .flat_map(Dataset::models)
        .find(|(n, _)| *n == name)
        .map(|(_, m)| m)
}
