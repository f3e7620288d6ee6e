//! Sweeps of small model instances through the brute-force oracles.

use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::models::{BlockBounds, Model, ModelFile, ModelSpec};
use crate::moves::{enumerate_moves, MoveType};
use crate::oracle::{indispensable, scan_fibers};
use crate::table::{Rectangle, Table};

/// Every change point model on an `rows × cols` grid with between one and
/// `max_rects` nested rectangles.
pub fn change_point_models(rows: usize, cols: usize, max_rects: usize) -> Vec<ModelSpec> {
    let mut rects = Vec::new();
    for a1 in 1..=rows {
        for a2 in a1..=rows {
            for b1 in 1..=cols {
                for b2 in b1..=cols {
                    let r = Rectangle::new(a1, a2, b1, b2);
                    if r.num_cells() >= 2 && r.num_cells() < rows * cols {
                        rects.push(r);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut chain = Vec::new();
    extend_chains(&rects, max_rects, &mut chain, &mut out);
    out.retain(|s| s.validate(rows, cols).is_ok());
    out
}

fn extend_chains(rects: &[Rectangle], max: usize, chain: &mut Vec<Rectangle>, out: &mut Vec<ModelSpec>) {
    if !chain.is_empty() {
        out.push(ModelSpec::ChangePoint { rectangles: chain.clone() });
    }
    if chain.len() == max {
        return;
    }
    for r in rects {
        if chain.last().is_none_or(|last| last.is_within(r) && last != r) {
            chain.push(*r);
            extend_chains(rects, max, chain, out);
            chain.pop();
        }
    }
}

/// All bounds starting at 1 that cut `rows` and `cols` into `n` nonempty
/// diagonal blocks each.
pub fn block_bounds(rows: usize, cols: usize, n: usize) -> Vec<BlockBounds> {
    let rs = compositions(rows, n);
    let cs = compositions(cols, n);
    rs.iter()
        .flat_map(|r| cs.iter().map(move |c| BlockBounds::new(r.clone(), c.clone())))
        .collect()
}

/// Cut points `1 = b_1 < … < b_{n+1} = extent + 1`.
fn compositions(extent: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(next: usize, left: usize, end: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            if next == end {
                out.push(cur.clone());
            }
            return;
        }
        for b in next + 1..=end - (left - 1) {
            cur.push(b);
            rec(b, left - 1, end, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 || n > extent {
        return out;
    }
    rec(1, n, extent + 1, &mut vec![1], &mut out);
    out
}

/// What to check on each instance.
#[derive(Clone, Debug)]
pub struct InstanceCheck {
    pub kinds: Vec<MoveType>,
    pub max_total: u64,
    pub indispensability: bool,
    pub keep_witnesses: usize,
}

impl InstanceCheck {
    pub fn new(kinds: &[MoveType], max_total: u64) -> Self {
        InstanceCheck {
            kinds: kinds.to_vec(),
            max_total,
            indispensability: false,
            keep_witnesses: 1,
        }
    }

    pub fn with_indispensability(mut self) -> Self {
        self.indispensability = true;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub fiber_size: usize,
    pub components: usize,
    pub a: Vec<Vec<u64>>,
    pub b: Vec<Vec<u64>>,
}

fn nested(t: &Table) -> Vec<Vec<u64>> {
    t.iter_rows().map(<[u64]>::to_vec).collect()
}

/// Connectivity (and optionally indispensability) results for one model.
#[derive(Clone, Debug, Serialize)]
pub struct InstanceReport {
    pub rows: usize,
    pub cols: usize,
    pub model: ModelFile,
    pub types: Vec<&'static str>,
    pub moves: usize,
    pub max_total: u64,
    pub tables: usize,
    pub fibers: usize,
    pub disconnected: usize,
    pub witnesses: Vec<Witness>,
    pub indispensable_checked: usize,
    /// Moves whose positive part has a fiber larger than two.
    pub dispensable: Vec<String>,
}

impl InstanceReport {
    pub fn connected(&self) -> bool {
        self.disconnected == 0
    }

    pub fn passed(&self) -> bool {
        self.connected() && self.dispensable.is_empty()
    }
}

pub fn check_instance(model: &Model, check: &InstanceCheck) -> InstanceReport {
    let cfg = Configuration::new(model);
    let moves = enumerate_moves(model, &cfg, &check.kinds);
    let scan = scan_fibers(&cfg, &moves, check.max_total, check.keep_witnesses);
    let dispensable = if check.indispensability {
        moves.iter().filter(|z| !indispensable(z, &cfg)).map(|z| z.to_string()).collect()
    } else {
        Vec::new()
    };
    InstanceReport {
        rows: model.rows(),
        cols: model.cols(),
        model: ModelFile::from(model.spec()),
        types: check.kinds.iter().map(|k| k.as_str()).collect(),
        moves: moves.len(),
        max_total: check.max_total,
        tables: scan.tables,
        fibers: scan.fibers,
        disconnected: scan.disconnected,
        witnesses: scan
            .witnesses
            .iter()
            .map(|w| Witness {
                fiber_size: w.fiber_size,
                components: w.components,
                a: nested(&w.a),
                b: nested(&w.b),
            })
            .collect(),
        indispensable_checked: if check.indispensability { moves.len() } else { 0 },
        dispensable,
    }
}

/// Aggregate over many instances.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub instances: usize,
    pub fibers: usize,
    pub disconnected_instances: usize,
    pub dispensable_moves: usize,
    /// Reports of instances that failed, or all of them when requested.
    pub reports: Vec<InstanceReport>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.disconnected_instances == 0 && self.dispensable_moves == 0
    }

    /// The first disconnection witness found, if any.
    pub fn first_witness(&self) -> Option<(&InstanceReport, &Witness)> {
        self.reports.iter().find_map(|r| r.witnesses.first().map(|w| (r, w)))
    }
}

/// Runs `check` on every `(spec, rows, cols)` instance in parallel.
pub fn sweep(instances: &[(ModelSpec, usize, usize)], check: &InstanceCheck, keep_all: bool) -> crate::Result<SweepReport> {
    let reports: Vec<InstanceReport> = instances
        .par_iter()
        .map(|(spec, r, c)| Model::new(spec.clone(), *r, *c).map(|m| check_instance(&m, check)))
        .collect::<crate::Result<_>>()?;
    Ok(SweepReport {
        instances: reports.len(),
        fibers: reports.iter().map(|r| r.fibers).sum(),
        disconnected_instances: reports.iter().filter(|r| !r.connected()).count(),
        dispensable_moves: reports.iter().map(|r| r.dispensable.len()).sum(),
        reports: reports.into_iter().filter(|r| keep_all || !r.passed()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(6, 3).len(), 10);
        assert_eq!(compositions(4, 2), vec![vec![1, 2, 5], vec![1, 3, 5], vec![1, 4, 5]]);
        assert!(compositions(2, 3).is_empty());
        assert_eq!(block_bounds(4, 5, 2).len(), 3 * 4);
    }

    #[test]
    fn change_point_enumeration() {
        // On 2×2 the only strips are the four 1×2/2×1 lines.
        assert_eq!(change_point_models(2, 2, 2).len(), 4);
        let all = change_point_models(3, 3, 2);
        assert!(all.iter().all(|s| s.validate(3, 3).is_ok()));
        assert!(all.iter().any(|s| matches!(s, ModelSpec::ChangePoint { rectangles } if rectangles.len() == 2)));
    }

    #[test]
    fn small_change_point_instance() {
        let m = Model::new(
            ModelSpec::ChangePoint { rectangles: vec![Rectangle::new(1, 2, 1, 2)] },
            3,
            3,
        )
        .unwrap();
        let r = check_instance(&m, &InstanceCheck::new(&[MoveType::I], 4).with_indispensability());
        assert!(r.passed());
        assert_eq!(r.indispensable_checked, r.moves);
    }
}
