//! Brute-force ground truth on small grids: fiber enumeration, fiber-graph
//! connectivity, indispensability and exact conditional p-values.

use std::collections::{HashMap, HashSet};

use petgraph::unionfind::UnionFind;

use crate::configuration::{Configuration, SufficientStat};
use crate::error::{Error, Result};
use crate::logfact::LogFactorial;
use crate::moves::{enumerate_moves, BasisSource, Move, MoveBasis};
use crate::table::Table;

/// Default largest fiber the enumerator will materialize.
pub const DEFAULT_FIBER_CAP: usize = 5_000_000;

/// Tolerance when comparing a statistic against the observed value.
pub const STAT_TOLERANCE: f64 = 1e-12;

/// Every table sharing one sufficient statistic.
#[derive(Clone, Debug)]
pub struct Fiber {
    rows: usize,
    cols: usize,
    t: SufficientStat,
    members: Vec<Table>,
    /// `−Σ ln x_ij!` for each member.
    log_weights: Vec<f64>,
}

impl Fiber {
    pub fn statistic(&self) -> &SufficientStat {
        &self.t
    }

    pub fn members(&self) -> &[Table] {
        &self.members
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Member probabilities under the conditional law `∝ 1/Π x_ij!`.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    pub fn position(&self, x: &Table) -> Option<usize> {
        self.members.iter().position(|m| m == x)
    }
}

/// Enumerates `{x ≥ 0 : A x = t}` by depth-first assignment in row-major cell
/// order, pruning on the remaining capacity of every constraint.
pub fn enumerate_fiber(t: &SufficientStat, cfg: &Configuration, cap: usize) -> Result<Fiber> {
    let (rows, cols) = cfg.grid();
    if t.0.len() != cfg.num_constraints() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} statistic entries", cfg.num_constraints()),
            found: format!("{}", t.0.len()),
        });
    }
    let row_total: u64 = t.0[..rows].iter().sum();
    let col_total: u64 = t.0[rows..rows + cols].iter().sum();
    let mut fiber = Fiber {
        rows,
        cols,
        t: t.clone(),
        members: Vec::new(),
        log_weights: Vec::new(),
    };
    if row_total != col_total {
        return Ok(fiber);
    }
    let ncells = cfg.num_cells();
    // For each cell, the constraints whose support ends at that cell.
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); ncells];
    for r in 0..cfg.num_constraints() {
        if let Some(&last) = cfg.support(r).iter().max() {
            closes[last].push(r);
        } else if t.0[r] != 0 {
            return Ok(fiber);
        }
    }
    let lf = LogFactorial::new(row_total);
    let mut state = DfsState {
        cfg,
        closes: &closes,
        remaining: t.0.clone(),
        counts: vec![0; ncells],
        cap,
        lf: &lf,
    };
    state.descend(0, &mut fiber)?;
    Ok(fiber)
}

struct DfsState<'a> {
    cfg: &'a Configuration,
    closes: &'a [Vec<usize>],
    remaining: Vec<u64>,
    counts: Vec<u64>,
    cap: usize,
    lf: &'a LogFactorial,
}

impl DfsState<'_> {
    fn descend(&mut self, k: usize, fiber: &mut Fiber) -> Result<()> {
        if k == self.counts.len() {
            if fiber.members.len() >= self.cap {
                return Err(Error::FiberOverflow { cap: self.cap });
            }
            let table = Table::new(fiber.rows, fiber.cols, self.counts.clone())?;
            fiber.log_weights.push(self.lf.log_weight(&self.counts));
            fiber.members.push(table);
            return Ok(());
        }
        let cons = self.cfg.constraints_of_cell(k);
        let hi = cons.iter().map(|&r| self.remaining[r]).min().unwrap_or(0);
        let mut lo = 0;
        let mut forced: Option<u64> = None;
        for &r in &self.closes[k] {
            let need = self.remaining[r];
            match forced {
                Some(f) if f != need => return Ok(()),
                _ => forced = Some(need),
            }
        }
        let mut top = hi;
        if let Some(f) = forced {
            if f > hi {
                return Ok(());
            }
            lo = f;
            top = f;
        }
        for v in lo..=top {
            for &r in cons {
                self.remaining[r] -= v;
            }
            self.counts[k] = v;
            let res = self.descend(k + 1, fiber);
            for &r in cons {
                self.remaining[r] += v;
            }
            self.counts[k] = 0;
            res?;
        }
        Ok(())
    }
}

/// The fiber containing `table`.
pub fn fiber_of(table: &Table, cfg: &Configuration, cap: usize) -> Result<Fiber> {
    let t = cfg.sufficient_statistic(table)?;
    enumerate_fiber(&t, cfg, cap)
}

/// Signed moves indexed by their smallest negative cell, so that only moves
/// with a chance of staying nonnegative are tried at each table.
struct MoveIndex {
    by_anchor: Vec<Vec<Move>>,
}

impl MoveIndex {
    fn new(ncells: usize, moves: &[Move]) -> Self {
        let mut by_anchor = vec![Vec::new(); ncells];
        for z in moves.iter().flat_map(|z| [z.clone(), z.negated()]) {
            let anchor = z.entries().find(|&(_, c)| c < 0).map(|(k, _)| k);
            if let Some(k) = anchor {
                by_anchor[k].push(z);
            }
        }
        MoveIndex { by_anchor }
    }

    /// Neighbours `x + z` with `z⁻ ≤ x`.
    fn neighbours<'a>(&'a self, x: &'a [u64]) -> impl Iterator<Item = Vec<u64>> + 'a {
        x.iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .flat_map(move |(k, _)| self.by_anchor[k].iter())
            .filter(move |z| z.entries().all(|(k, c)| c >= 0 || x[k] as i64 + c >= 0))
            .map(move |z| {
                let mut y = x.to_vec();
                for (k, c) in z.entries() {
                    y[k] = (y[k] as i64 + c) as u64;
                }
                y
            })
    }
}

fn basis_moves(basis: &MoveBasis) -> Vec<Move> {
    match basis.source() {
        BasisSource::Enumerated(m) => m.clone(),
        BasisSource::Lazy(_) => enumerate_moves(basis.model(), basis.configuration(), basis.kinds()),
    }
}

/// Whether the fiber graph with edges `x ↔ x ± z` is connected.
pub fn is_connected(fiber: &Fiber, basis: &MoveBasis) -> bool {
    is_connected_with(fiber, &basis_moves(basis))
}

/// [`is_connected`] for an explicit move list (one orientation each).
pub fn is_connected_with(fiber: &Fiber, moves: &[Move]) -> bool {
    components(fiber, moves).len() <= 1
}

/// Connected components of the fiber graph as lists of member indices.
pub fn components(fiber: &Fiber, moves: &[Move]) -> Vec<Vec<usize>> {
    let n = fiber.len();
    let index: HashMap<&[u64], usize> = fiber.members.iter().enumerate().map(|(i, m)| (m.counts(), i)).collect();
    let moves = MoveIndex::new(fiber.rows * fiber.cols, moves);
    let mut uf = UnionFind::<usize>::new(n);
    for (i, m) in fiber.members.iter().enumerate() {
        for y in moves.neighbours(m.counts()) {
            if let Some(&j) = index.get(y.as_slice()) {
                uf.union(i, j);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Whether `{z⁺, z⁻}` is an entire fiber.
pub fn indispensable(z: &Move, cfg: &Configuration) -> bool {
    let plus = z.positive_part();
    match fiber_of(&plus, cfg, 3) {
        Ok(f) => f.len() == 2 && f.position(&z.negative_part()).is_some(),
        Err(_) => false,
    }
}

/// Exact conditional p-value: the weight of fiber members whose statistic is
/// at least the observed one, over the total weight.
pub fn exact_pvalue<F>(table: &Table, cfg: &Configuration, statistic: F, cap: usize) -> Result<f64>
where
    F: FnMut(&Table) -> f64,
{
    let fiber = fiber_of(table, cfg, cap)?;
    Ok(exact_pvalue_in(&fiber, table, statistic))
}

/// [`exact_pvalue`] over an already enumerated fiber.
pub fn exact_pvalue_in<F>(fiber: &Fiber, table: &Table, mut statistic: F) -> f64
where
    F: FnMut(&Table) -> f64,
{
    let observed = statistic(table);
    let probs = fiber.probabilities();
    fiber
        .members
        .iter()
        .zip(&probs)
        .filter(|(m, _)| statistic(m) >= observed - STAT_TOLERANCE)
        .map(|(_, p)| p)
        .sum::<f64>()
        .min(1.0)
}

/// All tables on `ncells` cells with the given total, in lexicographic order.
pub fn tables_with_total(ncells: usize, total: u64) -> Vec<Vec<u8>> {
    fn rec(k: usize, left: u64, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if k + 1 == cur.len() {
            cur[k] = left as u8;
            out.push(cur.clone());
            cur[k] = 0;
            return;
        }
        for v in (0..=left).rev() {
            cur[k] = v as u8;
            rec(k + 1, left - v, cur, out);
        }
        cur[k] = 0;
    }
    assert!(total <= u64::from(u8::MAX), "compact tables hold counts up to 255");
    let mut out = Vec::new();
    if ncells == 0 {
        return out;
    }
    rec(0, total, &mut vec![0; ncells], &mut out);
    out
}

/// A disconnected fiber found by [`scan_fibers`].
#[derive(Clone, Debug)]
pub struct DisconnectionWitness {
    pub fiber_size: usize,
    pub components: usize,
    /// Two members in different components.
    pub a: Table,
    pub b: Table,
}

/// Outcome of checking every fiber with small totals.
#[derive(Clone, Debug, Default)]
pub struct FiberScan {
    pub tables: usize,
    pub fibers: usize,
    pub disconnected: usize,
    /// The smallest disconnected fibers found, smallest first.
    pub witnesses: Vec<DisconnectionWitness>,
}

impl FiberScan {
    pub fn all_connected(&self) -> bool {
        self.disconnected == 0
    }
}

/// Checks connectivity of every fiber whose tables have total `1..=max_total`
/// by running union-find over all tables of each total at once: edges never
/// leave a fiber, so every fiber is connected iff the number of components
/// equals the number of distinct sufficient statistics.
pub fn scan_fibers(cfg: &Configuration, moves: &[Move], max_total: u64, keep_witnesses: usize) -> FiberScan {
    let (rows, cols) = cfg.grid();
    let ncells = rows * cols;
    let index = MoveIndex::new(ncells, moves);
    let mut scan = FiberScan::default();
    for total in 1..=max_total {
        let tables = tables_with_total(ncells, total);
        let lookup: HashMap<&[u8], usize> = tables.iter().enumerate().map(|(i, t)| (t.as_slice(), i)).collect();
        let mut uf = UnionFind::<usize>::new(tables.len());
        let mut wide = vec![0u64; ncells];
        for (i, t) in tables.iter().enumerate() {
            for (w, &v) in wide.iter_mut().zip(t) {
                *w = u64::from(v);
            }
            for y in index.neighbours(&wide) {
                let y8: Vec<u8> = y.iter().map(|&v| v as u8).collect();
                let j = lookup[y8.as_slice()];
                uf.union(i, j);
            }
        }
        let mut by_stat: HashMap<Vec<u64>, (usize, HashSet<usize>, Vec<usize>)> = HashMap::new();
        for (i, t) in tables.iter().enumerate() {
            let v: Vec<u64> = t.iter().map(|&x| u64::from(x)).collect();
            let entry = by_stat.entry(cfg.apply(&v)).or_default();
            entry.0 += 1;
            let root = uf.find(i);
            if entry.1.insert(root) {
                entry.2.push(i);
            }
        }
        scan.tables += tables.len();
        scan.fibers += by_stat.len();
        for (size, roots, reps) in by_stat.values() {
            if roots.len() > 1 {
                scan.disconnected += 1;
                let to_table = |i: usize| {
                    Table::new(rows, cols, tables[i].iter().map(|&x| u64::from(x)).collect()).expect("valid grid")
                };
                scan.witnesses.push(DisconnectionWitness {
                    fiber_size: *size,
                    components: roots.len(),
                    a: to_table(reps[0]),
                    b: to_table(reps[1]),
                });
            }
        }
    }
    scan.witnesses.sort_by_key(|w| (w.fiber_size, w.a.total()));
    scan.witnesses.truncate(keep_witnesses);
    scan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::build_configuration;
    use crate::models::{Model, ModelSpec};
    use crate::moves::{basis_change_point, MoveType};
    use crate::table::Rectangle;

    fn indep(r: usize, c: usize) -> Configuration {
        build_configuration(&ModelSpec::Independence, r, c).unwrap()
    }

    #[test]
    fn two_by_two_unit_margins() {
        let cfg = indep(2, 2);
        let f = enumerate_fiber(&SufficientStat(vec![1, 1, 1, 1]), &cfg, 100).unwrap();
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn permutation_matrices() {
        let cfg = indep(3, 3);
        let f = enumerate_fiber(&SufficientStat(vec![1; 6]), &cfg, 100).unwrap();
        assert_eq!(f.len(), 6);
        let p = f.probabilities();
        assert!(p.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-12));
    }

    #[test]
    fn cap_overflow_is_reported() {
        let cfg = indep(3, 3);
        let err = enumerate_fiber(&SufficientStat(vec![1; 6]), &cfg, 5).unwrap_err();
        assert!(matches!(err, Error::FiberOverflow { cap: 5 }));
    }

    #[test]
    fn inconsistent_margins_give_empty_fiber() {
        let cfg = indep(2, 2);
        let f = enumerate_fiber(&SufficientStat(vec![1, 1, 1, 0]), &cfg, 100).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn singleton_fiber_is_connected_and_has_p_one() {
        let cfg = indep(2, 2);
        let x = Table::from_rows(&[[2u64, 0], [0, 0]]).unwrap();
        let f = fiber_of(&x, &cfg, 10).unwrap();
        assert_eq!(f.len(), 1);
        assert!(is_connected_with(&f, &[]));
        let p = exact_pvalue(&x, &cfg, |t| t.get(1, 1) as f64, 10).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_member_fiber_ties() {
        let cfg = indep(2, 2);
        let x = Table::from_rows(&[[1u64, 0], [0, 1]]).unwrap();
        let stat = |t: &Table| (t.get(1, 1) as f64 - 0.5).powi(2);
        let p = exact_pvalue(&x, &cfg, stat, 10).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn indispensability() {
        let m = Model::new(ModelSpec::Independence, 3, 3).unwrap();
        let cfg = Configuration::new(&m);
        let b = basis_change_point(&m);
        for z in b.moves().unwrap() {
            assert!(indispensable(z, &cfg), "{z}");
        }
        // Sum of two disjoint-support basic moves on a 4×4 grid.
        let m4 = Model::new(ModelSpec::Independence, 4, 4).unwrap();
        let cfg4 = Configuration::new(&m4);
        let z = Move::from_cells(
            4,
            4,
            MoveType::I,
            &[((1, 1), 1), ((1, 2), -1), ((2, 1), -1), ((2, 2), 1), ((3, 3), 1), ((3, 4), -1), ((4, 3), -1), ((4, 4), 1)],
        );
        assert!(!indispensable(&z, &cfg4));
    }

    #[test]
    fn dfs_matches_filtering_all_tables() {
        let spec = ModelSpec::ChangePoint { rectangles: vec![Rectangle::new(1, 2, 1, 2)] };
        let cfg = build_configuration(&spec, 3, 3).unwrap();
        for total in 0..=5u64 {
            let mut by_t: HashMap<Vec<u64>, usize> = HashMap::new();
            for t in tables_with_total(9, total) {
                let v: Vec<u64> = t.iter().map(|&x| u64::from(x)).collect();
                *by_t.entry(cfg.apply(&v)).or_default() += 1;
            }
            for (t, n) in by_t {
                let f = enumerate_fiber(&SufficientStat(t), &cfg, 1_000_000).unwrap();
                assert_eq!(f.len(), n);
            }
        }
    }

    #[test]
    fn table_counts() {
        // C(n + k - 1, k - 1)
        assert_eq!(tables_with_total(4, 3).len(), 20);
        assert_eq!(tables_with_total(9, 2).len(), 45);
    }
}
