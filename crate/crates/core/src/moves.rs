//! Moves and Markov bases for the subtable-effect models.
//!
//! Change point, independence and own-parameter models with two blocks use
//! the degree-2 basic moves in the kernel of the configuration. Block models
//! add the degree-3 loops of Types II and III and the degree-4 moves of
//! Type IV (and their transposes):
//!
//! ```text
//!   Type II         Type III        Type IV
//!    0 +1 -1        +1  0 -1        +1  0 -1  0
//!   -1  0 +1         0 -1 +1         0 +1  0 -1
//!   +1 -1  0        -1 +1  0         0 -1 +1  0
//!                                   -1  0  0 +1
//! ```
//!
//! Type II: all six nonzero cells lie in pairwise distinct off-diagonal
//! blocks. Type III: `(i1,j1)` and `(i2,j2)` lie in distinct diagonal
//! blocks, the other four in pairwise distinct off-diagonal blocks.
//! Type IV: `(i1,j1)` and `(i3,j2)` lie in distinct diagonal blocks, rows
//! `i1,i2` share a row block, rows `i3,i4` share a row block, and the other
//! six nonzero cells are off the diagonal blocks (blocks may repeat, and
//! indices may coincide as long as nothing cancels). Every generated move is
//! additionally required to lie in the kernel of the configuration.
//!
//! A basis stores one representative per `±z` pair; the sampler flips the
//! sign with probability 1/2, which makes every proposal sign-invariant.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::configuration::Configuration;
use crate::models::{Model, ModelSpec};
use crate::table::{cell_index, index_cell, Table};

/// Default largest grid (in cells) whose basis is enumerated eagerly.
pub const DEFAULT_ENUMERATION_THRESHOLD: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveType {
    I,
    II,
    III,
    IV,
    /// Transpose of a Type IV move.
    IVT,
}

impl MoveType {
    pub const ALL: [MoveType; 5] = [MoveType::I, MoveType::II, MoveType::III, MoveType::IV, MoveType::IVT];

    pub fn degree(self) -> u32 {
        match self {
            MoveType::I => 2,
            MoveType::II | MoveType::III => 3,
            MoveType::IV | MoveType::IVT => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MoveType::I => "I",
            MoveType::II => "II",
            MoveType::III => "III",
            MoveType::IV => "IV",
            MoveType::IVT => "IVT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MoveType::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for MoveType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sparse integer table `z` with `A z = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    rows: usize,
    cols: usize,
    kind: MoveType,
    /// `(cell index, coefficient)`, sorted by cell, no zeros.
    entries: Vec<(u32, i32)>,
}

impl Move {
    /// Builds a move from `((i, j), coefficient)` pairs, summing repeated
    /// cells and dropping zeros.
    pub fn from_cells(rows: usize, cols: usize, kind: MoveType, cells: &[((usize, usize), i32)]) -> Self {
        let mut entries: Vec<(u32, i32)> = Vec::with_capacity(cells.len());
        for &((i, j), c) in cells {
            let k = cell_index(cols, i, j) as u32;
            match entries.iter_mut().find(|e| e.0 == k) {
                Some(e) => e.1 += c,
                None => entries.push((k, c)),
            }
        }
        entries.retain(|e| e.1 != 0);
        entries.sort_unstable();
        Move { rows, cols, kind, entries }
    }

    /// Builds a move from a dense row-major vector.
    pub fn from_dense(rows: usize, cols: usize, kind: MoveType, z: &[i64]) -> Self {
        let entries = z
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(k, &v)| (k as u32, v as i32))
            .collect();
        Move { rows, cols, kind, entries }
    }

    pub fn kind(&self) -> MoveType {
        self.kind
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `(cell index, coefficient)` pairs in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.entries.iter().map(|&(k, c)| (k as usize, i64::from(c)))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// `Σ|z_ij| / 2`.
    pub fn degree(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.1.unsigned_abs())).sum::<u64>() / 2
    }

    pub fn dense(&self) -> Vec<i64> {
        let mut z = vec![0; self.rows * self.cols];
        for (k, c) in self.entries() {
            z[k] = c;
        }
        z
    }

    pub fn negated(&self) -> Move {
        Move {
            entries: self.entries.iter().map(|&(k, c)| (k, -c)).collect(),
            ..self.clone()
        }
    }

    /// Orientation with a positive coefficient on the first nonzero cell.
    pub fn canonical(self) -> Move {
        match self.entries.first() {
            Some(&(_, c)) if c < 0 => self.negated(),
            _ => self,
        }
    }

    /// `z⁺` as a table.
    pub fn positive_part(&self) -> Table {
        self.part(1)
    }

    /// `z⁻` as a table.
    pub fn negative_part(&self) -> Table {
        self.part(-1)
    }

    fn part(&self, sign: i32) -> Table {
        let mut counts = vec![0u64; self.rows * self.cols];
        for &(k, c) in &self.entries {
            if c * sign > 0 {
                counts[k as usize] = u64::from(c.unsigned_abs());
            }
        }
        Table::new(self.rows, self.cols, counts).expect("move grid is valid")
    }

    pub fn is_square_free(&self) -> bool {
        self.entries.iter().all(|e| e.1.abs() == 1)
    }

    /// `x + sign·z` if it stays nonnegative.
    pub fn apply(&self, x: &Table, sign: i64) -> Option<Table> {
        let mut y = x.clone();
        for (k, c) in self.entries() {
            let v = y.counts()[k] as i64 + sign * c;
            if v < 0 {
                return None;
            }
            y.counts_mut()[k] = v as u64;
        }
        Some(y)
    }

    pub fn transposed(&self, kind: MoveType) -> Move {
        let cells: Vec<((usize, usize), i32)> = self
            .entries
            .iter()
            .map(|&(k, c)| {
                let (i, j) = index_cell(self.cols, k as usize);
                ((j, i), c)
            })
            .collect();
        Move::from_cells(self.cols, self.rows, kind, &cells)
    }
}

impl fmt::Display for Move {
    /// `deg type  i,j:+1 i,j:-1 …`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.degree(), self.kind)?;
        for &(k, c) in &self.entries {
            let (i, j) = index_cell(self.cols, k as usize);
            write!(f, " {i},{j}:{c:+}")?;
        }
        Ok(())
    }
}

/// Exact check of `A z = 0`.
pub fn is_kernel_move(cfg: &Configuration, z: &Move) -> bool {
    if cfg.grid() != z.grid() {
        return false;
    }
    cfg.apply_signed(&z.dense()).iter().all(|&v| v == 0)
}

/// Block layout used by the Type II–IV side conditions. Rows and columns
/// past the last boundary form one extra tail block.
#[derive(Clone, Debug)]
struct BlockGeometry {
    rows: usize,
    cols: usize,
    /// Indexed by 1-based row.
    row_block: Vec<usize>,
    col_block: Vec<usize>,
    /// Cells carrying an interaction term (the "diagonal" region S).
    in_s: Vec<bool>,
}

impl BlockGeometry {
    fn from_model(model: &Model) -> Option<Self> {
        let bounds = model.spec().bounds()?;
        let n = bounds.num_blocks();
        let row_block = (0..=model.rows())
            .map(|i| bounds.row_block(i, model.rows()).map_or(n + 1, |k| k))
            .collect();
        let col_block = (0..=model.cols())
            .map(|j| bounds.col_block(j, model.cols()).map_or(n + 1, |l| l))
            .collect();
        let mut in_s = vec![false; model.rows() * model.cols()];
        for term in model.terms() {
            for k in term.indices() {
                in_s[k] = true;
            }
        }
        Some(BlockGeometry {
            rows: model.rows(),
            cols: model.cols(),
            row_block,
            col_block,
            in_s,
        })
    }

    fn transposed(&self) -> Self {
        let mut in_s = vec![false; self.in_s.len()];
        for i in 1..=self.rows {
            for j in 1..=self.cols {
                in_s[cell_index(self.rows, j, i)] = self.in_s[cell_index(self.cols, i, j)];
            }
        }
        BlockGeometry {
            rows: self.cols,
            cols: self.rows,
            row_block: self.col_block.clone(),
            col_block: self.row_block.clone(),
            in_s,
        }
    }

    #[inline]
    fn block(&self, c: (usize, usize)) -> (usize, usize) {
        (self.row_block[c.0], self.col_block[c.1])
    }

    #[inline]
    fn in_s(&self, c: (usize, usize)) -> bool {
        self.in_s[cell_index(self.cols, c.0, c.1)]
    }

    fn s_cells(&self) -> Vec<(usize, usize)> {
        (1..=self.rows)
            .flat_map(|i| (1..=self.cols).map(move |j| (i, j)))
            .filter(|&c| self.in_s(c))
            .collect()
    }

    fn rows_in_block(&self, b: usize) -> Vec<usize> {
        (1..=self.rows).filter(|&i| self.row_block[i] == b).collect()
    }

    fn off_diagonal_distinct(&self, cells: &[(usize, usize)]) -> bool {
        if cells.iter().any(|&c| self.in_s(c)) {
            return false;
        }
        let blocks: Vec<_> = cells.iter().map(|&c| self.block(c)).collect();
        all_distinct(&blocks)
    }

    /// Type II side conditions; `r` and `c` are distinct index triples.
    fn type_ii(&self, r: [usize; 3], c: [usize; 3]) -> Option<Vec<((usize, usize), i32)>> {
        let cells = type_ii_cells(r, c);
        let positions: Vec<_> = cells.iter().map(|e| e.0).collect();
        self.off_diagonal_distinct(&positions).then_some(cells)
    }

    fn type_iii(&self, r: [usize; 3], c: [usize; 3]) -> Option<Vec<((usize, usize), i32)>> {
        let cells = type_iii_cells(r, c);
        let (a, b) = ((r[0], c[0]), (r[1], c[1]));
        if !(self.in_s(a) && self.in_s(b)) || self.block(a) == self.block(b) {
            return None;
        }
        let rest: Vec<_> = cells.iter().map(|e| e.0).filter(|&p| p != a && p != b).collect();
        self.off_diagonal_distinct(&rest).then_some(cells)
    }

    fn type_iv(&self, r: [usize; 4], c: [usize; 4]) -> Option<Vec<((usize, usize), i32)>> {
        let (a, b) = ((r[0], c[0]), (r[2], c[1]));
        if !(self.in_s(a) && self.in_s(b)) || self.block(a) == self.block(b) {
            return None;
        }
        if self.row_block[r[0]] != self.row_block[r[1]] || self.row_block[r[2]] != self.row_block[r[3]] {
            return None;
        }
        let cells = type_iv_cells(r, c);
        let pos: Vec<_> = cells.iter().filter(|e| e.1 > 0).map(|e| e.0).collect();
        let neg: Vec<_> = cells.iter().filter(|e| e.1 < 0).map(|e| e.0).collect();
        if pos.iter().any(|p| neg.contains(p)) {
            return None;
        }
        let rest_off = cells.iter().map(|e| e.0).filter(|&p| p != a && p != b).all(|p| !self.in_s(p));
        rest_off.then_some(cells)
    }
}

fn all_distinct<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().all(|(n, a)| v[..n].iter().all(|b| a != b))
}

fn type_i_cells(r: [usize; 2], c: [usize; 2]) -> Vec<((usize, usize), i32)> {
    vec![((r[0], c[0]), 1), ((r[0], c[1]), -1), ((r[1], c[0]), -1), ((r[1], c[1]), 1)]
}

fn type_ii_cells(r: [usize; 3], c: [usize; 3]) -> Vec<((usize, usize), i32)> {
    vec![
        ((r[0], c[1]), 1),
        ((r[0], c[2]), -1),
        ((r[1], c[0]), -1),
        ((r[1], c[2]), 1),
        ((r[2], c[0]), 1),
        ((r[2], c[1]), -1),
    ]
}

fn type_iii_cells(r: [usize; 3], c: [usize; 3]) -> Vec<((usize, usize), i32)> {
    vec![
        ((r[0], c[0]), 1),
        ((r[0], c[2]), -1),
        ((r[1], c[1]), -1),
        ((r[1], c[2]), 1),
        ((r[2], c[0]), -1),
        ((r[2], c[1]), 1),
    ]
}

fn type_iv_cells(r: [usize; 4], c: [usize; 4]) -> Vec<((usize, usize), i32)> {
    vec![
        ((r[0], c[0]), 1),
        ((r[0], c[2]), -1),
        ((r[1], c[1]), 1),
        ((r[1], c[3]), -1),
        ((r[2], c[1]), -1),
        ((r[2], c[2]), 1),
        ((r[3], c[0]), -1),
        ((r[3], c[3]), 1),
    ]
}

/// The move types making up the Markov basis of a model.
pub fn basis_types(model: &Model) -> Vec<MoveType> {
    match model.spec() {
        ModelSpec::Independence | ModelSpec::ChangePoint { .. } => vec![MoveType::I],
        ModelSpec::BlockDiagonalOwn(b) if b.num_blocks() == 2 => vec![MoveType::I],
        ModelSpec::BlockDiagonalOwn(_) => vec![MoveType::I, MoveType::II],
        ModelSpec::CommonBlockDiagonal(_) | ModelSpec::GeneralBlockDiagonal { .. } => MoveType::ALL.to_vec(),
    }
}

/// How the basis hands out proposals.
#[derive(Clone, Debug)]
pub enum BasisSource {
    /// Every move, one representative per `±z` pair.
    Enumerated(Vec<Move>),
    Lazy(Box<LazyGenerator>),
}

/// A sign-invariant Markov basis for one model.
#[derive(Clone, Debug)]
pub struct MoveBasis {
    model: Model,
    config: Configuration,
    kinds: Vec<MoveType>,
    source: BasisSource,
}

/// Options for [`markov_basis`].
#[derive(Clone, Copy, Debug)]
pub struct BasisOptions {
    /// Largest grid, in cells, for which moves are enumerated up front.
    pub enumeration_threshold: usize,
    /// Force enumeration regardless of the threshold.
    pub force_enumeration: bool,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            enumeration_threshold: DEFAULT_ENUMERATION_THRESHOLD,
            force_enumeration: false,
        }
    }
}

impl MoveBasis {
    /// A basis of the given types, fully enumerated.
    pub fn enumerated(model: &Model, kinds: &[MoveType]) -> Self {
        let config = Configuration::new(model);
        let moves = enumerate_moves(model, &config, kinds);
        MoveBasis {
            model: model.clone(),
            config,
            kinds: kinds.to_vec(),
            source: BasisSource::Enumerated(moves),
        }
    }

    /// A basis of the given types, drawn lazily.
    pub fn lazy(model: &Model, kinds: &[MoveType]) -> Self {
        let config = Configuration::new(model);
        let gen = LazyGenerator::new(model, &config, kinds);
        MoveBasis {
            model: model.clone(),
            config,
            kinds: gen.types().to_vec(),
            source: BasisSource::Lazy(Box::new(gen)),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn kinds(&self) -> &[MoveType] {
        &self.kinds
    }

    pub fn source(&self) -> &BasisSource {
        &self.source
    }

    /// Enumerated representatives, if the basis is explicit.
    pub fn moves(&self) -> Option<&[Move]> {
        match &self.source {
            BasisSource::Enumerated(m) => Some(m),
            BasisSource::Lazy(_) => None,
        }
    }

    /// Both orientations of every enumerated move.
    pub fn signed_moves(&self) -> impl Iterator<Item = Move> + '_ {
        self.moves()
            .unwrap_or(&[])
            .iter()
            .flat_map(|z| [z.clone(), z.negated()])
    }

    /// Count of enumerated moves per type.
    pub fn type_counts(&self) -> Vec<(MoveType, usize)> {
        let moves = self.moves().unwrap_or(&[]);
        self.kinds
            .iter()
            .map(|&t| (t, moves.iter().filter(|z| z.kind() == t).count()))
            .collect()
    }

    /// Draws a move; see [`random_move`].
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Cow<'_, Move> {
        match &self.source {
            BasisSource::Enumerated(moves) => Cow::Borrowed(&moves[rng.random_range(0..moves.len())]),
            BasisSource::Lazy(gen) => Cow::Owned(gen.draw(rng)),
        }
    }

    /// Whether the basis has no moves at all (e.g. a 2×2 grid whose only
    /// basic move is excluded by the subtable constraint).
    pub fn is_empty(&self) -> bool {
        match &self.source {
            BasisSource::Enumerated(m) => m.is_empty(),
            BasisSource::Lazy(g) => g.types().is_empty(),
        }
    }
}

/// Draws a move from `basis`. The selection law does not depend on any chain
/// state and gives every basis element positive probability.
pub fn random_move<'a, R: Rng + ?Sized>(basis: &'a MoveBasis, rng: &mut R) -> Cow<'a, Move> {
    basis.draw(rng)
}

/// The Markov basis for a validated model, enumerated for grids up to the
/// threshold and lazy beyond it.
pub fn markov_basis(model: &Model, opts: &BasisOptions) -> MoveBasis {
    let kinds = basis_types(model);
    if opts.force_enumeration || model.rows() * model.cols() <= opts.enumeration_threshold {
        MoveBasis::enumerated(model, &kinds)
    } else {
        MoveBasis::lazy(model, &kinds)
    }
}

/// Basic moves in the kernel of a change point (or independence) model.
pub fn basis_change_point(model: &Model) -> MoveBasis {
    MoveBasis::enumerated(model, &[MoveType::I])
}

/// Types I(+II) for own-parameter models and Types I–IV for common and
/// general block models.
pub fn basis_block(model: &Model) -> MoveBasis {
    MoveBasis::enumerated(model, &basis_types(model))
}

/// Enumerates all moves of the requested types that satisfy their side
/// conditions and lie in the kernel, deduplicated up to sign.
pub fn enumerate_moves(model: &Model, cfg: &Configuration, kinds: &[MoveType]) -> Vec<Move> {
    let (rows, cols) = (model.rows(), model.cols());
    let geom = BlockGeometry::from_model(model);
    let mut seen: HashSet<Vec<(u32, i32)>> = HashSet::new();
    let mut out = Vec::new();
    let mut push = |z: Move, out: &mut Vec<Move>| {
        if z.entries.is_empty() || !is_kernel_move(cfg, &z) {
            return;
        }
        let z = z.canonical();
        if seen.insert(z.entries.clone()) {
            out.push(z);
        }
    };
    for &kind in kinds {
        match kind {
            MoveType::I => {
                for i1 in 1..=rows {
                    for i2 in i1 + 1..=rows {
                        for j1 in 1..=cols {
                            for j2 in j1 + 1..=cols {
                                let z = Move::from_cells(rows, cols, kind, &type_i_cells([i1, i2], [j1, j2]));
                                push(z, &mut out);
                            }
                        }
                    }
                }
            }
            MoveType::II | MoveType::III => {
                let Some(g) = &geom else { continue };
                for r in distinct_triples(rows) {
                    for c in distinct_triples(cols) {
                        let cells = if kind == MoveType::II { g.type_ii(r, c) } else { g.type_iii(r, c) };
                        if let Some(cells) = cells {
                            push(Move::from_cells(rows, cols, kind, &cells), &mut out);
                        }
                    }
                }
            }
            MoveType::IV | MoveType::IVT => {
                let Some(g) = &geom else { continue };
                let g = if kind == MoveType::IVT { g.transposed() } else { g.clone() };
                for z in enumerate_type_iv(&g) {
                    let z = if kind == MoveType::IVT {
                        z.transposed(MoveType::IVT)
                    } else {
                        z
                    };
                    push(z, &mut out);
                }
            }
        }
    }
    out
}

fn distinct_triples(n: usize) -> impl Iterator<Item = [usize; 3]> {
    (1..=n)
        .flat_map(move |a| (1..=n).flat_map(move |b| (1..=n).map(move |c| [a, b, c])))
        .filter(|t| t[0] != t[1] && t[0] != t[2] && t[1] != t[2])
}

fn enumerate_type_iv(g: &BlockGeometry) -> Vec<Move> {
    let s_cells = g.s_cells();
    let mut out = Vec::new();
    for &(i1, j1) in &s_cells {
        let i2s = g.rows_in_block(g.row_block[i1]);
        for &(i3, j2) in &s_cells {
            if g.block((i1, j1)) == g.block((i3, j2)) {
                continue;
            }
            let i4s = g.rows_in_block(g.row_block[i3]);
            for &i2 in &i2s {
                for &i4 in &i4s {
                    for j3 in 1..=g.cols {
                        for j4 in 1..=g.cols {
                            if let Some(cells) = g.type_iv([i1, i2, i3, i4], [j1, j2, j3, j4]) {
                                out.push(Move::from_cells(g.rows, g.cols, MoveType::IV, &cells));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Draws moves of fixed types by rejection sampling over index tuples.
///
/// A type is chosen with probability proportional to its estimated number of
/// valid tuples, then indices are drawn uniformly (Type IV anchors its two
/// diagonal cells on S) until the side conditions and kernel check pass.
#[derive(Clone, Debug)]
pub struct LazyGenerator {
    rows: usize,
    cols: usize,
    config: Configuration,
    geom: Option<BlockGeometry>,
    geom_t: Option<BlockGeometry>,
    s_cells: Vec<(usize, usize)>,
    s_cells_t: Vec<(usize, usize)>,
    types: Vec<MoveType>,
    cumulative: Vec<f64>,
}

const PILOT_DRAWS: usize = 20_000;
const PILOT_MAX_DRAWS: usize = 400_000;
const PILOT_SEED: u64 = 0x005e_ed0f_ba5e;

impl LazyGenerator {
    pub fn new(model: &Model, config: &Configuration, kinds: &[MoveType]) -> Self {
        let geom = BlockGeometry::from_model(model);
        let geom_t = geom.as_ref().map(BlockGeometry::transposed);
        let mut gen = LazyGenerator {
            rows: model.rows(),
            cols: model.cols(),
            config: config.clone(),
            s_cells: geom.as_ref().map(BlockGeometry::s_cells).unwrap_or_default(),
            s_cells_t: geom_t.as_ref().map(BlockGeometry::s_cells).unwrap_or_default(),
            geom,
            geom_t,
            types: Vec::new(),
            cumulative: Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(PILOT_SEED);
        let mut weights = Vec::new();
        for &kind in kinds {
            let space = gen.tuple_space(kind);
            if space == 0.0 {
                continue;
            }
            let mut hits = 0usize;
            let mut draws = 0usize;
            while draws < PILOT_MAX_DRAWS && (draws < PILOT_DRAWS || hits == 0) {
                draws += 1;
                if gen.try_draw(kind, &mut rng).is_some() {
                    hits += 1;
                }
            }
            if hits > 0 {
                gen.types.push(kind);
                weights.push(space * hits as f64 / draws as f64);
            }
        }
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        gen.cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        gen
    }

    pub fn types(&self) -> &[MoveType] {
        &self.types
    }

    /// Selection probability of each type.
    pub fn type_weights(&self) -> Vec<(MoveType, f64)> {
        let mut prev = 0.0;
        self.types
            .iter()
            .zip(&self.cumulative)
            .map(|(&t, &c)| {
                let w = c - prev;
                prev = c;
                (t, w)
            })
            .collect()
    }

    fn tuple_space(&self, kind: MoveType) -> f64 {
        let (r, c) = (self.rows as f64, self.cols as f64);
        match kind {
            MoveType::I => r * (r - 1.0) * c * (c - 1.0),
            MoveType::II | MoveType::III if self.geom.is_some() && self.rows >= 3 && self.cols >= 3 => {
                r * (r - 1.0) * (r - 2.0) * c * (c - 1.0) * (c - 2.0)
            }
            MoveType::IV if self.geom.is_some() => (self.s_cells.len() as f64).powi(2) * c * c,
            MoveType::IVT if self.geom.is_some() => (self.s_cells_t.len() as f64).powi(2) * r * r,
            _ => 0.0,
        }
    }

    fn try_draw<R: Rng + ?Sized>(&self, kind: MoveType, rng: &mut R) -> Option<Move> {
        let (rows, cols) = (self.rows, self.cols);
        let cells = match kind {
            MoveType::I => {
                let r = distinct_sample::<2, _>(rows, rng);
                let c = distinct_sample::<2, _>(cols, rng);
                type_i_cells(r, c)
            }
            MoveType::II | MoveType::III => {
                let g = self.geom.as_ref()?;
                let r = distinct_sample::<3, _>(rows, rng);
                let c = distinct_sample::<3, _>(cols, rng);
                if kind == MoveType::II {
                    g.type_ii(r, c)?
                } else {
                    g.type_iii(r, c)?
                }
            }
            MoveType::IV | MoveType::IVT => {
                let (g, s) = if kind == MoveType::IV {
                    (self.geom.as_ref()?, &self.s_cells)
                } else {
                    (self.geom_t.as_ref()?, &self.s_cells_t)
                };
                if s.is_empty() {
                    return None;
                }
                let (i1, j1) = s[rng.random_range(0..s.len())];
                let (i3, j2) = s[rng.random_range(0..s.len())];
                let b1 = g.rows_in_block(g.row_block[i1]);
                let b3 = g.rows_in_block(g.row_block[i3]);
                let i2 = b1[rng.random_range(0..b1.len())];
                let i4 = b3[rng.random_range(0..b3.len())];
                let j3 = rng.random_range(1..=g.cols);
                let j4 = rng.random_range(1..=g.cols);
                let cells = g.type_iv([i1, i2, i3, i4], [j1, j2, j3, j4])?;
                let z = Move::from_cells(g.rows, g.cols, MoveType::IV, &cells);
                let z = if kind == MoveType::IVT { z.transposed(MoveType::IVT) } else { z };
                return is_kernel_move(&self.config, &z).then_some(z);
            }
        };
        let z = Move::from_cells(rows, cols, kind, &cells);
        is_kernel_move(&self.config, &z).then_some(z)
    }

    /// Draws one valid move, retrying rejected tuples.
    ///
    /// Panics if the generator has no types with valid moves.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Move {
        assert!(!self.types.is_empty(), "lazy generator has no valid move types");
        let u: f64 = rng.random();
        let idx = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.types.len() - 1);
        let kind = self.types[idx];
        loop {
            if let Some(z) = self.try_draw(kind, rng) {
                return z;
            }
        }
    }
}

fn distinct_sample<const K: usize, R: Rng + ?Sized>(n: usize, rng: &mut R) -> [usize; K] {
    let mut out = [0usize; K];
    let mut filled = 0;
    while filled < K {
        let v = rng.random_range(1..=n);
        if !out[..filled].contains(&v) {
            out[filled] = v;
            filled += 1;
        }
    }
    out
}
