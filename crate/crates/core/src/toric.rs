//! Gröbner-basis certification for the toric ideal of a change point model.
//!
//! The quadratic binomials of the basic moves are checked to form a Gröbner
//! basis under a lexicographic order by reducing every S-polynomial to zero
//! (Buchberger's criterion). The order ranks variables row-major from the
//! bottom-right cell: `x_RC ≻ x_R,C−1 ≻ … ≻ x_R1 ≻ x_R−1,C ≻ … ≻ x_11`, after
//! rows and columns are relabelled so that every rectangle contains cell
//! `(1,1)`. Only this order is certified.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};
use crate::moves::{is_kernel_move, Move, MoveType};
use crate::table::{cell_index, index_cell, Rectangle};

/// Default bound on the reduction loop.
pub const DEFAULT_STEP_LIMIT: usize = 10_000;

/// Default largest grid side accepted by [`verify_grobner`].
pub const DEFAULT_MAX_DIM: usize = 5;

/// Exponent vector over the cell variables, indexed row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u8>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| u32::from(e)).sum()
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn lcm(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(&a, &b)| a.max(b)).collect())
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    /// `self / other`; caller guarantees divisibility.
    pub fn div(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn is_coprime(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| a == 0 || b == 0)
    }

    pub fn is_square_free(&self) -> bool {
        self.0.iter().all(|&e| e <= 1)
    }

    fn format(&self, cols: usize) -> String {
        let mut parts = Vec::new();
        for (k, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let (i, j) = index_cell(cols, k);
            if e == 1 {
                parts.push(format!("x{i}{j}"));
            } else {
                parts.push(format!("x{i}{j}^{e}"));
            }
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }
}

/// Lexicographic order given by a ranking of the variables.
#[derive(Clone, Debug)]
pub struct LexOrder {
    /// Variables from largest to smallest.
    ranking: Vec<usize>,
}

impl LexOrder {
    /// `x_RC ≻ x_R,C−1 ≻ … ≻ x_11`: larger row-major index is larger.
    pub fn bottom_right_first(rows: usize, cols: usize) -> Self {
        LexOrder {
            ranking: (0..rows * cols).rev().collect(),
        }
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn cmp(&self, a: &Monomial, b: &Monomial) -> Ordering {
        for &v in &self.ranking {
            match a.0[v].cmp(&b.0[v]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    pub fn describe(&self, cols: usize) -> String {
        self.ranking
            .iter()
            .map(|&k| {
                let (i, j) = index_cell(cols, k);
                format!("x{i}{j}")
            })
            .collect::<Vec<_>>()
            .join(" > ")
    }
}

/// `lead − trail` with `lead ≻ trail`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Binomial {
    pub lead: Monomial,
    pub trail: Monomial,
}

impl Binomial {
    /// Orients `a − b` so the larger monomial leads.
    pub fn oriented(a: Monomial, b: Monomial, order: &LexOrder) -> Self {
        match order.cmp(&a, &b) {
            Ordering::Less => Binomial { lead: b, trail: a },
            _ => Binomial { lead: a, trail: b },
        }
    }

    /// The move `lead − trail` as an integer table.
    pub fn to_move(&self, rows: usize, cols: usize) -> Move {
        let z: Vec<i64> = self
            .lead
            .0
            .iter()
            .zip(&self.trail.0)
            .map(|(&a, &b)| i64::from(a) - i64::from(b))
            .collect();
        Move::from_dense(rows, cols, MoveType::I, &z)
    }

    fn as_poly(&self) -> Poly {
        Poly {
            terms: vec![(self.lead.clone(), 1), (self.trail.clone(), -1)],
        }
    }
}

/// Sparse polynomial with terms sorted decreasingly in the active order.
#[derive(Clone, Debug, Default, PartialEq)]
struct Poly {
    terms: Vec<(Monomial, i64)>,
}

impl Poly {
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `self += coeff · shift · other`.
    fn add_scaled(&mut self, other: &Poly, coeff: i64, shift: &Monomial, order: &LexOrder) {
        for (m, c) in &other.terms {
            let mm = m.mul(shift);
            let add = c * coeff;
            match self.terms.iter().position(|(t, _)| *t == mm) {
                Some(p) => {
                    self.terms[p].1 += add;
                    if self.terms[p].1 == 0 {
                        self.terms.remove(p);
                    }
                }
                None => self.terms.push((mm, add)),
            }
        }
        self.terms.sort_by(|a, b| order.cmp(&b.0, &a.0));
    }
}

fn s_polynomial(g1: &Binomial, g2: &Binomial, order: &LexOrder) -> Poly {
    let l = g1.lead.lcm(&g2.lead);
    let mut s = Poly::default();
    s.add_scaled(&g1.as_poly(), 1, &l.div(&g1.lead), order);
    s.add_scaled(&g2.as_poly(), -1, &l.div(&g2.lead), order);
    s
}

/// Full multivariate division of `p` by `basis`; returns the remainder.
fn reduce(mut p: Poly, basis: &[Binomial], order: &LexOrder, limit: usize) -> Result<Poly> {
    let mut remainder = Poly::default();
    let mut steps = 0;
    while let Some((m, c)) = p.terms.first().cloned() {
        steps += 1;
        if steps > limit {
            return Err(Error::ReductionLimit(limit));
        }
        match basis.iter().find(|g| g.lead.divides(&m)) {
            Some(g) => p.add_scaled(&g.as_poly(), -c, &m.div(&g.lead), order),
            None => {
                p.terms.remove(0);
                remainder.terms.push((m, c));
            }
        }
    }
    debug_assert!(remainder
        .terms
        .iter()
        .all(|(m, _)| basis.iter().all(|g| !g.lead.divides(m))));
    Ok(remainder)
}

/// Whether the S-polynomial of `g1, g2` reduces to zero modulo `basis`.
pub fn s_poly_reduces(g1: &Binomial, g2: &Binomial, basis: &[Binomial], order: &LexOrder) -> Result<bool> {
    s_poly_reduces_with_limit(g1, g2, basis, order, DEFAULT_STEP_LIMIT)
}

pub fn s_poly_reduces_with_limit(
    g1: &Binomial,
    g2: &Binomial,
    basis: &[Binomial],
    order: &LexOrder,
    limit: usize,
) -> Result<bool> {
    let s = s_polynomial(g1, g2, order);
    Ok(reduce(s, basis, order, limit)?.is_zero())
}

/// Row and column relabelling that moves every rectangle to the top-left
/// corner. `rows[n]` is the original row placed at canonical row `n + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Canonicalization {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Relabels a change point model so that all rectangles share cell `(1,1)`.
/// Rows are sorted by the first rectangle containing them (rows in no
/// rectangle last), keeping the original order among ties; columns likewise.
pub fn canonicalize(model: &Model) -> Result<(Model, Canonicalization)> {
    let rectangles: &[Rectangle] = match model.spec() {
        ModelSpec::ChangePoint { rectangles } => rectangles,
        ModelSpec::Independence => &[],
        _ => return Err(Error::InvalidModel(vec!["toric verification needs a change point model".into()])),
    };
    let n = rectangles.len();
    let level = |x: usize, span: &dyn Fn(&Rectangle) -> (usize, usize)| {
        rectangles
            .iter()
            .position(|r| {
                let (lo, hi) = span(r);
                lo <= x && x <= hi
            })
            .unwrap_or(n)
    };
    let mut rows: Vec<usize> = (1..=model.rows()).collect();
    rows.sort_by_key(|&i| level(i, &|r| (r.a1, r.a2)));
    let mut cols: Vec<usize> = (1..=model.cols()).collect();
    cols.sort_by_key(|&j| level(j, &|r| (r.b1, r.b2)));
    let canon: Vec<Rectangle> = rectangles
        .iter()
        .map(|r| Rectangle::new(1, r.a2 + 1 - r.a1, 1, r.b2 + 1 - r.b1))
        .collect();
    let spec = if canon.is_empty() {
        ModelSpec::Independence
    } else {
        ModelSpec::ChangePoint { rectangles: canon }
    };
    let canonical = Model::new(spec, model.rows(), model.cols())?;
    Ok((canonical, Canonicalization { rows, cols }))
}

/// Binomials `x_ik x_jl − x_il x_jk` (`i < j`, `k < l`) of the basic moves of
/// a canonical change point model, led by `x_ik x_jl`.
pub fn generators(model: &Model, order: &LexOrder) -> Vec<Binomial> {
    let (rows, cols) = (model.rows(), model.cols());
    let cfg = Configuration::new(model);
    let nvars = rows * cols;
    let mono = |cells: [(usize, usize); 2]| {
        let mut m = Monomial::one(nvars);
        for (i, j) in cells {
            m.0[cell_index(cols, i, j)] += 1;
        }
        m
    };
    let mut out = Vec::new();
    for i in 1..=rows {
        for j in i + 1..=rows {
            for k in 1..=cols {
                for l in k + 1..=cols {
                    let main = mono([(i, k), (j, l)]);
                    let anti = mono([(i, l), (j, k)]);
                    let g = Binomial::oriented(main.clone(), anti, order);
                    if is_kernel_move(&cfg, &g.to_move(rows, cols)) {
                        assert_eq!(g.lead, main, "x_ik x_jl must lead under the bottom-right-first order");
                        out.push(g);
                    }
                }
            }
        }
    }
    out
}

/// Result of [`verify_grobner`].
#[derive(Clone, Debug, Serialize)]
pub struct GrobnerReport {
    pub rows: usize,
    pub cols: usize,
    pub canonicalization: Canonicalization,
    /// Variables from largest to smallest, in canonical coordinates.
    pub order: String,
    pub generators: usize,
    pub pairs_checked: usize,
    pub all_reduced: bool,
    pub square_free: bool,
    /// Generator pairs whose S-polynomial has a nonzero remainder.
    pub failures: Vec<(String, String)>,
}

impl GrobnerReport {
    pub fn passed(&self) -> bool {
        self.all_reduced && self.square_free
    }
}

pub fn format_binomial(g: &Binomial, cols: usize) -> String {
    format!("{} - {}", g.lead.format(cols), g.trail.format(cols))
}

/// Checks Buchberger's criterion for every pair of generators and the
/// square-freeness of every leading monomial.
pub fn verify_grobner(model: &Model, max_dim: usize) -> Result<GrobnerReport> {
    if model.rows() > max_dim || model.cols() > max_dim {
        return Err(Error::InvalidModel(vec![format!(
            "grid {}x{} exceeds the verification bound {max_dim}x{max_dim}",
            model.rows(),
            model.cols()
        )]));
    }
    let (canonical, perm) = canonicalize(model)?;
    let (rows, cols) = (canonical.rows(), canonical.cols());
    let order = LexOrder::bottom_right_first(rows, cols);
    let g = generators(&canonical, &order);
    let pairs: Vec<(usize, usize)> = (0..g.len()).flat_map(|a| (a + 1..g.len()).map(move |b| (a, b))).collect();
    let outcomes: Vec<(usize, usize, bool)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            s_poly_reduces(&g[a], &g[b], &g, &order).map(|ok| (a, b, ok))
        })
        .collect::<Result<_>>()?;
    let failures: Vec<(String, String)> = outcomes
        .iter()
        .filter(|(_, _, ok)| !ok)
        .map(|&(a, b, _)| (format_binomial(&g[a], cols), format_binomial(&g[b], cols)))
        .collect();
    Ok(GrobnerReport {
        rows,
        cols,
        canonicalization: perm,
        order: order.describe(cols),
        generators: g.len(),
        pairs_checked: pairs.len(),
        all_reduced: failures.is_empty(),
        square_free: g.iter().all(|b| b.lead.is_square_free()),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::basis_change_point;

    fn cp(rects: Vec<Rectangle>, r: usize, c: usize) -> Model {
        Model::new(ModelSpec::ChangePoint { rectangles: rects }, r, c).unwrap()
    }

    #[test]
    fn two_by_two_independence() {
        let m = Model::new(ModelSpec::Independence, 2, 2).unwrap();
        let order = LexOrder::bottom_right_first(2, 2);
        let g = generators(&m, &order);
        assert_eq!(g.len(), 1);
        assert_eq!(format_binomial(&g[0], 2), "x11*x22 - x12*x21");
        assert!(s_poly_reduces(&g[0], &g[0], &g, &order).unwrap());
    }

    #[test]
    fn order_description() {
        let o = LexOrder::bottom_right_first(2, 3);
        assert_eq!(o.describe(3), "x23 > x22 > x21 > x13 > x12 > x11");
    }

    #[test]
    fn coprime_leads_reduce() {
        let m = Model::new(ModelSpec::Independence, 4, 4).unwrap();
        let order = LexOrder::bottom_right_first(4, 4);
        let g = generators(&m, &order);
        let (a, b) = g
            .iter()
            .enumerate()
            .flat_map(|(i, a)| g[i + 1..].iter().map(move |b| (a, b)))
            .find(|(a, b)| a.lead.is_coprime(&b.lead))
            .unwrap();
        assert!(s_poly_reduces(a, b, &g, &order).unwrap());
    }

    #[test]
    fn generator_count_matches_basic_moves() {
        let m = cp(vec![Rectangle::new(1, 2, 1, 2)], 3, 3);
        let order = LexOrder::bottom_right_first(3, 3);
        assert_eq!(generators(&m, &order).len(), basis_change_point(&m).moves().unwrap().len());
    }

    #[test]
    fn canonicalization_moves_rectangles_to_corner() {
        let m = cp(vec![Rectangle::new(2, 3, 3, 4), Rectangle::new(1, 3, 2, 4)], 4, 4);
        let (c, perm) = canonicalize(&m).unwrap();
        assert_eq!(perm.rows, vec![2, 3, 1, 4]);
        assert_eq!(perm.cols, vec![3, 4, 2, 1]);
        assert_eq!(
            c.spec(),
            &ModelSpec::ChangePoint {
                rectangles: vec![Rectangle::new(1, 2, 1, 2), Rectangle::new(1, 3, 1, 3)]
            }
        );
    }

    #[test]
    fn doubly_strict_nested_case_passes() {
        let m = cp(vec![Rectangle::new(1, 2, 1, 2), Rectangle::new(1, 3, 1, 3)], 4, 4);
        let report = verify_grobner(&m, DEFAULT_MAX_DIM).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.pairs_checked > 0);
    }

    #[test]
    fn rejects_oversized_grids() {
        let m = cp(vec![Rectangle::new(1, 2, 1, 2)], 6, 3);
        assert!(verify_grobner(&m, 5).is_err());
    }

    #[test]
    fn reduction_limit_is_enforced() {
        let m = Model::new(ModelSpec::Independence, 3, 3).unwrap();
        let order = LexOrder::bottom_right_first(3, 3);
        let g = generators(&m, &order);
        let (a, b) = (&g[0], &g[1]);
        assert!(matches!(
            s_poly_reduces_with_limit(a, b, &g, &order, 0),
            Err(Error::ReductionLimit(0))
        ));
    }
}
