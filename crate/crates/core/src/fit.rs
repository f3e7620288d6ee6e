//! Maximum-likelihood fits by iterative proportional scaling, and the test
//! statistics computed from them.

use std::collections::HashMap;

use serde::Serialize;

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::models::{is_nested, Model};
use crate::table::{index_cell, Table};

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Largest allowed |fitted − observed| over all sufficient-statistic entries.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub rows: usize,
    pub cols: usize,
    /// Fitted cell means, row-major.
    pub expected: Vec<f64>,
    pub iterations: usize,
    pub max_discrepancy: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.expected[(i - 1) * self.cols + (j - 1)]
    }

    pub fn expected_rows(&self) -> Vec<Vec<f64>> {
        self.expected.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Fits the model by cycling over the constraint groups of its configuration
/// (rows, columns, then each subtable term), rescaling each group's cells so
/// their fitted sum matches the observed sum.
pub fn ipf_fit(table: &Table, model: &Model, opts: &FitOptions) -> Result<FitResult> {
    let cfg = Configuration::new(model);
    ipf_fit_config(table, &cfg, opts)
}

pub fn ipf_fit_config(table: &Table, cfg: &Configuration, opts: &FitOptions) -> Result<FitResult> {
    let t = cfg.sufficient_statistic(table)?;
    let target: Vec<f64> = t.0.iter().map(|&v| v as f64).collect();
    let n = cfg.num_cells();
    let total = table.total() as f64;
    let mut m = vec![total / n as f64; n];
    let mut discrepancy = max_discrepancy(&m, cfg, &target);
    let mut iterations = 0;
    let mut last_ll = f64::NEG_INFINITY;
    while discrepancy > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        for (r, &goal) in target.iter().enumerate() {
            let support = cfg.support(r);
            let fitted: f64 = support.iter().map(|&k| m[k]).sum();
            if goal == 0.0 {
                for &k in support {
                    m[k] = 0.0;
                }
            } else if fitted > 0.0 {
                let f = goal / fitted;
                for &k in support {
                    m[k] *= f;
                }
            }
        }
        let ll = poisson_log_likelihood(table.counts(), &m);
        debug_assert!(
            ll >= last_ll - 1e-9 * ll.abs().max(1.0),
            "log-likelihood decreased during scaling: {last_ll} -> {ll}"
        );
        last_ll = ll;
        discrepancy = max_discrepancy(&m, cfg, &target);
    }
    Ok(FitResult {
        rows: table.rows(),
        cols: table.cols(),
        expected: m,
        iterations,
        max_discrepancy: discrepancy,
        converged: discrepancy <= opts.tol,
    })
}

fn max_discrepancy(m: &[f64], cfg: &Configuration, target: &[f64]) -> f64 {
    target
        .iter()
        .enumerate()
        .map(|(r, &goal)| (cfg.support(r).iter().map(|&k| m[k]).sum::<f64>() - goal).abs())
        .fold(0.0, f64::max)
}

/// `Σ (x ln m − m)` with `0·ln 0 = 0`; the kernel of the Poisson likelihood.
pub fn poisson_log_likelihood(x: &[u64], m: &[f64]) -> f64 {
    x.iter()
        .zip(m)
        .map(|(&xi, &mi)| if xi == 0 { -mi } else { xi as f64 * mi.ln() - mi })
        .sum()
}

/// Multinomial log-likelihood kernel `Σ x ln(m / Σm)`.
pub fn multinomial_log_likelihood(x: &[u64], m: &[f64]) -> f64 {
    let total: f64 = m.iter().sum();
    x.iter()
        .zip(m)
        .filter(|(&xi, _)| xi > 0)
        .map(|(&xi, &mi)| xi as f64 * (mi / total).ln())
        .sum()
}

/// Pearson's `Σ (x − m)² / m`. Cells with `m = 0` and `x = 0` contribute
/// nothing; `m = 0` with `x > 0` makes the statistic infinite.
pub fn chi_square(table: &Table, expected: &[f64]) -> f64 {
    table
        .counts()
        .iter()
        .zip(expected)
        .map(|(&x, &m)| {
            let x = x as f64;
            if m == 0.0 {
                if x == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (x - m) * (x - m) / m
            }
        })
        .sum()
}

/// Deviance `2 Σ x ln(x / m)`, with `0·ln(0/m) = 0`.
pub fn g_squared(table: &Table, expected: &[f64]) -> f64 {
    2.0 * table
        .counts()
        .iter()
        .zip(expected)
        .filter(|(&x, _)| x > 0)
        .map(|(&x, &m)| {
            let x = x as f64;
            x * (x / m).ln()
        })
        .sum::<f64>()
}

/// `2 Σ x ln(m_outer / m_inner)` from two converged fits.
pub fn llr_from_fits(table: &Table, inner: &FitResult, outer: &FitResult) -> Result<f64> {
    let mut acc = 0.0;
    for (k, &x) in table.counts().iter().enumerate() {
        if x == 0 {
            continue;
        }
        let (m1, m2) = (inner.expected[k], outer.expected[k]);
        if m1 == 0.0 || m2 == 0.0 {
            let (row, col) = index_cell(table.cols(), k);
            return Err(Error::ZeroFitted { row, col });
        }
        acc += x as f64 * (m2 / m1).ln();
    }
    Ok(2.0 * acc)
}

/// Log-likelihood ratio of `inner` against the larger model `outer`.
pub fn llr_nested(table: &Table, inner: &Model, outer: &Model, opts: &FitOptions) -> Result<f64> {
    if !is_nested(inner, outer) {
        return Err(Error::NotNested(format!(
            "{} is not a submodel of {}",
            inner.spec().family(),
            outer.spec().family()
        )));
    }
    let f1 = ipf_fit(table, inner, opts)?;
    let f2 = ipf_fit(table, outer, opts)?;
    llr_from_fits(table, &f1, &f2)
}

/// Which goodness-of-fit statistic a chain records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Chi2,
    G2,
    Llr,
}

impl StatKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "chi2" => Some(StatKind::Chi2),
            "g2" => Some(StatKind::G2),
            "llr" => Some(StatKind::Llr),
            _ => None,
        }
    }
}

/// A goodness-of-fit statistic evaluated on arbitrary tables of one grid.
///
/// Fitted means depend on a table only through its sufficient statistic, so
/// fits are memoized by that statistic. Along a fiber walk the null model's
/// statistic never changes, and the alternative's takes few distinct values.
#[derive(Clone, Debug)]
pub struct FittedStatistic {
    kind: StatKind,
    null_cfg: Configuration,
    alt_cfg: Option<Configuration>,
    opts: FitOptions,
    null_cache: HashMap<Vec<u64>, Vec<f64>>,
    alt_cache: HashMap<Vec<u64>, Vec<f64>>,
}

impl FittedStatistic {
    /// Pearson χ² against the null model.
    pub fn chi_square(null: &Model, opts: FitOptions) -> Self {
        Self::new(StatKind::Chi2, null, None, opts)
    }

    /// Deviance against the null model.
    pub fn g_squared(null: &Model, opts: FitOptions) -> Self {
        Self::new(StatKind::G2, null, None, opts)
    }

    /// Nested log-likelihood ratio; `inner` must be a submodel of `outer`.
    pub fn llr(inner: &Model, outer: &Model, opts: FitOptions) -> Result<Self> {
        if !is_nested(inner, outer) {
            return Err(Error::NotNested(format!(
                "{} is not a submodel of {}",
                inner.spec().family(),
                outer.spec().family()
            )));
        }
        Ok(Self::new(StatKind::Llr, inner, Some(outer), opts))
    }

    fn new(kind: StatKind, null: &Model, alt: Option<&Model>, opts: FitOptions) -> Self {
        FittedStatistic {
            kind,
            null_cfg: Configuration::new(null),
            alt_cfg: alt.map(Configuration::new),
            opts,
            null_cache: HashMap::new(),
            alt_cache: HashMap::new(),
        }
    }

    pub fn kind(&self) -> StatKind {
        self.kind
    }

    fn fitted<'a>(
        cache: &'a mut HashMap<Vec<u64>, Vec<f64>>,
        cfg: &Configuration,
        opts: &FitOptions,
        x: &Table,
    ) -> &'a [f64] {
        let key = cfg.apply(x.counts());
        cache.entry(key).or_insert_with(|| {
            ipf_fit_config(x, cfg, opts)
                .map(|f| f.expected)
                .unwrap_or_else(|_| vec![f64::NAN; x.counts().len()])
        })
    }

    pub fn evaluate(&mut self, x: &Table) -> f64 {
        let m1 = Self::fitted(&mut self.null_cache, &self.null_cfg, &self.opts, x).to_vec();
        match self.kind {
            StatKind::Chi2 => chi_square(x, &m1),
            StatKind::G2 => g_squared(x, &m1),
            StatKind::Llr => {
                let cfg = self.alt_cfg.as_ref().expect("llr has an alternative model");
                let m2 = Self::fitted(&mut self.alt_cache, cfg, &self.opts, x);
                let mut acc = 0.0;
                for ((&xi, &a), &b) in x.counts().iter().zip(&m1).zip(m2) {
                    if xi > 0 {
                        acc += xi as f64 * (b / a).ln();
                    }
                }
                2.0 * acc
            }
        }
    }
}
