//! Helpers shared by the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::HashMap;

use markov_fiber::oracle::{enumerate_fiber, Fiber};
use markov_fiber::{BlockBounds, Configuration, Model, ModelSpec, MoveBasis, Rectangle, Table};
use nalgebra::{DMatrix, DVector};

pub fn model(spec: ModelSpec, r: usize, c: usize) -> Model {
    Model::new(spec, r, c).expect("valid model")
}

pub fn cp(rects: &[(usize, usize, usize, usize)], r: usize, c: usize) -> Model {
    model(
        ModelSpec::ChangePoint {
            rectangles: rects.iter().map(|&(a1, a2, b1, b2)| Rectangle::new(a1, a2, b1, b2)).collect(),
        },
        r,
        c,
    )
}

pub fn table<const C: usize>(rows: &[[u64; C]]) -> Table {
    Table::from_rows(rows).expect("valid table")
}

/// All tables of the grid whose total is `total`, filtered by `A x = t`:
/// the slow, obviously-correct fiber.
pub fn brute_fiber(cfg: &Configuration, t: &[u64], total: u64) -> Vec<Vec<u64>> {
    fn rec(k: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k + 1 == cur.len() {
            cur[k] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[k] = v;
            rec(k + 1, left - v, cur, out);
        }
    }
    let mut all = Vec::new();
    rec(0, total, &mut vec![0; cfg.num_cells()], &mut all);
    all.retain(|x| cfg.apply_counts(x) == t);
    all
}

/// Extension used by the tests: `A x` for raw counts.
pub trait ApplyCounts {
    fn apply_counts(&self, x: &[u64]) -> Vec<u64>;
}

impl ApplyCounts for Configuration {
    fn apply_counts(&self, x: &[u64]) -> Vec<u64> {
        (0..self.num_constraints())
            .map(|r| self.support(r).iter().map(|&k| x[k]).sum())
            .collect()
    }
}

/// Exact transition matrix of the sampler on an enumerated fiber: a uniform
/// basis move, a fair sign, rejection outside the orthant and Metropolis
/// acceptance against `1 / Π x!`.
pub fn transition_matrix(fiber: &Fiber, basis: &MoveBasis) -> DMatrix<f64> {
    let moves = basis.moves().expect("enumerated basis");
    let n = fiber.len();
    let index: HashMap<&[u64], usize> = fiber.members().iter().enumerate().map(|(i, x)| (x.counts(), i)).collect();
    let lw = fiber.log_weights();
    let share = 1.0 / (2.0 * moves.len() as f64);
    let mut p = DMatrix::zeros(n, n);
    for (a, x) in fiber.members().iter().enumerate() {
        let mut leave = 0.0;
        for z in moves {
            for sign in [1i64, -1] {
                let mut y: Vec<i64> = x.counts().iter().map(|&v| v as i64).collect();
                for (k, c) in z.entries() {
                    y[k] += sign * c;
                }
                if y.iter().any(|&v| v < 0) {
                    continue;
                }
                let y: Vec<u64> = y.into_iter().map(|v| v as u64).collect();
                let b = index[y.as_slice()];
                let acc = (lw[b] - lw[a]).exp().min(1.0) * share;
                p[(a, b)] += acc;
                leave += acc;
            }
        }
        p[(a, a)] += 1.0 - leave;
    }
    p
}

/// Asymptotic variance `lim n·Var(mean of f)` of a stationary chain with
/// kernel `p` and law `pi`, via the Poisson equation
/// `(I − P + 1πᵀ) g = f − πf`, `σ² = 2⟨f̄, g⟩_π − ⟨f̄, f̄⟩_π`.
pub fn asymptotic_variance(p: &DMatrix<f64>, pi: &[f64], f: &[f64]) -> f64 {
    let n = pi.len();
    let mean: f64 = pi.iter().zip(f).map(|(a, b)| a * b).sum();
    let fbar = DVector::from_iterator(n, f.iter().map(|v| v - mean));
    let pi_row = DMatrix::from_row_slice(1, n, pi);
    let a = DMatrix::identity(n, n) - p + DMatrix::from_element(n, 1, 1.0) * pi_row;
    let g = a.lu().solve(&fbar).expect("ergodic chain has an invertible fundamental matrix");
    let inner = |u: &DVector<f64>, v: &DVector<f64>| (0..n).map(|i| pi[i] * u[i] * v[i]).sum::<f64>();
    2.0 * inner(&fbar, &g) - inner(&fbar, &fbar)
}

/// Small instances whose fibers are fully enumerable, spanning every model
/// family. Chosen up front; the sampler checks run on all of them.
pub fn sampler_instances() -> Vec<(&'static str, Model, Table)> {
    let uni = BlockBounds::uniform;
    vec![
        ("independence 2x2", model(ModelSpec::Independence, 2, 2), table(&[[1, 0], [0, 1]])),
        ("independence 2x3", model(ModelSpec::Independence, 2, 3), table(&[[1, 1, 0], [0, 1, 1]])),
        ("independence 3x3", model(ModelSpec::Independence, 3, 3), table(&[[2, 0, 0], [0, 1, 0], [0, 0, 1]])),
        (
            "change point 3x3",
            cp(&[(1, 2, 1, 2)], 3, 3),
            table(&[[1, 0, 1], [0, 2, 0], [1, 0, 0]]),
        ),
        (
            "change point 4x3 nested",
            cp(&[(1, 2, 1, 1), (1, 3, 1, 2)], 4, 3),
            table(&[[1, 0, 0], [0, 1, 0], [1, 0, 1], [0, 1, 0]]),
        ),
        (
            "change point 4x4 strip",
            cp(&[(1, 3, 1, 1)], 4, 4),
            table(&[[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 1, 0, 1]]),
        ),
        (
            "own blocks 4x4",
            model(ModelSpec::BlockDiagonalOwn(uni(2, 2)), 4, 4),
            table(&[[1, 0, 1, 0], [0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0]]),
        ),
        (
            "own blocks 6x6",
            model(ModelSpec::BlockDiagonalOwn(uni(3, 2)), 6, 6),
            table(&[
                [1, 0, 0, 0, 0, 0],
                [0, 0, 1, 0, 0, 0],
                [0, 0, 0, 0, 1, 0],
                [0, 0, 0, 1, 0, 0],
                [1, 0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0, 0],
            ]),
        ),
        (
            "common blocks 6x6",
            model(ModelSpec::CommonBlockDiagonal(uni(3, 2)), 6, 6),
            table(&[
                [1, 0, 0, 0, 0, 0],
                [0, 0, 1, 0, 0, 0],
                [0, 0, 0, 0, 0, 1],
                [0, 0, 0, 1, 0, 0],
                [0, 1, 0, 0, 0, 0],
                [0, 0, 0, 0, 0, 0],
            ]),
        ),
        (
            "common blocks 6x6 wrapped",
            model(ModelSpec::CommonBlockDiagonal(BlockBounds::new(vec![2, 4, 6, 8], vec![2, 4, 6, 8])), 6, 6),
            table(&[
                [1, 0, 0, 0, 0, 0],
                [0, 0, 1, 0, 0, 0],
                [0, 0, 0, 0, 1, 0],
                [0, 0, 0, 0, 0, 1],
                [0, 1, 0, 0, 0, 0],
                [0, 0, 0, 0, 0, 0],
            ]),
        ),
        (
            "general blocks 5x5",
            model(
                ModelSpec::GeneralBlockDiagonal {
                    bounds: BlockBounds::new(vec![1, 3, 5], vec![1, 3, 5]),
                    groups: vec![vec![1], vec![2]],
                },
                5,
                5,
            ),
            table(&[
                [1, 0, 0, 0, 0],
                [0, 0, 1, 0, 0],
                [0, 0, 1, 0, 0],
                [0, 0, 0, 0, 1],
                [0, 1, 0, 0, 0],
            ]),
        ),
    ]
}

pub fn fiber_of(model: &Model, x: &Table) -> Fiber {
    let cfg = Configuration::new(model);
    enumerate_fiber(&cfg.sufficient_statistic(x).unwrap(), &cfg, 10_000).unwrap()
}

/// Outcome of running the sampler on one enumerated fiber.
#[derive(Debug)]
pub struct SamplerCheck {
    pub name: &'static str,
    pub members: usize,
    pub samples: usize,
    /// `(occupancy − π) / (σ/√n)` for each member.
    pub occupancy_z: Vec<f64>,
    pub worst_occupancy_z: f64,
    pub exact_p: f64,
    pub mcmc_p: f64,
    /// Monte Carlo standard error of the p-value estimate.
    pub p_se: f64,
}

impl SamplerCheck {
    pub fn p_z(&self) -> f64 {
        z(self.mcmc_p - self.exact_p, self.p_se)
    }

    pub fn passed(&self) -> bool {
        self.worst_occupancy_z <= 3.0 && self.p_z() <= 3.0
    }
}

fn z(diff: f64, se: f64) -> f64 {
    if se > 1e-9 {
        diff.abs() / se
    } else if diff.abs() < 1e-9 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Walks `samples` post burn-in steps of a χ² test chain on the fiber of
/// `x` and compares occupancy and p-value with their exact values, using
/// the exact asymptotic variance of the chain for each standard error. The
/// chain starts from the member whose exact p-value is closest to 1/4, so
/// the p-value comparison is never trivially 1.
pub fn sampler_check(name: &'static str, m: &Model, x: &Table, samples: usize, seed: u64) -> SamplerCheck {
    use markov_fiber::mcmc::walk_with;
    use markov_fiber::moves::basis_types;
    use markov_fiber::{ChainConfig, FitOptions, FittedStatistic};

    let cfg = Configuration::new(m);
    let fiber = fiber_of(m, x);
    let basis = MoveBasis::enumerated(m, &basis_types(m));
    let pi = fiber.probabilities();
    let p = transition_matrix(&fiber, &basis);

    let mut stat = FittedStatistic::chi_square(m, FitOptions::default());
    let values: Vec<f64> = fiber.members().iter().map(|t| stat.evaluate(t)).collect();
    let tail = |obs: f64| -> Vec<f64> { values.iter().map(|&v| f64::from(u8::from(v >= obs - 1e-12))).collect() };
    let exact = |obs: f64| -> f64 { tail(obs).iter().zip(&pi).map(|(h, q)| h * q).sum() };
    let start = (0..fiber.len())
        .min_by(|&a, &b| (exact(values[a]) - 0.25).abs().total_cmp(&(exact(values[b]) - 0.25).abs()))
        .expect("nonempty fiber");
    let hits = tail(values[start]);
    let exact_p = exact(values[start]);
    let x = &fiber.members()[start];
    let library_p = markov_fiber::oracle::exact_pvalue_in(&fiber, x, |t| stat.evaluate(t));
    assert!((library_p - exact_p).abs() < 1e-12, "exact p-value disagrees with the oracle");

    let index: HashMap<Vec<u64>, usize> =
        fiber.members().iter().enumerate().map(|(i, t)| (t.counts().to_vec(), i)).collect();
    let burn_in = 10_000;
    let chain = ChainConfig::new(burn_in + samples, burn_in, seed);
    let mut occupancy = vec![0usize; fiber.len()];
    let mut step = 0usize;
    let result = walk_with(
        x,
        &cfg,
        &basis,
        &chain,
        |t| values[index[t.counts()]],
        |t| {
            step += 1;
            if step > burn_in {
                occupancy[index[t.counts()]] += 1;
            }
        },
    )
    .expect("valid chain");
    assert_eq!(occupancy.iter().sum::<usize>(), samples);

    let n = samples as f64;
    let occupancy_z: Vec<f64> = (0..fiber.len())
        .map(|i| {
            let mut f = vec![0.0; fiber.len()];
            f[i] = 1.0;
            let se = (asymptotic_variance(&p, &pi, &f).max(0.0) / n).sqrt();
            z(occupancy[i] as f64 / n - pi[i], se).copysign(occupancy[i] as f64 / n - pi[i])
        })
        .collect();
    let worst_occupancy_z = occupancy_z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let p_se = (asymptotic_variance(&p, &pi, &hits).max(0.0) / n).sqrt();
    SamplerCheck {
        name,
        members: fiber.len(),
        samples,
        occupancy_z,
        worst_occupancy_z,
        exact_p,
        mcmc_p: result.p_value,
        p_se,
    }
}
