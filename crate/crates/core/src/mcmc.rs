//! Metropolis–Hastings walk on a fiber.
//!
//! Conditioning on the sufficient statistic removes every model parameter,
//! so the null law on a fiber is proportional to `1 / Π x_ij!`. A proposal
//! draws a basis move `z` independently of the current table and a uniform
//! sign `s`; the proposal is therefore symmetric and the acceptance
//! probability reduces to `min(1, Π x_ij! / Π x'_ij!)` for `x' = x + s·z`.
//! Proposals leaving the nonnegative orthant are rejected and the chain stays.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64`; runs are reproducible for a given build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::logfact::LogFactorial;
use crate::moves::MoveBasis;
use crate::oracle::STAT_TOLERANCE;
use crate::table::Table;

/// Interval between fiber-invariance checks in release builds.
const RELEASE_CHECK_INTERVAL: usize = 1_000;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainConfig {
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(steps: usize, burn_in: usize, seed: u64) -> Self {
        ChainConfig {
            steps,
            burn_in,
            thin: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidChain("steps must be positive".into()));
        }
        if self.burn_in >= self.steps {
            return Err(Error::InvalidChain(format!(
                "burn-in ({}) must be smaller than steps ({})",
                self.burn_in, self.steps
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidChain("thin must be positive".into()));
        }
        Ok(())
    }

    /// Number of recorded samples, `⌊(steps − burn_in) / thin⌋`.
    pub fn num_samples(&self) -> usize {
        (self.steps - self.burn_in) / self.thin
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainResult {
    /// Statistic after each recorded step (post burn-in, thinned).
    pub samples: Vec<f64>,
    pub accepted: usize,
    /// Steps on which the chain did not move.
    pub stayed: usize,
    pub observed: f64,
    pub p_value: f64,
    pub seed: u64,
}

impl ChainResult {
    pub fn acceptance_rate(&self) -> f64 {
        let total = self.accepted + self.stayed;
        if total == 0 {
            0.0
        } else {
            self.accepted as f64 / total as f64
        }
    }
}

/// `(#{samples ≥ observed} + 1) / (#samples + 1)`, comparing with an
/// absolute tolerance of 1e-12.
pub fn estimate_pvalue(samples: &[f64], observed: f64) -> f64 {
    let hits = samples.iter().filter(|&&s| s >= observed - STAT_TOLERANCE).count();
    (hits + 1) as f64 / (samples.len() + 1) as f64
}

/// Runs one chain from `start`, recording `statistic` at every retained step.
pub fn walk<F>(start: &Table, cfg: &Configuration, basis: &MoveBasis, chain: &ChainConfig, statistic: F) -> Result<ChainResult>
where
    F: FnMut(&Table) -> f64,
{
    walk_with(start, cfg, basis, chain, statistic, |_| {})
}

/// [`walk`] that also reports every visited table (after each step,
/// including burn-in) to `visit`.
pub fn walk_with<F, V>(
    start: &Table,
    cfg: &Configuration,
    basis: &MoveBasis,
    chain: &ChainConfig,
    mut statistic: F,
    mut visit: V,
) -> Result<ChainResult>
where
    F: FnMut(&Table) -> f64,
    V: FnMut(&Table),
{
    chain.validate()?;
    let t0 = cfg.sufficient_statistic(start)?;
    let observed = statistic(start);
    if !observed.is_finite() {
        return Err(Error::NonFiniteStatistic {
            value: observed,
            step: 0,
        });
    }
    let lf = LogFactorial::new(start.total() + 4);
    let mut rng = ChaCha8Rng::seed_from_u64(chain.seed);
    let mut x = start.clone();
    let mut current = observed;
    let mut dirty = false;
    let mut samples = Vec::with_capacity(chain.num_samples());
    let (mut accepted, mut stayed) = (0usize, 0usize);
    let empty = basis.is_empty();

    for step in 0..chain.steps {
        let moved = !empty && propose(&mut x, basis, &lf, &mut rng);
        if moved {
            accepted += 1;
            dirty = true;
        } else {
            stayed += 1;
        }
        let check = cfg!(debug_assertions) || (step + 1) % RELEASE_CHECK_INTERVAL == 0;
        if check {
            assert_eq!(
                cfg.apply(x.counts()),
                t0.0,
                "chain left its fiber at step {step}"
            );
        }
        visit(&x);
        if step >= chain.burn_in && (step - chain.burn_in + 1).is_multiple_of(chain.thin) {
            if dirty {
                current = statistic(&x);
                dirty = false;
                if !current.is_finite() {
                    return Err(Error::NonFiniteStatistic { value: current, step });
                }
            }
            samples.push(current);
        }
    }
    let p_value = estimate_pvalue(&samples, observed);
    Ok(ChainResult {
        samples,
        accepted,
        stayed,
        observed,
        p_value,
        seed: chain.seed,
    })
}

/// One Metropolis step; returns whether the table changed.
fn propose<R: Rng>(x: &mut Table, basis: &MoveBasis, lf: &LogFactorial, rng: &mut R) -> bool {
    let z = basis.draw(rng);
    let sign: i64 = if rng.random_bool(0.5) { 1 } else { -1 };
    let counts = x.counts();
    let mut log_ratio = 0.0;
    for (k, c) in z.entries() {
        let v = counts[k] as i64 + sign * c;
        if v < 0 {
            return false;
        }
        log_ratio += lf.get(counts[k]) - lf.get(v as u64);
    }
    if log_ratio < 0.0 && rng.random::<f64>() >= log_ratio.exp() {
        return false;
    }
    let counts = x.counts_mut();
    for (k, c) in z.entries() {
        counts[k] = (counts[k] as i64 + sign * c) as u64;
    }
    true
}

/// Results of several independent chains seeded `seed, seed+1, …`.
#[derive(Clone, Debug, Serialize)]
pub struct PooledResult {
    pub chains: Vec<ChainResult>,
    /// Mean of the per-chain p-values.
    pub p_value: f64,
    /// Binomial standard error over all pooled samples.
    pub std_error: f64,
    /// Standard deviation of the chain p-values over √k (k ≥ 2).
    pub between_chain_se: Option<f64>,
    pub observed: f64,
}

impl PooledResult {
    pub fn total_samples(&self) -> usize {
        self.chains.iter().map(|c| c.samples.len()).sum()
    }
}

/// Runs `n_chains` independent chains in parallel on at most `threads`
/// threads. `make_stat` builds a fresh statistic for each chain.
pub fn run_chains<S, M>(
    start: &Table,
    cfg: &Configuration,
    basis: &MoveBasis,
    chain: &ChainConfig,
    n_chains: usize,
    threads: Option<usize>,
    make_stat: M,
) -> Result<PooledResult>
where
    M: Fn() -> S + Sync,
    S: FnMut(&Table) -> f64,
{
    if n_chains == 0 {
        return Err(Error::InvalidChain("at least one chain is required".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidChain(format!("thread pool: {e}")))?;
    let chains: Vec<ChainResult> = pool.install(|| {
        (0..n_chains)
            .into_par_iter()
            .map(|c| {
                let cc = ChainConfig {
                    seed: chain.seed.wrapping_add(c as u64),
                    ..*chain
                };
                walk(start, cfg, basis, &cc, make_stat())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(pool_results(chains))
}

pub fn pool_results(chains: Vec<ChainResult>) -> PooledResult {
    let k = chains.len() as f64;
    let p_value = chains.iter().map(|c| c.p_value).sum::<f64>() / k;
    let n: usize = chains.iter().map(|c| c.samples.len()).sum();
    let std_error = (p_value * (1.0 - p_value) / n.max(1) as f64).sqrt();
    let between_chain_se = (chains.len() >= 2).then(|| {
        let var = chains.iter().map(|c| (c.p_value - p_value).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    });
    let observed = chains.first().map_or(f64::NAN, |c| c.observed);
    PooledResult {
        chains,
        p_value,
        std_error,
        between_chain_se,
        observed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Model, ModelSpec};
    use crate::moves::markov_basis;

    #[test]
    fn pvalue_estimator() {
        assert!((estimate_pvalue(&[1.0, 2.0, 3.0], 10.0) - 0.25).abs() < 1e-15);
        assert_eq!(estimate_pvalue(&[1.0, 2.0, 3.0], 1.0), 1.0);
        assert_eq!(estimate_pvalue(&[], 1.0), 1.0);
        // Ties within tolerance count as exceedances.
        assert_eq!(estimate_pvalue(&[1.0 - 1e-13], 1.0), 1.0);
    }

    #[test]
    fn chain_config_rules() {
        assert!(ChainConfig::new(10, 10, 0).validate().is_err());
        assert!(ChainConfig::new(0, 0, 0).validate().is_err());
        let mut c = ChainConfig::new(100, 10, 0);
        c.thin = 7;
        assert!(c.validate().is_ok());
        assert_eq!(c.num_samples(), 12);
    }

    fn two_by_two_setup() -> (Table, Configuration, MoveBasis) {
        let m = Model::new(ModelSpec::Independence, 2, 2).unwrap();
        let cfg = Configuration::new(&m);
        let basis = markov_basis(&m, &Default::default());
        (Table::from_rows(&[[1u64, 0], [0, 1]]).unwrap(), cfg, basis)
    }

    #[test]
    fn reproducible_and_counted_per_step() {
        let (x, cfg, basis) = two_by_two_setup();
        let mut chain = ChainConfig::new(1000, 100, 42);
        chain.thin = 3;
        let stat = |t: &Table| t.get(1, 1) as f64;
        let a = walk(&x, &cfg, &basis, &chain, stat).unwrap();
        let b = walk(&x, &cfg, &basis, &chain, stat).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples.len(), 300);
        assert_eq!(a.accepted + a.stayed, 1000);
    }

    #[test]
    fn two_member_fiber_occupancy() {
        let (x, cfg, basis) = two_by_two_setup();
        let chain = ChainConfig::new(200_000, 1_000, 3);
        let r = walk(&x, &cfg, &basis, &chain, |t: &Table| t.get(1, 1) as f64).unwrap();
        let frac = r.samples.iter().sum::<f64>() / r.samples.len() as f64;
        // Both members have weight 1; every in-bounds proposal is accepted.
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn non_finite_statistic_aborts() {
        let (x, cfg, basis) = two_by_two_setup();
        let chain = ChainConfig::new(100, 10, 1);
        let err = walk(&x, &cfg, &basis, &chain, |t: &Table| {
            if t.get(1, 1) == 0 {
                f64::NAN
            } else {
                1.0
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteStatistic { .. }));
    }

    #[test]
    fn pooled_chains_use_consecutive_seeds() {
        let (x, cfg, basis) = two_by_two_setup();
        let chain = ChainConfig::new(500, 50, 10);
        let pooled = run_chains(&x, &cfg, &basis, &chain, 3, Some(2), || |t: &Table| t.get(1, 1) as f64).unwrap();
        let seeds: Vec<u64> = pooled.chains.iter().map(|c| c.seed).collect();
        assert_eq!(seeds, vec![10, 11, 12]);
        let single = walk(&x, &cfg, &basis, &ChainConfig { seed: 11, ..chain }, |t: &Table| t.get(1, 1) as f64).unwrap();
        assert_eq!(single.samples, pooled.chains[1].samples);
        assert!(pooled.between_chain_se.is_some());
    }
}
