//! Exact conditional goodness-of-fit tests for two-way contingency tables
//! under subtable-effect log-linear models.
//!
//! The crate builds Markov bases for change point and block diagonal effect
//! models, walks fibers with a Metropolis–Hastings sampler, fits the models
//! by iterative proportional scaling, and ships brute-force oracles
//! (fiber enumeration, connectivity, indispensability, S-pair reduction)
//! that check the structural claims on small grids.

pub mod cli;
pub mod configuration;
pub mod datasets;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod logfact;
pub mod mcmc;
pub mod models;
pub mod moves;
pub mod oracle;
pub mod table;
pub mod toric;
pub mod verify;

pub use configuration::{build_configuration, config_rank, degrees_of_freedom, sufficient_statistic, Configuration, SufficientStat};
pub use error::{Error, Result};
pub use fit::{chi_square, g_squared, ipf_fit, llr_nested, FitOptions, FitResult, FittedStatistic, StatKind};
pub use mcmc::{estimate_pvalue, run_chains, walk, ChainConfig, ChainResult, PooledResult};
pub use models::{is_nested, BlockBounds, BlockIndex, Model, ModelSpec};
pub use moves::{basis_block, basis_change_point, is_kernel_move, markov_basis, random_move, BasisOptions, Move, MoveBasis, MoveType};
pub use oracle::{enumerate_fiber, exact_pvalue, indispensable, is_connected, Fiber};
pub use table::{CellSet, Rectangle, Table};
pub use toric::{verify_grobner, GrobnerReport};
