//! Exact small-cluster ground truth.

pub mod ctmc;
pub mod estimands;

pub use ctmc::{exact_marginals, exact_marginals_rk4, CtmcSpec, MAX_ORACLE_SIZE};
pub use estimands::{
    binomial_identity_holds, check_block_decomposition, exact_de, exact_individual_average, ExactDirectEffect,
};
