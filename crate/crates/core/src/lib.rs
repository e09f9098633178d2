//! Within-cluster contagion, randomized treatment designs and the direct
//! effect.
//!
//! The crate simulates a susceptible-infective transmission model in which
//! treatment can change both a person's susceptibility (`beta`) and how
//! infectious they are once infected (`gamma`), assigns treatment by
//! Bernoulli, block or cluster randomization, and estimates the resulting
//! direct effect. Small clusters can be solved exactly through a Markov chain
//! over infection subsets, which gives ground truth for every Monte Carlo
//! check.
//!
//! ```
//! use contagion_de::prelude::*;
//!
//! let params = ModelParams::new(0.01, 0.0, -1.0).unwrap();
//! let cluster = Cluster::homogeneous(3, 10.0).unwrap();
//! let design = DesignSpec::block(0.5).unwrap();
//! let de = exact_de(&params, &cluster, &design, 10.0).unwrap();
//! // treated infectives transmit less, so under block randomization the
//! // treated are exposed to more infectiousness
//! assert!(de.cluster_average > 0.0);
//! ```

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod randomization;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod verification;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::estimators::{
        de_hat_bernoulli, de_hat_block, de_hat_cluster, estimate, ClusterObservation, TrialData, TrialResult,
    };
    pub use crate::experiments::{
        run_heatmap, run_replicate, run_sweep, verify_propositions, ExperimentConfig, SweepResult,
    };
    pub use crate::model::{hazard, Cluster, CoefficientDist, EpidemicState, ModelParams};
    pub use crate::oracle::{exact_de, exact_individual_average, exact_marginals};
    pub use crate::randomization::{DesignKind, DesignSpec};
    pub use crate::rng::stream;
    pub use crate::simulator::{simulate, simulate_coupled, CoupledOutcome, EpidemicOutcome};
}

// Guide chapters compiled as doctests so the book stays runnable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/designs.md")]
    mod designs {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
