//! Monte Carlo harness: trials, parameter sweeps, heatmaps and sign checks.

pub mod config;
pub mod harness;
pub mod propositions;

pub use config::{ClusterSizeDist, CoefficientMode, ExperimentConfig, Grid, HorizonDist, SweepSpec, DEFAULT_SEED};
pub use harness::{
    run_heatmap, run_replicate, run_sweep, simulate_trial, HeatmapResult, MaskCell, SimulatedTrial, SweepResult,
    SweepRow, MASK_HEADER, SWEEP_HEADER,
};
pub use propositions::{expected_verdict, verify_propositions, PropositionCheck, PropositionReport, Verdict};
