//! Direct-effect estimators for a realized trial.
//!
//! The Bernoulli estimator is inverse-probability weighted with the known
//! `p`; the block and cluster estimators are differences of arm means. They
//! are implemented exactly as written, so the Bernoulli form is not a Hájek
//! ratio.

use crate::error::{invalid, Error, Result};
use crate::randomization::{DesignKind, DesignSpec};

/// Treatment and outcome of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterObservation {
    pub treatment: Vec<bool>,
    pub infected: Vec<bool>,
}

impl ClusterObservation {
    pub fn new(treatment: Vec<bool>, infected: Vec<bool>) -> Result<Self> {
        if treatment.len() != infected.len() {
            return Err(Error::LengthMismatch {
                what: "infected",
                expected: treatment.len(),
                actual: infected.len(),
            });
        }
        if treatment.is_empty() {
            return Err(invalid("cluster", "observation must cover at least one individual"));
        }
        Ok(ClusterObservation { treatment, infected })
    }

    pub fn size(&self) -> usize {
        self.treatment.len()
    }

    /// Cluster-level arm flag: whole cluster treated.
    pub fn arm(&self) -> bool {
        self.treatment.iter().all(|&x| x)
    }

    fn infected_fraction(&self) -> f64 {
        self.infected.iter().filter(|&&y| y).count() as f64 / self.size() as f64
    }
}

/// All observations of one trial under one design.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    pub clusters: Vec<ClusterObservation>,
    pub design: DesignSpec,
}

impl TrialData {
    pub fn new(clusters: Vec<ClusterObservation>, design: DesignSpec) -> Result<Self> {
        if design.kind == DesignKind::Cluster {
            for c in &clusters {
                let first = c.treatment[0];
                if c.treatment.iter().any(|&x| x != first) {
                    return Err(invalid("treatment", "cluster design requires all-or-none treatment"));
                }
            }
        }
        Ok(TrialData { clusters, design })
    }
}

/// Point estimate for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    /// NaN when `degenerate`.
    pub de_hat: f64,
    pub n_clusters_used: usize,
    /// An arm was empty and the estimate is undefined.
    pub degenerate: bool,
}

impl TrialResult {
    fn defined(de_hat: f64, n_clusters_used: usize) -> Self {
        TrialResult {
            de_hat,
            n_clusters_used,
            degenerate: false,
        }
    }

    fn degenerate(n_clusters_used: usize) -> Self {
        TrialResult {
            de_hat: f64::NAN,
            n_clusters_used,
            degenerate: true,
        }
    }
}

/// `(1/N) sum_i (1/n_i) sum_j [y x / p - y (1 - x) / (1 - p)]`.
pub fn de_hat_bernoulli(data: &TrialData, p: f64) -> Result<TrialResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", "treatment probability must lie in (0, 1)"));
    }
    let n_clusters = data.clusters.len();
    if n_clusters == 0 {
        return Ok(TrialResult::degenerate(0));
    }
    let total: f64 = data
        .clusters
        .iter()
        .map(|c| {
            let s: f64 = c
                .treatment
                .iter()
                .zip(&c.infected)
                .filter(|(_, &y)| y)
                .map(|(&x, _)| if x { 1.0 / p } else { -1.0 / (1.0 - p) })
                .sum();
            s / c.size() as f64
        })
        .sum();
    Ok(TrialResult::defined(total / n_clusters as f64, n_clusters))
}

/// Average over clusters of treated-arm minus control-arm infection fraction.
pub fn de_hat_block(data: &TrialData) -> TrialResult {
    let n_clusters = data.clusters.len();
    if n_clusters == 0 {
        return TrialResult::degenerate(0);
    }
    let mut total = 0.0;
    for c in &data.clusters {
        let (mut treated, mut treated_infected, mut control, mut control_infected) = (0usize, 0usize, 0usize, 0usize);
        for (&x, &y) in c.treatment.iter().zip(&c.infected) {
            if x {
                treated += 1;
                treated_infected += usize::from(y);
            } else {
                control += 1;
                control_infected += usize::from(y);
            }
        }
        if treated == 0 || control == 0 {
            return TrialResult::degenerate(n_clusters);
        }
        total += treated_infected as f64 / treated as f64 - control_infected as f64 / control as f64;
    }
    TrialResult::defined(total / n_clusters as f64, n_clusters)
}

/// Mean cluster infection fraction among treated clusters minus that among
/// control clusters.
pub fn de_hat_cluster(data: &TrialData) -> TrialResult {
    let n_clusters = data.clusters.len();
    let (mut treated, mut treated_sum, mut control, mut control_sum) = (0usize, 0.0, 0usize, 0.0);
    for c in &data.clusters {
        if c.arm() {
            treated += 1;
            treated_sum += c.infected_fraction();
        } else {
            control += 1;
            control_sum += c.infected_fraction();
        }
    }
    if treated == 0 || control == 0 {
        return TrialResult::degenerate(n_clusters);
    }
    TrialResult::defined(treated_sum / treated as f64 - control_sum / control as f64, n_clusters)
}

/// Apply the estimator matching `data.design`.
pub fn estimate(data: &TrialData) -> Result<TrialResult> {
    match data.design.kind {
        DesignKind::Bernoulli => de_hat_bernoulli(data, data.design.p),
        DesignKind::Block => Ok(de_hat_block(data)),
        DesignKind::Cluster => Ok(de_hat_cluster(data)),
    }
}
