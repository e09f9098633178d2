//! Checks on the coupled sampler: marginal validity of each arm and pathwise
//! time orderings for the allocation contrasts used in the sign arguments.
//!
//! Dominance checks are exact assertions on every sample. A single violation
//! is a failure.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::estimators::{estimate, ClusterObservation, TrialData};
use crate::model::{Cluster, ModelParams};
use crate::oracle::exact_de;
use crate::randomization::{DesignKind, DesignSpec};
use crate::rng::stream;
use crate::simulator::{simulate, simulate_coupled, CoupledOutcome};
use crate::stats::{chi_square_two_sample, ChiSquareTest, Summary};

/// Largest cluster for the outcome-histogram test (`2^n` cells).
pub const MAX_HISTOGRAM_SIZE: usize = 6;

const STREAM_COUPLED: u64 = 0xC0;
const STREAM_TREATED: u64 = 0xC1;
const STREAM_CONTROL: u64 = 0xC2;
const STREAM_DOMINANCE: u64 = 0xD0;
const STREAM_SETTINGS: u64 = 0x5E;
const STREAM_AGREEMENT: u64 = 0xA0;

#[derive(Debug, Clone, Serialize)]
pub struct ArmTest {
    pub coupled_histogram: Vec<u64>,
    pub independent_histogram: Vec<u64>,
    pub test: ChiSquareTest,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalValidityReport {
    pub n_samples: usize,
    pub treated: ArmTest,
    pub control: ArmTest,
    /// Every coupled sample had bit-identical arms (expected when `x1 == x0`).
    pub arms_identical: bool,
}

impl MarginalValidityReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.treated.test.p_value > threshold && self.control.test.p_value > threshold
    }
}

fn histogram(masks: &[usize], n: usize) -> Vec<u64> {
    let mut h = vec![0u64; 1 << n];
    for &m in masks {
        h[m] += 1;
    }
    h
}

fn check_null_beta(params: &ModelParams) -> Result<()> {
    if params.beta != 0.0 {
        return Err(Error::CouplingRequiresNullBeta(params.beta));
    }
    Ok(())
}

/// Compare each arm of the coupled sampler with the independent sampler
/// under the same allocation, by a chi-square test on the `2^n` histogram of
/// infection-by-horizon patterns.
pub fn check_marginal_validity(
    params: &ModelParams,
    cluster: &Cluster,
    x1: &[bool],
    x0: &[bool],
    n_samples: usize,
    seed: u64,
) -> Result<MarginalValidityReport> {
    check_null_beta(params)?;
    let n = cluster.size();
    if n > MAX_HISTOGRAM_SIZE {
        return Err(Error::ClusterTooLarge {
            n,
            max: MAX_HISTOGRAM_SIZE,
        });
    }
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be positive"));
    }
    let treated_cluster = cluster.with_treatment(x1)?;
    let control_cluster = cluster.with_treatment(x0)?;

    let coupled: Vec<(usize, usize, bool)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let c = simulate_coupled(params, cluster, x1, x0, &mut stream(seed, &[STREAM_COUPLED, i]))?;
            let identical = c.outcome_treated.infection_time == c.outcome_control.infection_time;
            Ok((
                c.outcome_treated.outcome_mask(),
                c.outcome_control.outcome_mask(),
                identical,
            ))
        })
        .collect::<Result<_>>()?;
    let independent = |c: &Cluster, tag: u64| -> Result<Vec<usize>> {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| Ok(simulate(params, c, &mut stream(seed, &[tag, i]))?.outcome_mask()))
            .collect()
    };
    let independent_treated = independent(&treated_cluster, STREAM_TREATED)?;
    let independent_control = independent(&control_cluster, STREAM_CONTROL)?;

    let arm = |coupled_masks: Vec<usize>, independent_masks: &[usize]| {
        let coupled_histogram = histogram(&coupled_masks, n);
        let independent_histogram = histogram(independent_masks, n);
        let test = chi_square_two_sample(&coupled_histogram, &independent_histogram);
        ArmTest {
            coupled_histogram,
            independent_histogram,
            test,
        }
    };
    let arms_identical = coupled.iter().all(|&(_, _, same)| same);
    Ok(MarginalValidityReport {
        n_samples,
        treated: arm(coupled.iter().map(|c| c.0).collect(), &independent_treated),
        control: arm(coupled.iter().map(|c| c.1).collect(), &independent_control),
        arms_identical,
    })
}

/// Pair of allocations compared by a dominance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Contrast {
    /// `x1` = everyone treated, `x0` = nobody treated.
    ClusterAllVsNone,
    /// `x1` treats `j` but not `k`, `x0` treats `k` but not `j`; the other
    /// members follow `z` (in index order, skipping `j` and `k`) in both.
    BlockSwapPair { j: usize, k: usize, z: Vec<bool> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GammaSign {
    Negative,
    Zero,
    Positive,
}

impl GammaSign {
    pub fn of(gamma: f64) -> Self {
        if gamma < 0.0 {
            GammaSign::Negative
        } else if gamma > 0.0 {
            GammaSign::Positive
        } else {
            GammaSign::Zero
        }
    }
}

/// Pathwise ordering of infection times in the `x1` arm relative to `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Ordering {
    /// `T1 >= T0`.
    TreatedLater,
    /// Both arms bit-identical.
    Identical,
    /// `T1 <= T0`.
    TreatedEarlier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceSpec {
    pub contrast: Contrast,
    pub gamma_sign: GammaSign,
    pub expected: Ordering,
}

impl DominanceSpec {
    /// Spec with the ordering implied by the contrast and the sign of gamma.
    ///
    /// All-vs-none: treated infectives transmit less when `gamma < 0`, so
    /// everyone is infected no earlier in the `x1` arm. Swap pair: before `k`
    /// is infected the arms agree; afterwards `k` is untreated in `x1`, so
    /// with `gamma < 0` subject `j` is infected no later in `x1`.
    pub fn new(contrast: Contrast, gamma_sign: GammaSign) -> Self {
        let expected = match (&contrast, gamma_sign) {
            (_, GammaSign::Zero) => Ordering::Identical,
            (Contrast::ClusterAllVsNone, GammaSign::Negative) => Ordering::TreatedLater,
            (Contrast::ClusterAllVsNone, GammaSign::Positive) => Ordering::TreatedEarlier,
            (Contrast::BlockSwapPair { .. }, GammaSign::Negative) => Ordering::TreatedEarlier,
            (Contrast::BlockSwapPair { .. }, GammaSign::Positive) => Ordering::TreatedLater,
        };
        DominanceSpec {
            contrast,
            gamma_sign,
            expected,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if DominanceSpec::new(self.contrast.clone(), self.gamma_sign).expected != self.expected {
            return Err(Error::Config(format!(
                "expected ordering {:?} inconsistent with {:?} under gamma sign {:?}",
                self.expected, self.contrast, self.gamma_sign
            )));
        }
        Ok(())
    }

    /// The `(x1, x0)` allocations for a cluster of size `n`.
    pub fn allocations(&self, n: usize) -> Result<(Vec<bool>, Vec<bool>)> {
        match &self.contrast {
            Contrast::ClusterAllVsNone => Ok((vec![true; n], vec![false; n])),
            Contrast::BlockSwapPair { j, k, z } => {
                let (j, k) = (*j, *k);
                if j >= n || k >= n || j == k {
                    return Err(invalid("contrast", "j and k must be distinct members of the cluster"));
                }
                if z.len() != n - 2 {
                    return Err(Error::LengthMismatch {
                        what: "z",
                        expected: n - 2,
                        actual: z.len(),
                    });
                }
                let mut rest = z.iter();
                let mut x1 = Vec::with_capacity(n);
                for i in 0..n {
                    x1.push(if i == j {
                        true
                    } else if i == k {
                        false
                    } else {
                        *rest.next().expect("length checked")
                    });
                }
                let mut x0 = x1.clone();
                x0[j] = false;
                x0[k] = true;
                Ok((x1, x0))
            }
        }
    }

    fn subjects(&self, n: usize) -> Vec<usize> {
        match &self.contrast {
            Contrast::ClusterAllVsNone => (0..n).collect(),
            Contrast::BlockSwapPair { j, .. } => vec![*j],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub spec: DominanceSpec,
    pub n_samples: usize,
    /// Samples with at least one failed assertion.
    pub violations: usize,
    /// Samples in which a strict inequality was required.
    pub strict_events: usize,
    /// Of those, samples where it did not hold.
    pub strict_violations: usize,
    /// Mean and maximum `|T1 - T0|` over checked subjects and samples.
    pub mean_gap: f64,
    pub max_gap: f64,
}

#[derive(Default)]
struct SampleCheck {
    violated: bool,
    strict_event: bool,
    strict_violated: bool,
    gap_sum: f64,
    gap_max: f64,
    gap_count: usize,
}

fn check_sample(spec: &DominanceSpec, outcome: &CoupledOutcome, n: usize) -> SampleCheck {
    let t1 = &outcome.outcome_treated.infection_time;
    let t0 = &outcome.outcome_control.infection_time;
    let mut check = SampleCheck::default();
    if spec.expected == Ordering::Identical {
        check.violated = t1 != t0;
        return check;
    }
    let position: Vec<usize> = {
        let mut pos = vec![usize::MAX; n];
        for (step, &v) in outcome.shared_order.iter().enumerate() {
            pos[v] = step;
        }
        pos
    };
    let first = outcome.shared_order.first().copied();
    for subject in spec.subjects(n) {
        let (a, b) = (t1[subject], t0[subject]);
        let weak_ok = match spec.expected {
            Ordering::TreatedLater => a >= b,
            Ordering::TreatedEarlier => a <= b,
            Ordering::Identical => unreachable!(),
        };
        // strictness holds once the arms' infective sets differ in treatment
        let strict_required = match &spec.contrast {
            Contrast::ClusterAllVsNone => Some(subject) != first,
            Contrast::BlockSwapPair { k, .. } => position[*k] < position[subject],
        };
        if strict_required {
            check.strict_event = true;
            if a == b {
                check.strict_violated = true;
            }
        }
        if !weak_ok || (strict_required && a == b) {
            check.violated = true;
        }
        let gap = (a - b).abs();
        check.gap_sum += gap;
        check.gap_max = check.gap_max.max(gap);
        check.gap_count += 1;
    }
    check
}

/// Run `n_samples` coupled simulations of the spec's allocation pair and
/// count samples violating the prescribed pathwise ordering.
pub fn check_dominance(
    spec: &DominanceSpec,
    params: &ModelParams,
    cluster: &Cluster,
    n_samples: usize,
    seed: u64,
) -> Result<DominanceReport> {
    check_null_beta(params)?;
    spec.validate()?;
    if GammaSign::of(params.gamma) != spec.gamma_sign {
        return Err(Error::Config(format!(
            "gamma = {} does not have sign {:?}",
            params.gamma, spec.gamma_sign
        )));
    }
    let n = cluster.size();
    let (x1, x0) = spec.allocations(n)?;
    let checks: Vec<SampleCheck> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let outcome = simulate_coupled(params, cluster, &x1, &x0, &mut stream(seed, &[STREAM_DOMINANCE, i]))?;
            Ok(check_sample(spec, &outcome, n))
        })
        .collect::<Result<_>>()?;
    let gap_count: usize = checks.iter().map(|c| c.gap_count).sum();
    let gap_sum: f64 = checks.iter().map(|c| c.gap_sum).sum();
    Ok(DominanceReport {
        spec: spec.clone(),
        n_samples,
        violations: checks.iter().filter(|c| c.violated).count(),
        strict_events: checks.iter().filter(|c| c.strict_event).count(),
        strict_violations: checks.iter().filter(|c| c.strict_violated).count(),
        mean_gap: if gap_count == 0 {
            0.0
        } else {
            gap_sum / gap_count as f64
        },
        max_gap: checks.iter().map(|c| c.gap_max).fold(0.0, f64::max),
    })
}

/// A `gamma` and allocation pair for a marginal-validity run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSetting {
    pub gamma: f64,
    pub x1: Vec<bool>,
    pub x0: Vec<bool>,
}

/// `count` settings with `gamma ~ U(-2, 2)` and fair-coin allocations.
pub fn random_coupling_settings(n: usize, count: usize, seed: u64) -> Vec<CouplingSetting> {
    let mut rng = stream(seed, &[STREAM_SETTINGS, n as u64]);
    (0..count)
        .map(|_| {
            let gamma = rng.random_range(-2.0..2.0);
            let x1 = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let x0 = (0..n).map(|_| rng.random_bool(0.5)).collect();
            CouplingSetting { gamma, x1, x0 }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleAgreementReport {
    pub design: DesignKind,
    pub exact_de: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub n_replicates: usize,
    pub n_degenerate: usize,
}

impl OracleAgreementReport {
    pub fn z_score(&self) -> f64 {
        (self.mc_mean - self.exact_de) / self.mc_se
    }

    pub fn within(&self, standard_errors: f64) -> bool {
        self.z_score().abs() <= standard_errors
    }
}

/// Monte Carlo mean of the design's estimator against the exact direct
/// effect at `cluster.horizon()`.
///
/// Each replicate is a trial of `n_clusters` copies of `cluster`, so the
/// cluster-design estimator has both arms in most replicates. Degenerate
/// replicates are dropped.
pub fn check_oracle_agreement(
    params: &ModelParams,
    cluster: &Cluster,
    design: &DesignSpec,
    n_clusters: usize,
    n_replicates: usize,
    seed: u64,
) -> Result<OracleAgreementReport> {
    if n_clusters == 0 || n_replicates < 2 {
        return Err(invalid("replication", "need at least one cluster and two replicates"));
    }
    let exact = exact_de(params, cluster, design, cluster.horizon())?.cluster_average;
    let n = cluster.size();
    let results = (0..n_replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let observations = (0..n_clusters as u64)
                .map(|c| {
                    let x = design.assign(n, &mut stream(seed, &[STREAM_AGREEMENT, rep, c, 0]))?;
                    let treated = cluster.with_treatment(&x)?;
                    let outcome = simulate(params, &treated, &mut stream(seed, &[STREAM_AGREEMENT, rep, c, 1]))?;
                    ClusterObservation::new(x, outcome.infected_by_horizon)
                })
                .collect::<Result<Vec<_>>>()?;
            estimate(&TrialData::new(observations, *design)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().filter(|r| !r.degenerate).map(|r| r.de_hat).collect();
    let summary = Summary::of(&values);
    Ok(OracleAgreementReport {
        design: design.kind,
        exact_de: exact,
        mc_mean: summary.mean,
        mc_se: summary.standard_error(),
        n_replicates,
        n_degenerate: n_replicates - values.len(),
    })
}
