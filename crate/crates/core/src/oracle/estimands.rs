//! Exact direct-effect estimands by enumerating allocations.
//!
//! The individual average potential outcome
//!
//! ```text
//! Ybar_j(t, x) = sum_{x_others} Ybar_j(t, x, x_others) P(X_others = x_others | X_j = x)
//! ```
//!
//! is evaluated by running the chain oracle once per allocation with nonzero
//! weight. Individual coefficients (`eta`, `xi`) and the horizon are taken
//! from the cluster as fixed inputs.

use crate::error::{Error, Result};
use crate::model::{Cluster, ModelParams};
use crate::oracle::ctmc::exact_marginals;
use crate::randomization::{binomial, bits, DesignSpec};

/// Largest cluster accepted by the allocation enumeration.
pub const MAX_ENUMERATION_SIZE: usize = 10;
/// Largest cluster accepted by [`check_block_decomposition`].
pub const MAX_DECOMPOSITION_SIZE: usize = 8;

/// Per-allocation marginals, computed on first use.
struct AllocationOracle<'a> {
    params: &'a ModelParams,
    base: &'a Cluster,
    t: f64,
    cache: Vec<Option<Vec<f64>>>,
}

impl<'a> AllocationOracle<'a> {
    fn new(params: &'a ModelParams, base: &'a Cluster, t: f64, max: usize) -> Result<Self> {
        let n = base.size();
        if n > max {
            return Err(Error::ClusterTooLarge { n, max });
        }
        Ok(AllocationOracle {
            params,
            base,
            t,
            cache: vec![None; 1 << n],
        })
    }

    fn marginal(&mut self, allocation: usize, j: usize) -> Result<f64> {
        if self.cache[allocation].is_none() {
            let cluster = self.base.with_treatment(&bits(allocation, self.base.size()))?;
            self.cache[allocation] = Some(exact_marginals(self.params, &cluster, self.t)?);
        }
        Ok(self.cache[allocation].as_ref().expect("filled above")[j])
    }

    /// `Ybar_j(t, x_j, others)` where `others` indexes the `n - 1` other members.
    fn outcome(&mut self, j: usize, x_j: bool, others: usize) -> Result<f64> {
        let allocation = insert_bit(others, j, x_j);
        self.marginal(allocation, j)
    }

    fn individual_average(&mut self, design: &DesignSpec, j: usize, x_j: bool) -> Result<f64> {
        let n = self.base.size();
        if design.marginal_treatment_prob(n, x_j)? == 0.0 {
            return Err(Error::ZeroProbabilityConditioning { x_j });
        }
        let mut total = 0.0;
        for others in 0..1usize << (n - 1) {
            let weight = design.conditional_pmf_others(n, j, x_j, &bits(others, n - 1))?;
            if weight > 0.0 {
                total += weight * self.outcome(j, x_j, others)?;
            }
        }
        Ok(total)
    }
}

/// Insert bit `value` at position `j`, shifting higher bits up.
fn insert_bit(others: usize, j: usize, value: bool) -> usize {
    let low = others & ((1 << j) - 1);
    let high = (others >> j) << (j + 1);
    low | high | (usize::from(value) << j)
}

fn check_index(cluster: &Cluster, j: usize) -> Result<()> {
    if j >= cluster.size() {
        return Err(Error::IndexOutOfRange {
            index: j,
            size: cluster.size(),
        });
    }
    Ok(())
}

/// Exact `Ybar_j(t, x_j)` under the design.
pub fn exact_individual_average(
    params: &ModelParams,
    cluster_base: &Cluster,
    design: &DesignSpec,
    j: usize,
    x_j: bool,
    t: f64,
) -> Result<f64> {
    check_index(cluster_base, j)?;
    let mut oracle = AllocationOracle::new(params, cluster_base, t, MAX_ENUMERATION_SIZE)?;
    oracle.individual_average(design, j, x_j)
}

/// Exact individual and cluster average direct effects.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDirectEffect {
    pub per_individual: Vec<f64>,
    pub cluster_average: f64,
}

pub fn exact_de(
    params: &ModelParams,
    cluster_base: &Cluster,
    design: &DesignSpec,
    t: f64,
) -> Result<ExactDirectEffect> {
    let mut oracle = AllocationOracle::new(params, cluster_base, t, MAX_ENUMERATION_SIZE)?;
    let n = cluster_base.size();
    let per_individual = (0..n)
        .map(|j| Ok(oracle.individual_average(design, j, true)? - oracle.individual_average(design, j, false)?))
        .collect::<Result<Vec<f64>>>()?;
    let cluster_average = per_individual.iter().sum::<f64>() / n as f64;
    Ok(ExactDirectEffect {
        per_individual,
        cluster_average,
    })
}

/// `C(n-1, m) * m == (n - m) * C(n-1, m-1)`, checked in exact integers.
pub fn binomial_identity_holds(n: usize, m: usize) -> bool {
    assert!(1 <= m && m < n, "requires 1 <= m < n");
    binomial(n - 1, m) * m as u128 == (n - m) as u128 * binomial(n - 1, m - 1)
}

/// Evaluate both sides of the partner-set decomposition of the block-design
/// direct effect for individual `j` with `m` treated per cluster:
///
/// ```text
/// LHS = C(n-1,m-1)^-1 sum_{|z|=m-1} Ybar_j(1,z) - C(n-1,m)^-1 sum_{|w|=m} Ybar_j(0,w)
/// RHS = C(n-1,m-1)^-1 (n-m)^-1 sum_{|z|=m-1} sum_{w in P(z)} (Ybar_j(1,z) - Ybar_j(0,w))
/// ```
///
/// where `P(z)` holds the `n - m` vectors that add one treated member to `z`.
/// Returns `|LHS - RHS|`.
pub fn check_block_decomposition(
    params: &ModelParams,
    cluster_base: &Cluster,
    m: usize,
    j: usize,
    t: f64,
) -> Result<f64> {
    let n = cluster_base.size();
    check_index(cluster_base, j)?;
    if m == 0 || m >= n {
        return Err(Error::DegenerateBlockDesign {
            p: m as f64 / n as f64,
            n,
            treated: m,
        });
    }
    let mut oracle = AllocationOracle::new(params, cluster_base, t, MAX_DECOMPOSITION_SIZE)?;
    let others = n - 1;
    let with_weight = |k: usize| (0..1usize << others).filter(move |v: &usize| v.count_ones() as usize == k);

    let mut treated_sum = 0.0;
    for z in with_weight(m - 1) {
        treated_sum += oracle.outcome(j, true, z)?;
    }
    let mut control_sum = 0.0;
    for w in with_weight(m) {
        control_sum += oracle.outcome(j, false, w)?;
    }
    let lhs = treated_sum / binomial(others, m - 1) as f64 - control_sum / binomial(others, m) as f64;

    let mut paired = 0.0;
    for z in with_weight(m - 1) {
        let treated = oracle.outcome(j, true, z)?;
        for extra in (0..others).filter(|&b| z >> b & 1 == 0) {
            paired += treated - oracle.outcome(j, false, z | 1 << extra)?;
        }
    }
    let rhs = paired / binomial(others, m - 1) as f64 / (n - m) as f64;
    Ok((lhs - rhs).abs())
}
