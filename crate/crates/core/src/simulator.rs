//! Event-driven samplers for infection-time trajectories.
//!
//! Between infections every hazard is constant, so the time to the next
//! infection is exponential with the total rate
//!
//! ```text
//! rate = sum_{a in S} s_a * (alpha + sum_{b in I} f_b)
//! ```
//!
//! with `s_a = exp(x_a beta + eta_a)` and `f_b = exp(x_b gamma + xi_b)`. The
//! infectious pressure in parentheses is shared by all susceptibles, so the
//! next infected individual is drawn with probability `s_v / sum_{a in S} s_a`.
//!
//! Both samplers generate the full infection sequence (all `n` infections;
//! finite almost surely because `alpha > 0`) and threshold at the horizon
//! afterwards. Waiting times always come from the inverse CDF of a single
//! uniform, which is what lets [`simulate_coupled`] drive two allocations with
//! the same draws.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{Cluster, ModelParams};

/// `P(W <= w)` for an exponential waiting time with the given rate.
pub fn waiting_time_cdf(rate: f64, w: f64) -> Result<f64> {
    check_rate(rate)?;
    if w.is_nan() || w < 0.0 {
        return Err(invalid("w", "waiting time must be non-negative"));
    }
    Ok(-(-rate * w).exp_m1())
}

/// Inverse of [`waiting_time_cdf`]: `-ln(1 - u) / rate`.
pub fn waiting_time_quantile(rate: f64, u: f64) -> Result<f64> {
    check_rate(rate)?;
    if !(0.0..1.0).contains(&u) {
        return Err(invalid("u", "uniform must lie in [0, 1)"));
    }
    Ok(quantile_unchecked(rate, u))
}

#[inline]
fn quantile_unchecked(rate: f64, u: f64) -> f64 {
    -(-u).ln_1p() / rate
}

#[inline]
fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate(rate))
    }
}

/// Infection times of one simulated cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicOutcome {
    /// Infection time per individual; `0` for initial infections,
    /// `f64::INFINITY` if never infected.
    pub infection_time: Vec<f64>,
    /// `infection_time[j] < horizon`.
    pub infected_by_horizon: Vec<bool>,
    /// Individuals infected during the run, in infection order. Initial
    /// infections are not listed.
    pub order: Vec<usize>,
}

impl EpidemicOutcome {
    fn from_times(infection_time: Vec<f64>, order: Vec<usize>, horizon: f64) -> Self {
        let infected_by_horizon = infection_time.iter().map(|&t| t < horizon).collect();
        EpidemicOutcome {
            infection_time,
            infected_by_horizon,
            order,
        }
    }

    /// Number infected by the horizon.
    pub fn attack_count(&self) -> usize {
        self.infected_by_horizon.iter().filter(|&&y| y).count()
    }

    /// `infected_by_horizon` as a bitmask (bit `j` set when `j` is infected).
    pub fn outcome_mask(&self) -> usize {
        self.infected_by_horizon
            .iter()
            .enumerate()
            .filter(|(_, &y)| y)
            .fold(0, |m, (j, _)| m | (1 << j))
    }
}

/// Outcomes of two allocations built from shared randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOutcome {
    /// Outcome under `x1`.
    pub outcome_treated: EpidemicOutcome,
    /// Outcome under `x0`.
    pub outcome_control: EpidemicOutcome,
    /// The uniform behind each step's waiting time, in step order.
    pub shared_uniforms: Vec<f64>,
    /// Common infection order of both arms.
    pub shared_order: Vec<usize>,
}

fn pick<R: Rng + ?Sized>(rng: &mut R, susceptible: &[usize], weights: &[f64], total: f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &a in susceptible {
        acc += weights[a];
        if target < acc {
            return a;
        }
    }
    // rounding in the running sum
    *susceptible.last().expect("nonempty susceptible set")
}

fn check_advance(prev: f64, next: f64) -> Result<()> {
    if next <= prev {
        Err(Error::TiedInfectionTimes(next))
    } else {
        Ok(())
    }
}

/// Sample one trajectory of the transmission model.
pub fn simulate<R: Rng + ?Sized>(params: &ModelParams, cluster: &Cluster, rng: &mut R) -> Result<EpidemicOutcome> {
    let n = cluster.size();
    let x = cluster.treatment();
    let susceptibility: Vec<f64> = (0..n)
        .map(|a| params.susceptibility_weight(x[a], cluster.eta()[a]))
        .collect();
    let infectiousness: Vec<f64> = (0..n)
        .map(|b| params.infectiousness_weight(x[b], cluster.xi()[b]))
        .collect();

    let mut infection_time = vec![f64::INFINITY; n];
    let mut susceptible = Vec::with_capacity(n);
    let mut pressure = params.alpha;
    for j in 0..n {
        if cluster.initial_infected()[j] {
            infection_time[j] = 0.0;
            pressure += infectiousness[j];
        } else {
            susceptible.push(j);
        }
    }
    if susceptible.is_empty() {
        return Err(Error::NoSusceptibles);
    }

    let mut order = Vec::with_capacity(susceptible.len());
    let mut now = 0.0;
    while !susceptible.is_empty() {
        let total_susceptibility: f64 = susceptible.iter().map(|&a| susceptibility[a]).sum();
        let rate = total_susceptibility * pressure;
        check_rate(rate)?;
        let u = rng.random::<f64>();
        let next = now + quantile_unchecked(rate, u);
        check_advance(now, next)?;
        let v = pick(rng, &susceptible, &susceptibility, total_susceptibility);
        now = next;
        infection_time[v] = now;
        order.push(v);
        pressure += infectiousness[v];
        susceptible.retain(|&a| a != v);
    }
    Ok(EpidemicOutcome::from_times(infection_time, order, cluster.horizon()))
}

/// Sample two allocations `x1`, `x0` jointly: one uniform per step sets both
/// arms' waiting times by inversion, and one shared draw picks the next
/// infected individual, so the infection order is identical in both arms.
///
/// Only valid when `beta == 0`, in which case the selection weights
/// `exp(eta_v)` do not depend on treatment. Each arm is then marginally
/// distributed as [`simulate`] under its allocation.
pub fn simulate_coupled<R: Rng + ?Sized>(
    params: &ModelParams,
    cluster_base: &Cluster,
    x1: &[bool],
    x0: &[bool],
    rng: &mut R,
) -> Result<CoupledOutcome> {
    if params.beta != 0.0 {
        return Err(Error::CouplingRequiresNullBeta(params.beta));
    }
    let n = cluster_base.size();
    for (what, x) in [("x1", x1), ("x0", x0)] {
        if x.len() != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                actual: x.len(),
            });
        }
    }
    let selection: Vec<f64> = cluster_base
        .eta()
        .iter()
        .map(|&eta| params.susceptibility_weight(false, eta))
        .collect();
    let infectiousness = |x: &[bool]| -> Vec<f64> {
        (0..n)
            .map(|b| params.infectiousness_weight(x[b], cluster_base.xi()[b]))
            .collect()
    };
    let infectiousness1 = infectiousness(x1);
    let infectiousness0 = infectiousness(x0);

    let mut time1 = vec![f64::INFINITY; n];
    let mut time0 = vec![f64::INFINITY; n];
    let mut susceptible = Vec::with_capacity(n);
    let (mut pressure1, mut pressure0) = (params.alpha, params.alpha);
    for j in 0..n {
        if cluster_base.initial_infected()[j] {
            time1[j] = 0.0;
            time0[j] = 0.0;
            pressure1 += infectiousness1[j];
            pressure0 += infectiousness0[j];
        } else {
            susceptible.push(j);
        }
    }
    if susceptible.is_empty() {
        return Err(Error::NoSusceptibles);
    }

    let steps = susceptible.len();
    let mut order = Vec::with_capacity(steps);
    let mut uniforms = Vec::with_capacity(steps);
    let (mut now1, mut now0) = (0.0, 0.0);
    while !susceptible.is_empty() {
        let total: f64 = susceptible.iter().map(|&a| selection[a]).sum();
        let rate1 = total * pressure1;
        let rate0 = total * pressure0;
        check_rate(rate1)?;
        check_rate(rate0)?;
        let u = rng.random::<f64>();
        let next1 = now1 + quantile_unchecked(rate1, u);
        let next0 = now0 + quantile_unchecked(rate0, u);
        check_advance(now1, next1)?;
        check_advance(now0, next0)?;
        let v = pick(rng, &susceptible, &selection, total);
        now1 = next1;
        now0 = next0;
        time1[v] = now1;
        time0[v] = now0;
        pressure1 += infectiousness1[v];
        pressure0 += infectiousness0[v];
        uniforms.push(u);
        order.push(v);
        susceptible.retain(|&a| a != v);
    }

    let horizon = cluster_base.horizon();
    Ok(CoupledOutcome {
        outcome_treated: EpidemicOutcome::from_times(time1, order.clone(), horizon),
        outcome_control: EpidemicOutcome::from_times(time0, order.clone(), horizon),
        shared_uniforms: uniforms,
        shared_order: order,
    })
}
