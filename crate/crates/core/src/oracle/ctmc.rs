//! Continuous-time Markov chain over infection subsets.
//!
//! State `s` is a bitmask of infected individuals. From `s` the chain moves
//! to `s | 1 << j` for each susceptible `j` at rate `lambda_j(s)`, the model
//! hazard evaluated with infective set `s`. Every transition adds exactly one
//! bit, so the chain is acyclic and the all-infected state absorbs.
//!
//! Transient distributions `pi(t) = pi(0) exp(Q t)` are computed by
//! uniformization. A fixed-step RK4 integrator of the forward equations is
//! kept as an independent second backend.

use crate::error::{Error, Result};
use crate::model::{Cluster, ModelParams};

/// Largest cluster the oracle accepts.
pub const MAX_ORACLE_SIZE: usize = 12;

/// Each uniformization step covers at most this much of `lambda * t`.
const MAX_STEP_MASS: f64 = 20.0;
/// Bound on the truncated Poisson tail per step.
const TAIL_TOLERANCE: f64 = 1e-17;
const MAX_TERMS: usize = 10_000;
const NEGATIVE_CLAMP: f64 = -1e-12;
const MASS_TOLERANCE: f64 = 1e-10;

/// Generator of the infection chain for one cluster with fixed treatment.
#[derive(Debug, Clone)]
pub struct CtmcSpec {
    n: usize,
    /// Outgoing `(target, rate)` pairs per state.
    transitions: Vec<Vec<(usize, f64)>>,
    exit_rate: Vec<f64>,
}

impl CtmcSpec {
    pub fn build(params: &ModelParams, cluster: &Cluster) -> Result<Self> {
        let n = cluster.size();
        if n > MAX_ORACLE_SIZE {
            return Err(Error::ClusterTooLarge {
                n,
                max: MAX_ORACLE_SIZE,
            });
        }
        let x = cluster.treatment();
        let susceptibility: Vec<f64> = (0..n)
            .map(|a| params.susceptibility_weight(x[a], cluster.eta()[a]))
            .collect();
        let infectiousness: Vec<f64> = (0..n)
            .map(|b| params.infectiousness_weight(x[b], cluster.xi()[b]))
            .collect();

        let n_states = 1usize << n;
        let mut transitions = Vec::with_capacity(n_states);
        let mut exit_rate = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let pressure = params.alpha
                + (0..n)
                    .filter(|&b| s >> b & 1 == 1)
                    .map(|b| infectiousness[b])
                    .sum::<f64>();
            let out: Vec<(usize, f64)> = (0..n)
                .filter(|&j| s >> j & 1 == 0)
                .map(|j| (s | 1 << j, susceptibility[j] * pressure))
                .collect();
            let total: f64 = out.iter().map(|&(_, r)| r).sum();
            if !total.is_finite() {
                return Err(Error::InvalidRate(total));
            }
            exit_rate.push(total);
            transitions.push(out);
        }
        Ok(CtmcSpec {
            n,
            transitions,
            exit_rate,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        1 << self.n
    }

    /// Dense generator matrix `Q` (row = from, column = to).
    pub fn generator(&self) -> Vec<Vec<f64>> {
        let m = self.n_states();
        let mut q = vec![vec![0.0; m]; m];
        for (s, out) in self.transitions.iter().enumerate() {
            for &(target, rate) in out {
                q[s][target] = rate;
            }
            q[s][s] = -self.exit_rate[s];
        }
        q
    }

    /// Point mass on the cluster's initial infection pattern.
    pub fn initial_distribution(&self, cluster: &Cluster) -> Vec<f64> {
        let start = cluster
            .initial_infected()
            .iter()
            .enumerate()
            .filter(|(_, &y)| y)
            .fold(0usize, |m, (j, _)| m | 1 << j);
        let mut pi = vec![0.0; self.n_states()];
        pi[start] = 1.0;
        pi
    }

    /// `pi0 exp(Q t)` by uniformization.
    pub fn transient(&self, pi0: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_input(pi0, t)?;
        let lambda = self.exit_rate.iter().cloned().fold(0.0, f64::max);
        if lambda == 0.0 || t == 0.0 {
            return Ok(pi0.to_vec());
        }
        let total_mass = lambda * t;
        let steps = (total_mass / MAX_STEP_MASS).ceil().max(1.0) as usize;
        let mass = total_mass / steps as f64;
        let mut pi = pi0.to_vec();
        for _ in 0..steps {
            pi = self.uniformization_step(&pi, lambda, mass)?;
        }
        finalize(pi)
    }

    fn uniformization_step(&self, pi: &[f64], lambda: f64, mass: f64) -> Result<Vec<f64>> {
        let mut term = pi.to_vec();
        let mut scratch = vec![0.0; term.len()];
        let mut weight = (-mass).exp();
        let mut acc: Vec<f64> = term.iter().map(|&v| v * weight).collect();
        let mut k = 0usize;
        loop {
            k += 1;
            if k > MAX_TERMS {
                return Err(Error::ToleranceNotAchieved(format!(
                    "uniformization did not converge within {MAX_TERMS} terms"
                )));
            }
            self.apply_jump_matrix(&term, &mut scratch, lambda);
            std::mem::swap(&mut term, &mut scratch);
            weight *= mass / k as f64;
            for (a, &v) in acc.iter_mut().zip(&term) {
                *a += weight * v;
            }
            let ratio = mass / (k + 1) as f64;
            if ratio < 1.0 {
                // geometric bound on the remaining Poisson tail
                let tail = weight * ratio / (1.0 - ratio);
                if tail < TAIL_TOLERANCE {
                    break;
                }
            }
        }
        Ok(acc)
    }

    /// `out = v (I + Q / lambda)`.
    fn apply_jump_matrix(&self, v: &[f64], out: &mut [f64], lambda: f64) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (s, &mass) in v.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            out[s] += mass * (1.0 - self.exit_rate[s] / lambda);
            for &(target, rate) in &self.transitions[s] {
                out[target] += mass * rate / lambda;
            }
        }
    }

    /// Forward equations `d pi / dt = pi Q` integrated by classical RK4 with
    /// fixed step `h` (the last step is shortened to land on `t`).
    pub fn transient_rk4(&self, pi0: &[f64], t: f64, h: f64) -> Result<Vec<f64>> {
        self.check_input(pi0, t)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(crate::error::invalid("h", "step must be positive"));
        }
        let mut pi = pi0.to_vec();
        let steps = (t / h).ceil() as usize;
        let m = pi.len();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut now = 0.0;
        for _ in 0..steps {
            let dt = h.min(t - now);
            if dt <= 0.0 {
                break;
            }
            self.forward_derivative(&pi, &mut k1);
            axpy(&pi, &k1, 0.5 * dt, &mut tmp);
            self.forward_derivative(&tmp, &mut k2);
            axpy(&pi, &k2, 0.5 * dt, &mut tmp);
            self.forward_derivative(&tmp, &mut k3);
            axpy(&pi, &k3, dt, &mut tmp);
            self.forward_derivative(&tmp, &mut k4);
            for i in 0..m {
                pi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            now += dt;
        }
        finalize(pi)
    }

    fn forward_derivative(&self, pi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (s, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            out[s] -= mass * self.exit_rate[s];
            for &(target, rate) in &self.transitions[s] {
                out[target] += mass * rate;
            }
        }
    }

    fn check_input(&self, pi0: &[f64], t: f64) -> Result<()> {
        if pi0.len() != self.n_states() {
            return Err(Error::LengthMismatch {
                what: "pi0",
                expected: self.n_states(),
                actual: pi0.len(),
            });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(crate::error::invalid("t", "time must be finite and non-negative"));
        }
        Ok(())
    }

    /// `P(j infected)` for each `j` under state distribution `pi`.
    pub fn infection_marginals(&self, pi: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                pi.iter()
                    .enumerate()
                    .filter(|(s, _)| s >> j & 1 == 1)
                    .map(|(_, &p)| p)
                    .sum()
            })
            .collect()
    }
}

fn axpy(base: &[f64], dir: &[f64], scale: f64, out: &mut [f64]) {
    for ((o, &b), &d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + scale * d;
    }
}

fn finalize(mut pi: Vec<f64>) -> Result<Vec<f64>> {
    for p in pi.iter_mut() {
        if *p < NEGATIVE_CLAMP {
            return Err(Error::ToleranceNotAchieved(format!("negative probability {p}")));
        }
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::ToleranceNotAchieved(format!("probability mass {total}")));
    }
    Ok(pi)
}

/// `P(j infected by t)` for every individual, with the cluster's treatment
/// and initial infections held fixed.
pub fn exact_marginals(params: &ModelParams, cluster: &Cluster, t: f64) -> Result<Vec<f64>> {
    let chain = CtmcSpec::build(params, cluster)?;
    let pi = chain.transient(&chain.initial_distribution(cluster), t)?;
    Ok(chain.infection_marginals(&pi))
}

/// [`exact_marginals`] through the RK4 backend.
pub fn exact_marginals_rk4(params: &ModelParams, cluster: &Cluster, t: f64, h: f64) -> Result<Vec<f64>> {
    let chain = CtmcSpec::build(params, cluster)?;
    let pi = chain.transient_rk4(&chain.initial_distribution(cluster), t, h)?;
    Ok(chain.infection_marginals(&pi))
}
