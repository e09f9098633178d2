//! Structural transmission model.
//!
//! A susceptible individual `j` in a cluster experiences the hazard
//!
//! ```text
//! lambda_j(t) = exp(x_j * beta + eta_j) * (alpha + sum_{k != j} y_k(t) * exp(x_k * gamma + xi_k))
//! ```
//!
//! where `x` is the treatment vector, `y(t)` the current infection indicators,
//! `eta`/`xi` individual susceptibility/infectiousness coefficients, `alpha`
//! the exogenous force of infection, `beta` the susceptibility effect of own
//! treatment and `gamma` the infectiousness effect of an infective's treatment.
//!
//! The susceptibility factor `exp(x_j * beta + eta_j)` and the infectiousness
//! factor `exp(x_k * gamma + xi_k)` are exposed separately as
//! [`ModelParams::susceptibility_weight`] and [`ModelParams::infectiousness_weight`];
//! the samplers and the oracle are built from those two weights.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default bound on exponent arguments and parameter magnitudes.
pub const DEFAULT_CLAMP: f64 = 10.0;

/// Distribution of an individual-level coefficient (`eta` or `xi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientDist {
    Normal { mean: f64, sd: f64 },
    Constant { value: f64 },
}

impl CoefficientDist {
    /// `N(0, 0.1^2)`, the default for both coefficients.
    pub const fn default_normal() -> Self {
        CoefficientDist::Normal { mean: 0.0, sd: 0.1 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CoefficientDist::Normal { mean, sd } if sd > 0.0 => {
                // validated: sd finite and positive
                Normal::new(mean, sd).expect("validated normal").sample(rng)
            }
            CoefficientDist::Normal { mean, .. } => mean,
            CoefficientDist::Constant { value } => value,
        }
    }

    fn validate(&self, name: &'static str, clamp: f64) -> Result<()> {
        let (center, spread) = match *self {
            CoefficientDist::Normal { mean, sd } => (mean, sd),
            CoefficientDist::Constant { value } => (value, 0.0),
        };
        if !center.is_finite() || !spread.is_finite() {
            return Err(invalid(name, "location and scale must be finite"));
        }
        if spread < 0.0 {
            return Err(invalid(name, "standard deviation must be non-negative"));
        }
        if center.abs() > clamp || spread > clamp {
            return Err(invalid(name, format!("magnitude exceeds clamp {clamp}")));
        }
        Ok(())
    }
}

/// Global transmission parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "CoefficientDist::default_normal")]
    pub eta_dist: CoefficientDist,
    #[serde(default = "CoefficientDist::default_normal")]
    pub xi_dist: CoefficientDist,
    #[serde(default = "default_clamp")]
    pub clamp: f64,
}

fn default_clamp() -> f64 {
    DEFAULT_CLAMP
}

impl ModelParams {
    /// Parameters with constant-zero individual coefficients.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let params = ModelParams {
            alpha,
            beta,
            gamma,
            eta_dist: CoefficientDist::Constant { value: 0.0 },
            xi_dist: CoefficientDist::Constant { value: 0.0 },
            clamp: DEFAULT_CLAMP,
        };
        params.validate()?;
        Ok(params)
    }

    /// `alpha = 0.01`, `eta, xi ~ N(0, 0.1^2)`.
    pub fn simulation_defaults(beta: f64, gamma: f64) -> Result<Self> {
        let params = ModelParams {
            alpha: 0.01,
            beta,
            gamma,
            eta_dist: CoefficientDist::default_normal(),
            xi_dist: CoefficientDist::default_normal(),
            clamp: DEFAULT_CLAMP,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_coefficient_dists(mut self, eta: CoefficientDist, xi: CoefficientDist) -> Result<Self> {
        self.eta_dist = eta;
        self.xi_dist = xi;
        self.validate()?;
        Ok(self)
    }

    /// Same parameters with `beta` and `gamma` replaced.
    pub fn with_effects(&self, beta: f64, gamma: f64) -> Result<Self> {
        let params = ModelParams {
            beta,
            gamma,
            ..self.clone()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clamp.is_finite() && self.clamp > 0.0) {
            return Err(invalid("clamp", "must be finite and positive"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid(
                "alpha",
                "exogenous force of infection must be finite and positive",
            ));
        }
        if self.alpha.ln().abs() > self.clamp {
            return Err(invalid("alpha", format!("log(alpha) exceeds clamp {}", self.clamp)));
        }
        for (name, value) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !value.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
            if value.abs() > self.clamp {
                return Err(invalid(name, format!("|{name}| exceeds clamp {}", self.clamp)));
            }
        }
        self.eta_dist.validate("eta_dist", self.clamp)?;
        self.xi_dist.validate("xi_dist", self.clamp)?;
        Ok(())
    }

    /// `exp(x)` with `x` clamped to `[-clamp, clamp]`.
    #[inline]
    pub fn bounded_exp(&self, x: f64) -> f64 {
        x.clamp(-self.clamp, self.clamp).exp()
    }

    /// `exp(x_j * beta + eta_j)`.
    #[inline]
    pub fn susceptibility_weight(&self, treated: bool, eta: f64) -> f64 {
        let effect = if treated { self.beta } else { 0.0 };
        self.bounded_exp(effect + eta)
    }

    /// `exp(x_k * gamma + xi_k)`.
    #[inline]
    pub fn infectiousness_weight(&self, treated: bool, xi: f64) -> f64 {
        let effect = if treated { self.gamma } else { 0.0 };
        self.bounded_exp(effect + xi)
    }

    /// Ratio of a susceptible's hazard under own treatment to that under no
    /// treatment, all else held fixed. Equal to `exp(beta)` in this model.
    pub fn susceptibility_hazard_ratio(&self) -> f64 {
        self.bounded_exp(self.beta)
    }
}

/// One cluster: individual coefficients, treatment and follow-up horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    eta: Vec<f64>,
    xi: Vec<f64>,
    treatment: Vec<bool>,
    horizon: f64,
    initial_infected: Vec<bool>,
}

impl Cluster {
    pub fn new(eta: Vec<f64>, xi: Vec<f64>, treatment: Vec<bool>, horizon: f64) -> Result<Self> {
        let n = eta.len();
        let initial_infected = vec![false; n];
        let cluster = Cluster {
            eta,
            xi,
            treatment,
            horizon,
            initial_infected,
        };
        cluster.validate()?;
        Ok(cluster)
    }

    /// Cluster of `n` untreated individuals with zero coefficients.
    pub fn homogeneous(n: usize, horizon: f64) -> Result<Self> {
        Cluster::new(vec![0.0; n], vec![0.0; n], vec![false; n], horizon)
    }

    pub fn with_treatment(&self, treatment: &[bool]) -> Result<Self> {
        let cluster = Cluster {
            treatment: treatment.to_vec(),
            ..self.clone()
        };
        cluster.validate()?;
        Ok(cluster)
    }

    pub fn with_initial_infected(&self, initial: &[bool]) -> Result<Self> {
        let cluster = Cluster {
            initial_infected: initial.to_vec(),
            ..self.clone()
        };
        cluster.validate()?;
        Ok(cluster)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let cluster = Cluster {
            horizon,
            ..self.clone()
        };
        cluster.validate()?;
        Ok(cluster)
    }

    fn validate(&self) -> Result<()> {
        let n = self.eta.len();
        if n == 0 {
            return Err(invalid("size", "cluster must have at least one individual"));
        }
        for (what, len) in [
            ("xi", self.xi.len()),
            ("treatment", self.treatment.len()),
            ("initial_infected", self.initial_infected.len()),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if self.eta.iter().chain(&self.xi).any(|v| !v.is_finite()) {
            return Err(invalid("coefficients", "eta and xi must be finite"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid("horizon", "must be finite and positive"));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_infected(&self) -> &[bool] {
        &self.initial_infected
    }
}

/// Infection status of every individual at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicState {
    pub time: f64,
    pub infected: Vec<bool>,
}

impl EpidemicState {
    pub fn initial(cluster: &Cluster) -> Self {
        EpidemicState {
            time: 0.0,
            infected: cluster.initial_infected().to_vec(),
        }
    }
}

/// Hazard of infection for susceptible `j` in the given state.
pub fn hazard(params: &ModelParams, cluster: &Cluster, state: &EpidemicState, j: usize) -> Result<f64> {
    let n = cluster.size();
    if state.infected.len() != n {
        return Err(Error::LengthMismatch {
            what: "state.infected",
            expected: n,
            actual: state.infected.len(),
        });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, size: n });
    }
    if state.infected[j] {
        return Err(Error::AlreadyInfected(j));
    }
    let x = cluster.treatment();
    let pressure = params.alpha
        + (0..n)
            .filter(|&k| k != j && state.infected[k])
            .map(|k| params.infectiousness_weight(x[k], cluster.xi()[k]))
            .sum::<f64>();
    Ok(params.susceptibility_weight(x[j], cluster.eta()[j]) * pressure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state(infected: &[bool]) -> EpidemicState {
        EpidemicState {
            time: 0.0,
            infected: infected.to_vec(),
        }
    }

    #[test]
    fn exogenous_only() {
        let params = ModelParams::new(0.01, 0.0, 0.0).unwrap();
        let cluster = Cluster::homogeneous(3, 10.0).unwrap();
        let h = hazard(&params, &cluster, &state(&[false; 3]), 0).unwrap();
        assert_eq!(h, 0.01);
    }

    #[test]
    fn one_untreated_infective() {
        let params = ModelParams::new(1.0, 0.0, 0.0).unwrap();
        let cluster = Cluster::homogeneous(2, 10.0).unwrap();
        let h = hazard(&params, &cluster, &state(&[false, true]), 0).unwrap();
        assert_eq!(h, 2.0);
    }

    #[test]
    fn treated_infective_scaled_by_gamma() {
        let params = ModelParams::new(0.01, 0.0, -1.0).unwrap();
        let cluster = Cluster::homogeneous(2, 10.0)
            .unwrap()
            .with_treatment(&[false, true])
            .unwrap();
        let h = hazard(&params, &cluster, &state(&[false, true]), 0).unwrap();
        assert_relative_eq!(h, 0.01 + (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(h, 0.37788, epsilon = 1e-5);
    }

    #[test]
    fn hazard_rejects_bad_index_and_infected() {
        let params = ModelParams::new(0.01, 0.0, 0.0).unwrap();
        let cluster = Cluster::homogeneous(2, 10.0).unwrap();
        assert!(matches!(
            hazard(&params, &cluster, &state(&[false, false]), 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            hazard(&params, &cluster, &state(&[true, false]), 0),
            Err(Error::AlreadyInfected(0))
        ));
    }

    #[test]
    fn shr_closed_form() {
        assert_eq!(
            ModelParams::new(0.01, 0.0, 0.0).unwrap().susceptibility_hazard_ratio(),
            1.0
        );
        let shr = ModelParams::new(0.01, -2.0, 0.0).unwrap().susceptibility_hazard_ratio();
        assert_relative_eq!(shr, 0.13534, epsilon = 1e-5);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ModelParams::new(0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0.01, 11.0, 0.0).is_err());
        assert!(ModelParams::new(0.01, 0.0, f64::NAN).is_err());
        let bad_sd = ModelParams::new(0.01, 0.0, 0.0).unwrap().with_coefficient_dists(
            CoefficientDist::Normal { mean: 0.0, sd: -1.0 },
            CoefficientDist::default_normal(),
        );
        assert!(bad_sd.is_err());
    }

    #[test]
    fn cluster_validation() {
        assert!(Cluster::homogeneous(0, 1.0).is_err());
        assert!(Cluster::homogeneous(2, 0.0).is_err());
        assert!(Cluster::new(vec![0.0; 2], vec![0.0; 3], vec![false; 2], 1.0).is_err());
        let c = Cluster::homogeneous(2, 1.0).unwrap();
        assert!(c.with_treatment(&[true]).is_err());
        assert!(c.with_initial_infected(&[true, false, false]).is_err());
    }

    #[test]
    fn coefficient_dist_json_tags() {
        let d: CoefficientDist = serde_json::from_str(r#"{"kind":"normal","mean":0.0,"sd":0.1}"#).unwrap();
        assert_eq!(d, CoefficientDist::default_normal());
        let c: CoefficientDist = serde_json::from_str(r#"{"kind":"constant","value":0.5}"#).unwrap();
        assert_eq!(c, CoefficientDist::Constant { value: 0.5 });
    }

    fn random_instance() -> impl Strategy<Value = (ModelParams, Cluster, Vec<bool>, usize)> {
        (2usize..7).prop_flat_map(|n| {
            (
                0.001f64..2.0,
                -3.0f64..3.0,
                -3.0f64..3.0,
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), n),
                0..n,
            )
                .prop_map(|(alpha, beta, gamma, eta, xi, x, mut y, j)| {
                    y[j] = false;
                    let params = ModelParams::new(alpha, beta, gamma).unwrap();
                    let cluster = Cluster::new(eta, xi, x, 10.0).unwrap();
                    (params, cluster, y, j)
                })
        })
    }

    proptest! {
        #[test]
        fn hazard_ratio_is_exp_beta((params, cluster, y, j) in random_instance()) {
            let mut x1 = cluster.treatment().to_vec();
            let mut x0 = x1.clone();
            x1[j] = true;
            x0[j] = false;
            let h1 = hazard(&params, &cluster.with_treatment(&x1).unwrap(), &state(&y), j).unwrap();
            let h0 = hazard(&params, &cluster.with_treatment(&x0).unwrap(), &state(&y), j).unwrap();
            prop_assert!((h1 / h0 - params.beta.exp()).abs() <= 1e-12 * params.beta.exp());
        }

        #[test]
        fn hazard_at_least_exogenous((params, cluster, y, j) in random_instance()) {
            let h = hazard(&params, &cluster, &state(&y), j).unwrap();
            let floor = params.alpha * params.susceptibility_weight(cluster.treatment()[j], cluster.eta()[j]);
            prop_assert!(h >= floor && floor > 0.0);
        }

        #[test]
        fn susceptible_others_do_not_matter((params, cluster, y, j) in random_instance(), flip in any::<bool>()) {
            // change covariates of every other susceptible
            let n = cluster.size();
            let mut x = cluster.treatment().to_vec();
            let mut eta = cluster.eta().to_vec();
            let mut xi = cluster.xi().to_vec();
            for k in (0..n).filter(|&k| k != j && !y[k]) {
                x[k] = flip;
                eta[k] += 0.5;
                xi[k] -= 0.5;
            }
            let other = Cluster::new(eta, xi, x, 10.0).unwrap();
            let mut eta_j = other.eta().to_vec();
            eta_j[j] = cluster.eta()[j];
            let other = Cluster::new(eta_j, other.xi().to_vec(), other.treatment().to_vec(), 10.0).unwrap();
            let mut xj = other.treatment().to_vec();
            xj[j] = cluster.treatment()[j];
            let other = other.with_treatment(&xj).unwrap();
            let a = hazard(&params, &cluster, &state(&y), j).unwrap();
            let b = hazard(&params, &other, &state(&y), j).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn adding_an_infective_never_decreases((params, cluster, y, j) in random_instance()) {
            let before = hazard(&params, &cluster, &state(&y), j).unwrap();
            for k in (0..cluster.size()).filter(|&k| k != j && !y[k]) {
                let mut more = y.clone();
                more[k] = true;
                let after = hazard(&params, &cluster, &state(&more), j).unwrap();
                prop_assert!(after >= before);
            }
        }
    }
}
