use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::randomization::DesignSpec;

/// Cluster size distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterSizeDist {
    Fixed {
        n: usize,
    },
    /// `shift + Poisson(mean)`.
    ShiftedPoisson {
        shift: usize,
        mean: f64,
    },
}

impl ClusterSizeDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            ClusterSizeDist::Fixed { n } => n,
            ClusterSizeDist::ShiftedPoisson { shift, mean } => {
                let draw: f64 = Poisson::new(mean).expect("validated mean").sample(rng);
                shift + draw as usize
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ClusterSizeDist::Fixed { n: 0 } => Err(Error::Config("fixed cluster size must be >= 1".into())),
            ClusterSizeDist::ShiftedPoisson { shift, mean } => {
                if !(mean.is_finite() && mean > 0.0) {
                    return Err(Error::Config("poisson mean must be finite and positive".into()));
                }
                if shift == 0 {
                    return Err(Error::Config(
                        "shifted poisson needs shift >= 1 to avoid empty clusters".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Follow-up horizon distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HorizonDist {
    Fixed { value: f64 },
    Exponential { mean: f64 },
}

impl HorizonDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            HorizonDist::Fixed { value } => value,
            HorizonDist::Exponential { mean } => loop {
                let t: f64 = Exp::new(1.0 / mean).expect("validated mean").sample(rng);
                if t > 0.0 {
                    break t;
                }
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            HorizonDist::Fixed { value } => value,
            HorizonDist::Exponential { mean } => mean,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config("horizon must be finite and positive".into()));
        }
        Ok(())
    }
}

/// Inclusive arithmetic grid `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn point(value: f64) -> Self {
        Grid {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("grid bounds and step must be finite".into()));
        }
        if self.step <= 0.0 {
            return Err(Error::Config("grid step must be positive".into()));
        }
        if self.stop < self.start {
            return Err(Error::Config("grid stop must not precede start".into()));
        }
        Ok(())
    }

    /// Grid values, computed as `start + i * step` and rounded to 12
    /// decimals so that e.g. `-2 + 20 * 0.1` prints as `0`.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let v = self.start + i as f64 * self.step;
                let r = (v * 1e12).round() / 1e12;
                if r == 0.0 {
                    0.0
                } else {
                    r
                }
            })
            .collect()
    }
}

/// Parameter grid. `beta` absent means the single value `params.beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub gamma: Grid,
    #[serde(default)]
    pub beta: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    /// Fresh cluster sizes, coefficients and horizons in every replicate.
    RedrawPerReplicate,
    /// One population reused by all replicates; only treatments and
    /// epidemics are redrawn.
    FixedAcrossReplicates,
}

/// Full description of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: DesignSpec,
    pub params: ModelParams,
    pub cluster_size: ClusterSizeDist,
    pub horizon: HorizonDist,
    pub n_clusters: usize,
    pub n_replicates: usize,
    pub sweep: SweepSpec,
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub coefficient_mode: CoefficientMode,
}

fn default_mode() -> CoefficientMode {
    CoefficientMode::RedrawPerReplicate
}

/// Default root seed.
pub const DEFAULT_SEED: u64 = 20_190_417;

impl ExperimentConfig {
    /// Simulation defaults at desk scale: 500 clusters, 200 replicates,
    /// `beta = 0`, `gamma` over `[-2, 2]` in steps of 0.1.
    pub fn desk_defaults(design: DesignSpec) -> Self {
        ExperimentConfig {
            design,
            params: ModelParams::simulation_defaults(0.0, 0.0).expect("valid defaults"),
            cluster_size: ClusterSizeDist::ShiftedPoisson { shift: 2, mean: 2.0 },
            horizon: HorizonDist::Fixed { value: 10.0 },
            n_clusters: 500,
            n_replicates: 200,
            sweep: SweepSpec {
                gamma: Grid {
                    start: -2.0,
                    stop: 2.0,
                    step: 0.1,
                },
                beta: None,
            },
            seed: DEFAULT_SEED,
            coefficient_mode: CoefficientMode::RedrawPerReplicate,
        }
    }

    /// Desk defaults with 1000 clusters and 1000 replicates.
    pub fn paper_scale(design: DesignSpec) -> Self {
        ExperimentConfig {
            n_clusters: 1000,
            n_replicates: 1000,
            ..ExperimentConfig::desk_defaults(design)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.params.validate()?;
        self.cluster_size.validate()?;
        self.horizon.validate()?;
        self.sweep.gamma.validate()?;
        if let Some(beta) = &self.sweep.beta {
            beta.validate()?;
        }
        if self.n_clusters == 0 {
            return Err(Error::Config("n_clusters must be >= 1".into()));
        }
        if self.n_replicates == 0 {
            return Err(Error::Config("n_replicates must be >= 1".into()));
        }
        Ok(())
    }

    pub fn beta_values(&self) -> Vec<f64> {
        match &self.sweep.beta {
            Some(grid) => grid.values(),
            None => vec![self.params.beta],
        }
    }

    pub fn gamma_values(&self) -> Vec<f64> {
        self.sweep.gamma.values()
    }

    /// Grid points in output order: beta outer, gamma inner.
    pub fn grid_points(&self) -> Vec<(f64, f64)> {
        let gammas = self.gamma_values();
        self.beta_values()
            .into_iter()
            .flat_map(|b| gammas.iter().map(move |&g| (b, g)))
            .collect()
    }
}
