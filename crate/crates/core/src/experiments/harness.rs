use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{estimate, ClusterObservation, TrialData, TrialResult};
use crate::experiments::config::{CoefficientMode, ExperimentConfig};
use crate::model::{Cluster, ModelParams};
use crate::randomization::DesignKind;
use crate::rng::{stream, StreamRng};
use crate::simulator::{simulate, EpidemicOutcome};
use crate::stats::Summary;

// Stream tags. Keys do not include the grid point or the design, so every
// grid point and design sees the same populations, assignment draws and
// epidemic uniforms for a given replicate.
const STREAM_POPULATION: u64 = 1;
const STREAM_ASSIGNMENT: u64 = 2;
const STREAM_EPIDEMIC: u64 = 3;

/// One simulated trial with everything needed to inspect it.
#[derive(Debug, Clone)]
pub struct SimulatedTrial {
    pub clusters: Vec<Cluster>,
    pub outcomes: Vec<EpidemicOutcome>,
    pub data: TrialData,
}

fn population_stream(config: &ExperimentConfig, replicate: u64, cluster: u64) -> StreamRng {
    let replicate_key = match config.coefficient_mode {
        CoefficientMode::RedrawPerReplicate => replicate,
        CoefficientMode::FixedAcrossReplicates => 0,
    };
    stream(config.seed, &[STREAM_POPULATION, replicate_key, cluster])
}

fn draw_cluster(config: &ExperimentConfig, params: &ModelParams, replicate: u64, index: u64) -> Result<Cluster> {
    let mut rng = population_stream(config, replicate, index);
    let n = config.cluster_size.sample(&mut rng);
    let eta: Vec<f64> = (0..n).map(|_| params.eta_dist.sample(&mut rng)).collect();
    let xi: Vec<f64> = (0..n).map(|_| params.xi_dist.sample(&mut rng)).collect();
    let horizon = config.horizon.sample(&mut rng);
    Cluster::new(eta, xi, vec![false; n], horizon)
}

fn draw_outcome<R: Rng>(
    config: &ExperimentConfig,
    params: &ModelParams,
    base: &Cluster,
    replicate: u64,
    index: u64,
    epidemic_rng: &mut R,
) -> Result<(Cluster, EpidemicOutcome)> {
    let mut assign_rng = stream(config.seed, &[STREAM_ASSIGNMENT, replicate, index]);
    let treatment = config.design.assign(base.size(), &mut assign_rng)?;
    let cluster = base.with_treatment(&treatment)?;
    let outcome = simulate(params, &cluster, epidemic_rng)?;
    Ok((cluster, outcome))
}

/// Draw, assign and simulate all clusters of one trial at `(beta, gamma)`.
pub fn simulate_trial(config: &ExperimentConfig, beta: f64, gamma: f64, replicate: u64) -> Result<SimulatedTrial> {
    let params = config.params.with_effects(beta, gamma)?;
    let mut clusters = Vec::with_capacity(config.n_clusters);
    let mut outcomes = Vec::with_capacity(config.n_clusters);
    let mut observations = Vec::with_capacity(config.n_clusters);
    for index in 0..config.n_clusters as u64 {
        let base = draw_cluster(config, &params, replicate, index)?;
        let mut epidemic_rng = stream(config.seed, &[STREAM_EPIDEMIC, replicate, index]);
        let (cluster, outcome) = draw_outcome(config, &params, &base, replicate, index, &mut epidemic_rng)?;
        observations.push(ClusterObservation::new(
            cluster.treatment().to_vec(),
            outcome.infected_by_horizon.clone(),
        )?);
        clusters.push(cluster);
        outcomes.push(outcome);
    }
    Ok(SimulatedTrial {
        clusters,
        outcomes,
        data: TrialData::new(observations, config.design)?,
    })
}

/// Design-matched direct-effect estimate for one replicate.
pub fn run_replicate(config: &ExperimentConfig, beta: f64, gamma: f64, replicate: u64) -> Result<TrialResult> {
    let trial = simulate_trial(config, beta, gamma, replicate)?;
    estimate(&trial.data)
}

/// Summary of all replicates at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub design: DesignKind,
    pub beta: f64,
    pub gamma: f64,
    pub de_mean: f64,
    pub de_sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// All replicates, degenerate ones included.
    pub n_reps: usize,
    pub n_degenerate: usize,
}

impl SweepRow {
    fn from_results(design: DesignKind, beta: f64, gamma: f64, results: &[TrialResult]) -> Self {
        let estimates: Vec<f64> = results.iter().filter(|r| !r.degenerate).map(|r| r.de_hat).collect();
        let summary = Summary::of(&estimates);
        SweepRow {
            design,
            beta,
            gamma,
            de_mean: summary.mean,
            de_sd: summary.sd,
            ci_low: summary.ci_low,
            ci_high: summary.ci_high,
            n_reps: results.len(),
            n_degenerate: results.len() - estimates.len(),
        }
    }

    pub fn effective_replicates(&self) -> usize {
        self.n_reps - self.n_degenerate
    }

    pub fn standard_error(&self) -> f64 {
        self.de_sd / (self.effective_replicates() as f64).sqrt()
    }

    /// Interval defined and excluding zero.
    pub fn decisive(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: &str = "design,beta,gamma,de_mean,de_sd,ci_low,ci_high,n_reps,n_degenerate";
pub const MASK_HEADER: &str = "beta,gamma,design,de_mean,decisive,mismatch";

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SWEEP_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.design, r.beta, r.gamma, r.de_mean, r.de_sd, r.ci_low, r.ci_high, r.n_reps, r.n_degenerate
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}

/// Run `f` on a pool with `threads` workers (0 = rayon default).
pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Run every grid point of the config. Output rows follow
/// [`ExperimentConfig::grid_points`] and do not depend on `threads`.
pub fn run_sweep(config: &ExperimentConfig, threads: usize) -> Result<SweepResult> {
    config.validate()?;
    let points = config.grid_points();
    let reps = config.n_replicates;
    let results: Vec<TrialResult> = with_threads(threads, || {
        (0..points.len() * reps)
            .into_par_iter()
            .map(|item| {
                let (beta, gamma) = points[item / reps];
                run_replicate(config, beta, gamma, (item % reps) as u64)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let rows = points
        .iter()
        .zip(results.chunks(reps))
        .map(|(&(beta, gamma), chunk)| SweepRow::from_results(config.design.kind, beta, gamma, chunk))
        .collect();
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskCell {
    pub beta: f64,
    pub gamma: f64,
    pub design: DesignKind,
    pub de_mean: f64,
    pub decisive: bool,
    /// Decisive, `beta != 0` and the estimate's sign differs from `beta`'s.
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapResult {
    pub sweep: SweepResult,
    pub cells: Vec<MaskCell>,
}

impl HeatmapResult {
    pub fn write_mask_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MASK_HEADER}")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.beta,
                c.gamma,
                c.design,
                c.de_mean,
                u8::from(c.decisive),
                u8::from(c.mismatch)
            )?;
        }
        Ok(())
    }

    pub fn mismatch_cells(&self) -> impl Iterator<Item = &MaskCell> {
        self.cells.iter().filter(|c| c.mismatch)
    }
}

/// Two-dimensional `(beta, gamma)` sweep with the sign-mismatch mask.
pub fn run_heatmap(config: &ExperimentConfig, threads: usize) -> Result<HeatmapResult> {
    if config.sweep.beta.is_none() {
        return Err(Error::Config("heatmap requires a beta grid".into()));
    }
    let sweep = run_sweep(config, threads)?;
    let cells = sweep
        .rows
        .iter()
        .map(|r| {
            let decisive = r.decisive();
            let mismatch = decisive && r.beta != 0.0 && (r.de_mean > 0.0) != (r.beta > 0.0);
            MaskCell {
                beta: r.beta,
                gamma: r.gamma,
                design: r.design,
                de_mean: r.de_mean,
                decisive,
                mismatch,
            }
        })
        .collect();
    Ok(HeatmapResult { sweep, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{ClusterSizeDist, Grid};
    use crate::randomization::DesignSpec;

    fn small(design: DesignSpec) -> ExperimentConfig {
        ExperimentConfig {
            n_clusters: 20,
            n_replicates: 10,
            sweep: crate::experiments::config::SweepSpec {
                gamma: Grid {
                    start: -1.0,
                    stop: 1.0,
                    step: 1.0,
                },
                beta: None,
            },
            ..ExperimentConfig::desk_defaults(design)
        }
    }

    #[test]
    fn replicate_is_deterministic() {
        let config = small(DesignSpec::block(0.5).unwrap());
        let a = run_replicate(&config, 0.0, -1.0, 3).unwrap();
        let b = run_replicate(&config, 0.0, -1.0, 3).unwrap();
        assert_eq!(a, b);
        let first = simulate_trial(&config, 0.0, -1.0, 3).unwrap();
        let other = simulate_trial(&config, 0.0, -1.0, 4).unwrap();
        assert_ne!(first.data, other.data);
    }

    #[test]
    fn trial_respects_design() {
        for kind in DesignKind::ALL {
            let config = small(DesignSpec::new(kind, 0.5).unwrap());
            let trial = simulate_trial(&config, 0.0, 0.5, 0).unwrap();
            assert_eq!(trial.clusters.len(), 20);
            for c in &trial.clusters {
                assert!(c.size() >= 2);
                let treated = c.treatment().iter().filter(|&&x| x).count();
                match kind {
                    DesignKind::Block => assert_eq!(treated, c.size() / 2),
                    DesignKind::Cluster => assert!(treated == 0 || treated == c.size()),
                    DesignKind::Bernoulli => {}
                }
            }
        }
    }

    #[test]
    fn fixed_mode_reuses_population() {
        let mut config = small(DesignSpec::bernoulli(0.5).unwrap());
        config.coefficient_mode = CoefficientMode::FixedAcrossReplicates;
        let a = simulate_trial(&config, 0.0, 0.0, 0).unwrap();
        let b = simulate_trial(&config, 0.0, 0.0, 1).unwrap();
        for (x, y) in a.clusters.iter().zip(&b.clusters) {
            assert_eq!(x.eta(), y.eta());
            assert_eq!(x.xi(), y.xi());
        }
        config.coefficient_mode = CoefficientMode::RedrawPerReplicate;
        let a = simulate_trial(&config, 0.0, 0.0, 0).unwrap();
        let b = simulate_trial(&config, 0.0, 0.0, 1).unwrap();
        assert_ne!(a.clusters[0].eta(), b.clusters[0].eta());
    }

    #[test]
    fn block_with_singleton_clusters_is_an_error() {
        let mut config = small(DesignSpec::block(0.5).unwrap());
        config.cluster_size = ClusterSizeDist::Fixed { n: 1 };
        assert!(matches!(
            run_replicate(&config, 0.0, 0.0, 0),
            Err(Error::DegenerateBlockDesign { .. })
        ));
    }

    #[test]
    fn degenerate_cluster_replicates_are_counted() {
        let mut config = small(DesignSpec::cluster(0.5).unwrap());
        config.n_clusters = 1;
        let sweep = run_sweep(&config, 1).unwrap();
        for row in &sweep.rows {
            assert_eq!(row.n_degenerate, row.n_reps);
            assert!(row.de_mean.is_nan());
        }
    }

    #[test]
    fn sweep_rows_and_csv() {
        let config = small(DesignSpec::bernoulli(0.5).unwrap());
        let sweep = run_sweep(&config, 2).unwrap();
        assert_eq!(sweep.rows.len(), 3);
        for row in &sweep.rows {
            assert_eq!(row.n_degenerate + row.effective_replicates(), row.n_reps);
            assert!(row.ci_low <= row.de_mean && row.de_mean <= row.ci_high);
        }
        let csv = sweep.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER);
        assert!(lines.next().unwrap().starts_with("bernoulli,0,-1,"));
    }

    #[test]
    fn single_point_sweep_matches_replicates() {
        let mut config = small(DesignSpec::cluster(0.5).unwrap());
        config.sweep.gamma = Grid::point(0.0);
        let sweep = run_sweep(&config, 1).unwrap();
        let direct: Vec<f64> = (0..config.n_replicates as u64)
            .map(|r| run_replicate(&config, 0.0, 0.0, r).unwrap())
            .filter(|r| !r.degenerate)
            .map(|r| r.de_hat)
            .collect();
        assert_eq!(sweep.rows.len(), 1);
        assert_eq!(sweep.rows[0].de_mean, Summary::of(&direct).mean);
    }

    #[test]
    fn heatmap_requires_beta_grid() {
        let config = small(DesignSpec::bernoulli(0.5).unwrap());
        assert!(run_heatmap(&config, 1).is_err());
    }
}
