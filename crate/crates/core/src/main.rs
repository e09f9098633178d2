use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use contagion_de::estimators::estimate;
use contagion_de::experiments::config::{CoefficientMode, ExperimentConfig, Grid, HorizonDist};
use contagion_de::experiments::{run_heatmap, run_sweep, simulate_trial, verify_propositions};
use contagion_de::model::{Cluster, CoefficientDist};
use contagion_de::oracle::{exact_de, exact_marginals, exact_marginals_rk4};
use contagion_de::randomization::{DesignKind, DesignSpec};
use contagion_de::rng::stream;
use contagion_de::verification::{
    check_dominance, check_marginal_validity, random_coupling_settings, Contrast, CouplingSetting, DominanceReport,
    DominanceSpec, GammaSign, MarginalValidityReport,
};

/// Contagion, randomized designs and the direct effect.
#[derive(Parser)]
#[command(name = "contagion-de", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON experiment config. Flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// 1000 clusters and 1000 replicates instead of 500 and 200.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    design: Option<DesignKind>,
    /// Treatment probability.
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Single gamma value (replaces the gamma grid).
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Gamma grid as `start:stop:step`.
    #[arg(long, global = true, value_parser = parse_grid, allow_hyphen_values = true)]
    gamma_grid: Option<Grid>,
    /// Beta grid as `start:stop:step`.
    #[arg(long, global = true, value_parser = parse_grid, allow_hyphen_values = true)]
    beta_grid: Option<Grid>,
    /// Standard deviation of both individual coefficients (0 = none).
    #[arg(long, global = true)]
    coef_sd: Option<f64>,
    #[arg(long, global = true)]
    n_clusters: Option<usize>,
    #[arg(long, global = true)]
    n_replicates: Option<usize>,
    /// Fixed follow-up horizon.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Reuse one population across replicates.
    #[arg(long, global = true)]
    fixed_population: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trial and dump every cluster's outcome as JSON.
    Simulate {
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Gamma sweep (and beta grid if given) to CSV.
    Sweep,
    /// Beta by gamma sweep with the sign-mismatch mask CSV.
    Heatmap {
        /// Also write the underlying sweep CSV here.
        #[arg(long)]
        sweep_out: Option<PathBuf>,
    },
    /// Coupling validity and dominance checks, JSON report.
    VerifyCoupling {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Number of random (gamma, allocation pair) settings.
        #[arg(long, default_value_t = 5)]
        settings: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        dominance_samples: usize,
        /// Minimum chi-square p-value.
        #[arg(long, default_value_t = 0.001)]
        threshold: f64,
    },
    /// Sign checks of the direct effect at beta = 0, JSON report.
    VerifyPropositions,
    /// Exact direct effect for one small cluster, JSON report.
    OracleCheck {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Time at which infection probabilities are evaluated.
        #[arg(long, default_value_t = 10.0)]
        time: f64,
    },
}

fn parse_grid(text: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err("expected start:stop:step".into());
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s}: {e}"));
    let grid = Grid {
        start: num(parts[0])?,
        stop: num(parts[1])?,
        step: num(parts[2])?,
    };
    grid.validate().map_err(|e| e.to_string())?;
    Ok(grid)
}

fn build_config(opts: &GlobalOpts) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let design = DesignSpec::bernoulli(0.5)?;
            if opts.paper_scale {
                ExperimentConfig::paper_scale(design)
            } else {
                ExperimentConfig::desk_defaults(design)
            }
        }
    };
    if opts.paper_scale && opts.config.is_some() {
        config.n_clusters = 1000;
        config.n_replicates = 1000;
    }
    if opts.design.is_some() || opts.p.is_some() {
        let kind = opts.design.unwrap_or(config.design.kind);
        let p = opts.p.unwrap_or(config.design.p);
        config.design = DesignSpec::new(kind, p)?;
    }
    if let Some(alpha) = opts.alpha {
        config.params.alpha = alpha;
    }
    if let Some(beta) = opts.beta {
        config.params.beta = beta;
    }
    if let Some(gamma) = opts.gamma {
        config.params.gamma = gamma;
        config.sweep.gamma = Grid::point(gamma);
    }
    if let Some(grid) = opts.gamma_grid {
        config.sweep.gamma = grid;
    }
    if let Some(grid) = opts.beta_grid {
        config.sweep.beta = Some(grid);
    }
    if let Some(sd) = opts.coef_sd {
        let dist = if sd == 0.0 {
            CoefficientDist::Constant { value: 0.0 }
        } else {
            CoefficientDist::Normal { mean: 0.0, sd }
        };
        config.params = config.params.clone().with_coefficient_dists(dist, dist)?;
    }
    if let Some(n) = opts.n_clusters {
        config.n_clusters = n;
    }
    if let Some(n) = opts.n_replicates {
        config.n_replicates = n;
    }
    if let Some(value) = opts.horizon {
        config.horizon = HorizonDist::Fixed { value };
    }
    if opts.fixed_population {
        config.coefficient_mode = CoefficientMode::FixedAcrossReplicates;
    }
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> anyhow::Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Small cluster with coefficients drawn from the config's distributions.
fn small_cluster(config: &ExperimentConfig, n: usize, horizon: f64) -> anyhow::Result<Cluster> {
    let mut rng = stream(config.seed, &[0xCC, n as u64]);
    let eta = (0..n).map(|_| config.params.eta_dist.sample(&mut rng)).collect();
    let xi = (0..n).map(|_| config.params.xi_dist.sample(&mut rng)).collect();
    Ok(Cluster::new(eta, xi, vec![false; n], horizon)?)
}

fn fixed_horizon(config: &ExperimentConfig) -> f64 {
    match config.horizon {
        HorizonDist::Fixed { value } => value,
        HorizonDist::Exponential { mean } => mean,
    }
}

#[derive(Serialize)]
struct NamedValidity {
    setting: CouplingSetting,
    passed: bool,
    report: MarginalValidityReport,
}

#[derive(Serialize)]
struct NamedDominance {
    gamma: f64,
    passed: bool,
    report: DominanceReport,
}

fn verify_coupling(
    config: &ExperimentConfig,
    n: usize,
    settings: usize,
    samples: usize,
    dominance_samples: usize,
    threshold: f64,
) -> anyhow::Result<(bool, serde_json::Value)> {
    if n < 2 {
        bail!("verify-coupling needs n >= 2");
    }
    let cluster = small_cluster(config, n, fixed_horizon(config))?;
    let mut validity = Vec::new();
    for (i, setting) in random_coupling_settings(n, settings, config.seed)
        .into_iter()
        .enumerate()
    {
        let params = config.params.with_effects(0.0, setting.gamma)?;
        let report = check_marginal_validity(
            &params,
            &cluster,
            &setting.x1,
            &setting.x0,
            samples,
            config.seed ^ i as u64,
        )?;
        validity.push(NamedValidity {
            passed: report.passes(threshold),
            setting,
            report,
        });
    }
    let mut dominance = Vec::new();
    let contrasts = [
        Contrast::ClusterAllVsNone,
        Contrast::BlockSwapPair {
            j: 0,
            k: 1,
            z: (0..n - 2).map(|v| v % 2 == 0).collect(),
        },
    ];
    for contrast in contrasts {
        for gamma in [-1.0, 0.0, 1.0] {
            let params = config.params.with_effects(0.0, gamma)?;
            let spec = DominanceSpec::new(contrast.clone(), GammaSign::of(gamma));
            let report = check_dominance(&spec, &params, &cluster, dominance_samples, config.seed)?;
            dominance.push(NamedDominance {
                gamma,
                passed: report.violations == 0,
                report,
            });
        }
    }
    let passed = validity.iter().all(|v| v.passed) && dominance.iter().all(|d| d.passed);
    let report = json!({
        "passed": passed,
        "threshold": threshold,
        "cluster": cluster,
        "marginal_validity": validity,
        "dominance": dominance,
    });
    Ok((passed, report))
}

fn oracle_check(config: &ExperimentConfig, n: usize, time: f64) -> anyhow::Result<serde_json::Value> {
    let cluster = small_cluster(config, n, time)?;
    let params = &config.params;
    let mut designs = Vec::new();
    for kind in DesignKind::ALL {
        let design = DesignSpec::new(kind, config.design.p)?;
        match exact_de(params, &cluster, &design, time) {
            Ok(de) => designs.push(json!({
                "design": kind,
                "de": de.cluster_average,
                "per_individual": de.per_individual,
            })),
            Err(e) => designs.push(json!({ "design": kind, "error": e.to_string() })),
        }
    }
    let treated = cluster.with_treatment(&(0..n).map(|v| v % 2 == 0).collect::<Vec<_>>())?;
    let primary = exact_marginals(params, &treated, time)?;
    let secondary = exact_marginals_rk4(params, &treated, time, 1e-3)?;
    let backend_gap = primary
        .iter()
        .zip(&secondary)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "params": params,
        "cluster": cluster,
        "time": time,
        "direct_effect": designs,
        "backend_check": {
            "treatment": treated.treatment(),
            "uniformization": primary,
            "rk4": secondary,
            "max_abs_difference": backend_gap,
        },
    }))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let config = build_config(&cli.global)?;
    let threads = cli.global.threads;
    let out = &cli.global.out;
    match cli.command {
        Command::Simulate { replicate } => {
            let (beta, gamma) = (config.params.beta, config.params.gamma);
            let trial = simulate_trial(&config, beta, gamma, replicate)?;
            let result = estimate(&trial.data)?;
            let clusters: Vec<_> = trial
                .clusters
                .iter()
                .zip(&trial.outcomes)
                .map(|(c, o)| {
                    json!({
                        "treatment": c.treatment(),
                        "eta": c.eta(),
                        "xi": c.xi(),
                        "horizon": c.horizon(),
                        "infection_time": o.infection_time.iter().map(|t| t.is_finite().then_some(*t)).collect::<Vec<_>>(),
                        "infected_by_horizon": o.infected_by_horizon,
                        "order": o.order,
                    })
                })
                .collect();
            let de_hat = result.de_hat.is_finite().then_some(result.de_hat);
            write_json(
                out,
                &json!({
                    "design": config.design,
                    "params": config.params,
                    "replicate": replicate,
                    "de_hat": de_hat,
                    "degenerate": result.degenerate,
                    "clusters": clusters,
                }),
            )?;
            Ok(true)
        }
        Command::Sweep => {
            let sweep = run_sweep(&config, threads)?;
            let mut w = output(out)?;
            sweep.write_csv(&mut w)?;
            w.flush()?;
            Ok(true)
        }
        Command::Heatmap { sweep_out } => {
            let mut config = config;
            if config.sweep.beta.is_none() {
                config.sweep.beta = Some(config.sweep.gamma);
            }
            let heatmap = run_heatmap(&config, threads)?;
            let mut w = output(out)?;
            heatmap.write_mask_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = sweep_out {
                heatmap.sweep.write_csv(BufWriter::new(File::create(path)?))?;
            }
            Ok(true)
        }
        Command::VerifyCoupling {
            n,
            settings,
            samples,
            dominance_samples,
            threshold,
        } => {
            let (passed, report) = verify_coupling(&config, n, settings, samples, dominance_samples, threshold)?;
            write_json(out, &report)?;
            Ok(passed)
        }
        Command::VerifyPropositions => {
            let report = verify_propositions(&config, threads)?;
            let passed = report.all_passed();
            write_json(out, &json!({ "passed": passed, "report": report }))?;
            Ok(passed)
        }
        Command::OracleCheck { n, time } => {
            write_json(out, &oracle_check(&config, n, time)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
