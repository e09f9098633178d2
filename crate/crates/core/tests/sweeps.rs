use contagion_de::experiments::config::{CoefficientMode, ExperimentConfig, Grid, SweepSpec};
use contagion_de::experiments::{run_heatmap, run_sweep, SWEEP_HEADER};
use contagion_de::randomization::{DesignKind, DesignSpec};

fn config(
    kind: DesignKind,
    n_clusters: usize,
    n_replicates: usize,
    gamma: Grid,
    beta: Option<Grid>,
) -> ExperimentConfig {
    ExperimentConfig {
        n_clusters,
        n_replicates,
        sweep: SweepSpec { gamma, beta },
        ..ExperimentConfig::desk_defaults(DesignSpec::new(kind, 0.5).unwrap())
    }
}

#[test]
fn bernoulli_null_band_over_full_gamma_grid() {
    let c = ExperimentConfig::desk_defaults(DesignSpec::bernoulli(0.5).unwrap());
    let sweep = run_sweep(&c, 0).unwrap();
    assert_eq!(sweep.rows.len(), 41);
    let max_mean = sweep.rows.iter().map(|r| r.de_mean.abs()).fold(0.0, f64::max);
    let max_se = sweep.rows.iter().map(|r| r.standard_error()).fold(0.0, f64::max);
    assert!(max_mean < 4.0 * max_se, "max |mean| {max_mean} vs 4 * {max_se}");
}

#[test]
fn replicate_accounting_and_csv_shape() {
    for kind in DesignKind::ALL {
        let gamma = Grid {
            start: -1.0,
            stop: 1.0,
            step: 0.5,
        };
        // small clusters make cluster-design trials degenerate now and then
        let c = config(kind, 3, 30, gamma, None);
        let sweep = run_sweep(&c, 2).unwrap();
        for row in &sweep.rows {
            assert_eq!(row.n_reps, 30);
            assert_eq!(row.effective_replicates() + row.n_degenerate, row.n_reps);
            assert_eq!(row.design, kind);
        }
        let csv = sweep.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        assert_eq!(
            SWEEP_HEADER,
            "design,beta,gamma,de_mean,de_sd,ci_low,ci_high,n_reps,n_degenerate"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 5);
        for line in rows {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 9);
            assert_eq!(fields[0], kind.as_str());
            fields[7].parse::<usize>().unwrap();
            fields[8].parse::<usize>().unwrap();
        }
    }
}

#[test]
fn cluster_design_records_degenerate_trials() {
    let c = config(DesignKind::Cluster, 2, 200, Grid::point(0.0), None);
    let row = &run_sweep(&c, 1).unwrap().rows[0];
    // both clusters share an arm with probability 1/2
    assert!(row.n_degenerate > 60 && row.n_degenerate < 140, "{row:?}");
}

#[test]
fn common_random_numbers_across_designs() {
    // gamma = 0 and beta = 0: every design sees the same populations and
    // epidemic streams, so cluster sizes and outcomes coincide; only the
    // assignments differ
    let a = config(DesignKind::Block, 50, 2, Grid::point(0.0), None);
    let b = config(DesignKind::Cluster, 50, 2, Grid::point(0.0), None);
    let ta = contagion_de::experiments::simulate_trial(&a, 0.0, 0.0, 1).unwrap();
    let tb = contagion_de::experiments::simulate_trial(&b, 0.0, 0.0, 1).unwrap();
    for (x, y) in ta.clusters.iter().zip(&tb.clusters) {
        assert_eq!(x.eta(), y.eta());
        assert_eq!(x.horizon(), y.horizon());
    }
}

#[test]
fn fixed_population_reuses_coefficients() {
    let mut c = config(DesignKind::Bernoulli, 10, 3, Grid::point(0.0), None);
    c.coefficient_mode = CoefficientMode::FixedAcrossReplicates;
    let t0 = contagion_de::experiments::simulate_trial(&c, 0.0, 0.0, 0).unwrap();
    let t1 = contagion_de::experiments::simulate_trial(&c, 0.0, 0.0, 1).unwrap();
    for (x, y) in t0.clusters.iter().zip(&t1.clusters) {
        assert_eq!(x.eta(), y.eta());
        assert_eq!(x.xi(), y.xi());
    }
    c.coefficient_mode = CoefficientMode::RedrawPerReplicate;
    let r0 = contagion_de::experiments::simulate_trial(&c, 0.0, 0.0, 0).unwrap();
    let r1 = contagion_de::experiments::simulate_trial(&c, 0.0, 0.0, 1).unwrap();
    assert_ne!(r0.clusters[0].eta(), r1.clusters[0].eta());
}

#[test]
fn heatmap_mask_marks_sign_reversal() {
    let gamma = Grid {
        start: -2.0,
        stop: 2.0,
        step: 2.0,
    };
    let beta = Some(Grid {
        start: -0.1,
        stop: 0.1,
        step: 0.1,
    });
    let cluster = run_heatmap(&config(DesignKind::Cluster, 500, 200, gamma, beta), 0).unwrap();
    let cell = |b: f64, g: f64| {
        cluster
            .cells
            .iter()
            .find(|c| c.beta == b && c.gamma == g)
            .unwrap()
            .clone()
    };
    // a small positive susceptibility effect is swamped by gamma = -2
    let reversed = cell(0.1, -2.0);
    assert!(
        reversed.decisive && reversed.de_mean < 0.0 && reversed.mismatch,
        "{reversed:?}"
    );
    assert!(cell(0.0, -2.0).decisive && !cell(0.0, -2.0).mismatch);
    assert!(cluster.cells.iter().filter(|c| c.beta == 0.0).all(|c| !c.mismatch));

    let bernoulli = run_heatmap(&config(DesignKind::Bernoulli, 500, 200, gamma, beta), 0).unwrap();
    assert_eq!(bernoulli.mismatch_cells().count(), 0);
    let mut buf = Vec::new();
    bernoulli.write_mask_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("beta,gamma,design,de_mean,decisive,mismatch\n"));
    assert_eq!(text.lines().count(), 10);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert!(matches!(f[4], "0" | "1") && matches!(f[5], "0" | "1"), "{line}");
    }
}

#[test]
fn heatmap_requires_beta_grid() {
    let c = config(DesignKind::Block, 5, 2, Grid::point(0.0), None);
    assert!(run_heatmap(&c, 1).is_err());
}
