use contagion_de::model::{Cluster, ModelParams};
use contagion_de::oracle::{exact_de, exact_marginals};
use contagion_de::randomization::{DesignKind, DesignSpec};
use contagion_de::rng::stream;
use contagion_de::simulator::{simulate, simulate_coupled};

fn mc_marginals(params: &ModelParams, cluster: &Cluster, draws: u64, seed: u64) -> Vec<f64> {
    let n = cluster.size();
    let mut counts = vec![0u64; n];
    for i in 0..draws {
        let out = simulate(params, cluster, &mut stream(seed, &[i])).unwrap();
        for (c, &y) in counts.iter_mut().zip(&out.infected_by_horizon) {
            *c += u64::from(y);
        }
    }
    counts.iter().map(|&c| c as f64 / draws as f64).collect()
}

fn within_se(mc: f64, exact: f64, draws: u64, k: f64) -> bool {
    let se = (exact * (1.0 - exact) / draws as f64).sqrt();
    (mc - exact).abs() <= k * se.max(1e-12)
}

#[test]
fn pair_with_strong_infectiousness_matches_oracle() {
    let params = ModelParams::new(0.01, 0.0, 2.0).unwrap();
    let cluster = Cluster::homogeneous(2, 10.0)
        .unwrap()
        .with_treatment(&[true, false])
        .unwrap();
    let exact = exact_marginals(&params, &cluster, 10.0).unwrap();
    let draws = 100_000;
    let mc = mc_marginals(&params, &cluster, draws, 5);
    for (m, e) in mc.iter().zip(&exact) {
        assert!(within_se(*m, *e, draws, 3.0), "mc {m} exact {e}");
    }
}

#[test]
fn coupled_arms_match_oracle_marginals() {
    let params = ModelParams::new(0.05, 0.0, -1.0).unwrap();
    let base = Cluster::new(vec![0.1, -0.2, 0.0], vec![0.0, 0.3, -0.1], vec![false; 3], 10.0).unwrap();
    let (x1, x0) = ([true, false, true], [false, true, false]);
    let exact1 = exact_marginals(&params, &base.with_treatment(&x1).unwrap(), 10.0).unwrap();
    let exact0 = exact_marginals(&params, &base.with_treatment(&x0).unwrap(), 10.0).unwrap();
    let draws = 60_000u64;
    let mut c1 = [0u64; 3];
    let mut c0 = [0u64; 3];
    for i in 0..draws {
        let out = simulate_coupled(&params, &base, &x1, &x0, &mut stream(17, &[i])).unwrap();
        for j in 0..3 {
            c1[j] += u64::from(out.outcome_treated.infected_by_horizon[j]);
            c0[j] += u64::from(out.outcome_control.infected_by_horizon[j]);
        }
    }
    for j in 0..3 {
        assert!(within_se(c1[j] as f64 / draws as f64, exact1[j], draws, 3.5));
        assert!(within_se(c0[j] as f64 / draws as f64, exact0[j], draws, 3.5));
    }
}

#[test]
fn heterogeneous_cluster_and_initial_infection_match_oracle() {
    let params = ModelParams::new(0.02, 0.4, 0.7).unwrap();
    let cluster = Cluster::new(
        vec![0.3, -0.3, 0.0, 0.2],
        vec![-0.2, 0.1, 0.4, 0.0],
        vec![true, false, false, true],
        6.0,
    )
    .unwrap()
    .with_initial_infected(&[false, true, false, false])
    .unwrap();
    let exact = exact_marginals(&params, &cluster, 6.0).unwrap();
    assert!((exact[1] - 1.0).abs() < 1e-12);
    let draws = 60_000;
    let mc = mc_marginals(&params, &cluster, draws, 8);
    for (m, e) in mc.iter().zip(&exact) {
        assert!(within_se(*m, *e, draws, 3.5), "mc {m} exact {e}");
    }
}

#[test]
fn exact_de_is_zero_for_every_design_without_effects() {
    let params = ModelParams::new(0.05, 0.0, 0.0).unwrap();
    let cluster = Cluster::new(
        vec![0.2, -0.1, 0.0, 0.3],
        vec![0.1, 0.0, -0.3, 0.2],
        vec![false; 4],
        10.0,
    )
    .unwrap();
    for kind in DesignKind::ALL {
        let de = exact_de(&params, &cluster, &DesignSpec::new(kind, 0.5).unwrap(), 10.0).unwrap();
        assert!(de.per_individual.iter().all(|d| d.abs() < 1e-12), "{kind}: {de:?}");
    }
}

#[test]
fn exact_de_follows_susceptibility_under_bernoulli() {
    // under Bernoulli randomization the direct effect carries the sign of beta
    let cluster = Cluster::homogeneous(4, 10.0).unwrap();
    let design = DesignSpec::bernoulli(0.5).unwrap();
    for (beta, gamma) in [(0.5, -2.0), (-0.5, 2.0), (0.3, 1.5)] {
        let params = ModelParams::new(0.05, beta, gamma).unwrap();
        let de = exact_de(&params, &cluster, &design, 10.0).unwrap();
        assert!(
            de.per_individual.iter().all(|&d| d.signum() == f64::signum(beta)),
            "{de:?}"
        );
    }
}
