//! Sign checks of the direct effect under `beta = 0`.
//!
//! With no susceptibility effect the direct effect is zero under Bernoulli
//! randomization for every `gamma`. Under block randomization it has the
//! opposite sign of `gamma`; under cluster randomization the same sign. Each
//! check compares the replicate 95% interval with that expectation.

use serde::Serialize;

use crate::error::Result;
use crate::experiments::config::{ExperimentConfig, Grid, SweepSpec};
use crate::experiments::harness::{run_sweep, SweepRow};
use crate::randomization::{DesignKind, DesignSpec};

/// Gamma values probed by [`verify_propositions`].
pub const PROPOSITION_GAMMAS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Negative,
    ConsistentWithZero,
}

impl Verdict {
    pub fn from_interval(ci_low: f64, ci_high: f64) -> Self {
        if ci_low > 0.0 {
            Verdict::Positive
        } else if ci_high < 0.0 {
            Verdict::Negative
        } else {
            Verdict::ConsistentWithZero
        }
    }
}

/// Sign of the direct effect implied by the design and the sign of `gamma`.
pub fn expected_verdict(design: DesignKind, gamma: f64) -> Verdict {
    let sign = if gamma > 0.0 {
        Verdict::Positive
    } else if gamma < 0.0 {
        Verdict::Negative
    } else {
        return Verdict::ConsistentWithZero;
    };
    match (design, sign) {
        (DesignKind::Bernoulli, _) => Verdict::ConsistentWithZero,
        (DesignKind::Cluster, s) => s,
        (DesignKind::Block, Verdict::Positive) => Verdict::Negative,
        (DesignKind::Block, _) => Verdict::Positive,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropositionCheck {
    pub design: DesignKind,
    pub gamma: f64,
    pub expected: Verdict,
    pub row: SweepRow,
    /// `None` when replication is insufficient for an interval.
    pub verdict: Option<Verdict>,
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropositionReport {
    pub insufficient_replication: bool,
    pub checks: Vec<PropositionCheck>,
}

impl PropositionReport {
    pub fn all_passed(&self) -> bool {
        !self.insufficient_replication && self.checks.iter().all(|c| c.passed == Some(true))
    }
}

/// Run the 15 sign checks (three designs by five gamma values) with
/// `beta = 0`, using `template` for everything else. All designs use
/// `template.design.p`.
pub fn verify_propositions(template: &ExperimentConfig, threads: usize) -> Result<PropositionReport> {
    let insufficient_replication = template.n_replicates < 2;
    let mut checks = Vec::with_capacity(15);
    for kind in DesignKind::ALL {
        let mut config = template.clone();
        config.design = DesignSpec::new(kind, template.design.p)?;
        config.params = template.params.with_effects(0.0, 0.0)?;
        config.sweep = SweepSpec {
            gamma: Grid {
                start: PROPOSITION_GAMMAS[0],
                stop: PROPOSITION_GAMMAS[4],
                step: 1.0,
            },
            beta: None,
        };
        let sweep = run_sweep(&config, threads)?;
        for row in sweep.rows {
            let expected = expected_verdict(kind, row.gamma);
            let verdict = if insufficient_replication || row.effective_replicates() < 2 {
                None
            } else {
                Some(Verdict::from_interval(row.ci_low, row.ci_high))
            };
            checks.push(PropositionCheck {
                design: kind,
                gamma: row.gamma,
                expected,
                passed: verdict.map(|v| v == expected),
                verdict,
                row,
            });
        }
    }
    Ok(PropositionReport {
        insufficient_replication,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_signs() {
        assert_eq!(
            expected_verdict(DesignKind::Bernoulli, -2.0),
            Verdict::ConsistentWithZero
        );
        assert_eq!(expected_verdict(DesignKind::Block, -2.0), Verdict::Positive);
        assert_eq!(expected_verdict(DesignKind::Block, 1.0), Verdict::Negative);
        assert_eq!(expected_verdict(DesignKind::Cluster, -1.0), Verdict::Negative);
        assert_eq!(expected_verdict(DesignKind::Cluster, 2.0), Verdict::Positive);
        for kind in DesignKind::ALL {
            assert_eq!(expected_verdict(kind, 0.0), Verdict::ConsistentWithZero);
        }
    }

    #[test]
    fn interval_verdicts() {
        assert_eq!(Verdict::from_interval(0.1, 0.2), Verdict::Positive);
        assert_eq!(Verdict::from_interval(-0.2, -0.1), Verdict::Negative);
        assert_eq!(Verdict::from_interval(-0.1, 0.1), Verdict::ConsistentWithZero);
    }

    #[test]
    fn single_replicate_has_no_verdicts() {
        let mut config = ExperimentConfig::desk_defaults(DesignSpec::bernoulli(0.5).unwrap());
        config.n_replicates = 1;
        config.n_clusters = 10;
        let report = verify_propositions(&config, 1).unwrap();
        assert!(report.insufficient_replication);
        assert_eq!(report.checks.len(), 15);
        assert!(report.checks.iter().all(|c| c.verdict.is_none() && c.passed.is_none()));
        assert!(!report.all_passed());
    }
}
