//! Treatment assignment designs and their exact allocation probabilities.
//!
//! * Bernoulli: each individual treated independently with probability `p`.
//! * Block: exactly `m = floor(p n)` of the `n` members treated, every subset
//!   of that size equally likely. Requires `1 <= m <= n - 1`.
//! * Cluster: everyone treated with probability `p`, otherwise nobody.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Bernoulli,
    Block,
    Cluster,
}

impl DesignKind {
    pub const ALL: [DesignKind; 3] = [DesignKind::Bernoulli, DesignKind::Block, DesignKind::Cluster];

    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Bernoulli => "bernoulli",
            DesignKind::Block => "block",
            DesignKind::Cluster => "cluster",
        }
    }
}

impl std::fmt::Display for DesignKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(DesignKind::Bernoulli),
            "block" => Ok(DesignKind::Block),
            "cluster" => Ok(DesignKind::Cluster),
            other => Err(invalid("design", format!("unknown design `{other}`"))),
        }
    }
}

/// A randomization design: its kind and treatment probability (block
/// fraction for block designs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub p: f64,
}

// floor(p n) evaluated with a little slack so that e.g. p = 0.3, n = 10 gives 3
const FLOOR_SLACK: f64 = 1e-9;

impl DesignSpec {
    pub fn new(kind: DesignKind, p: f64) -> Result<Self> {
        let design = DesignSpec { kind, p };
        design.validate()?;
        Ok(design)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        DesignSpec::new(DesignKind::Bernoulli, p)
    }

    pub fn block(p: f64) -> Result<Self> {
        DesignSpec::new(DesignKind::Block, p)
    }

    pub fn cluster(p: f64) -> Result<Self> {
        DesignSpec::new(DesignKind::Cluster, p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid("p", "treatment probability must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Number treated per cluster of size `n` under a block design.
    pub fn block_size(&self, n: usize) -> Result<usize> {
        let m = (self.p * n as f64 + FLOOR_SLACK).floor() as usize;
        if m == 0 || m >= n {
            return Err(Error::DegenerateBlockDesign {
                p: self.p,
                n,
                treated: m,
            });
        }
        Ok(m)
    }

    fn check_size(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(invalid("n", "cluster size must be at least 1"));
        }
        if self.kind == DesignKind::Block {
            self.block_size(n)?;
        }
        Ok(())
    }

    /// Draw a treatment vector for a cluster of size `n`.
    pub fn assign<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<bool>> {
        self.check_size(n)?;
        Ok(match self.kind {
            DesignKind::Bernoulli => (0..n).map(|_| rng.random_bool(self.p)).collect(),
            DesignKind::Block => {
                let mut x = vec![false; n];
                for j in index::sample(rng, n, self.block_size(n)?) {
                    x[j] = true;
                }
                x
            }
            DesignKind::Cluster => vec![rng.random_bool(self.p); n],
        })
    }

    /// Exact probability of the full allocation `x`.
    pub fn allocation_pmf(&self, x: &[bool]) -> Result<f64> {
        let n = x.len();
        self.check_size(n)?;
        let treated = x.iter().filter(|&&v| v).count();
        Ok(match self.kind {
            DesignKind::Bernoulli => bernoulli_product(self.p, x),
            DesignKind::Block => {
                let m = self.block_size(n)?;
                if treated == m {
                    1.0 / binomial(n, m) as f64
                } else {
                    0.0
                }
            }
            DesignKind::Cluster => {
                if treated == n {
                    self.p
                } else if treated == 0 {
                    1.0 - self.p
                } else {
                    0.0
                }
            }
        })
    }

    /// Marginal probability that a given individual has treatment `x_j`.
    pub fn marginal_treatment_prob(&self, n: usize, x_j: bool) -> Result<f64> {
        self.check_size(n)?;
        let p1 = match self.kind {
            DesignKind::Bernoulli | DesignKind::Cluster => self.p,
            DesignKind::Block => self.block_size(n)? as f64 / n as f64,
        };
        Ok(if x_j { p1 } else { 1.0 - p1 })
    }

    /// `P(X_others = x_others | X_j = x_j)` for a cluster of size `n`, where
    /// `x_others` lists the other members' treatments in index order with
    /// `j` removed. Returns 0 for patterns incompatible with the condition.
    pub fn conditional_pmf_others(&self, n: usize, j: usize, x_j: bool, x_others: &[bool]) -> Result<f64> {
        self.check_size(n)?;
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, size: n });
        }
        if x_others.len() != n - 1 {
            return Err(Error::LengthMismatch {
                what: "x_others",
                expected: n - 1,
                actual: x_others.len(),
            });
        }
        let treated = x_others.iter().filter(|&&v| v).count();
        Ok(match self.kind {
            DesignKind::Bernoulli => bernoulli_product(self.p, x_others),
            DesignKind::Block => {
                let m = self.block_size(n)?;
                let remaining = m - usize::from(x_j);
                if treated == remaining {
                    1.0 / binomial(n - 1, remaining) as f64
                } else {
                    0.0
                }
            }
            DesignKind::Cluster => {
                let all_match = x_others.iter().all(|&v| v == x_j);
                if all_match {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

fn bernoulli_product(p: f64, x: &[bool]) -> f64 {
    x.iter().map(|&v| if v { p } else { 1.0 - p }).product()
}

/// Binomial coefficient, exact in `u128` for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All binary vectors of length `n`, as bit patterns `0..2^n`.
pub(crate) fn bits(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|j| mask >> j & 1 == 1).collect()
}
