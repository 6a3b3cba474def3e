//! Brute-force posterior reference.
//!
//! Sums `Q(t | s(x)) * delta^w(x) * (1 - delta)^(n - w(x))` over all `2^n`
//! defectivity vectors. Nothing here goes through the trellis or the syndrome
//! helpers of the model module: the pooling is read entry by entry, the
//! syndrome is tracked with per-test defective counters under a Gray-code
//! walk, and the channel likelihood is multiplied out test by test.

use crate::error::{Error, Result};
use crate::model::{NoiseModel, PriorModel, TestMatrix, TestVector};

/// Largest population the oracle will enumerate.
pub const MAX_ORACLE_N: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Unnormalized `P(X_l = 0, T = t)` per element.
    pub mass0: Vec<f64>,
    /// Unnormalized `P(X_l = 1, T = t)` per element.
    pub mass1: Vec<f64>,
}

impl OracleResult {
    /// `P(T = t)` as seen from element `l`.
    pub fn evidence(&self, l: usize) -> f64 {
        self.mass0[l] + self.mass1[l]
    }

    pub fn posterior_defective(&self, l: usize) -> f64 {
        self.mass1[l] / self.evidence(l)
    }

    pub fn posterior_non_defective(&self, l: usize) -> f64 {
        self.mass0[l] / self.evidence(l)
    }

    pub fn lapp(&self, l: usize) -> f64 {
        self.mass0[l].ln() - self.mass1[l].ln()
    }
}

/// Exhaustive posterior masses for every element.
pub fn brute_posteriors(
    a: &TestMatrix,
    t: &TestVector,
    prior: &PriorModel,
    noise: &NoiseModel,
) -> Result<OracleResult> {
    let (m, n) = (a.m(), a.n());
    if n > MAX_ORACLE_N {
        return Err(Error::GuardExceeded {
            what: "oracle population",
            count: n as u128,
            limit: MAX_ORACLE_N as u128,
        });
    }
    if t.len() != m {
        return Err(Error::DimensionMismatch {
            what: "test vector",
            expected: m,
            found: t.len(),
        });
    }

    let pools: Vec<Vec<usize>> = (0..n)
        .map(|l| (0..m).filter(|&i| a.get(i, l)).collect())
        .collect();
    let observed: Vec<bool> = (0..m).map(|i| t.get(i)).collect();

    let delta = prior.delta();
    // prior weight by Hamming weight, by repeated multiplication
    let mut by_weight = vec![1.0f64; n + 1];
    for (w, slot) in by_weight.iter_mut().enumerate() {
        for _ in 0..w {
            *slot *= delta;
        }
        for _ in w..n {
            *slot *= 1.0 - delta;
        }
    }

    let likelihood = |positives: &[u32]| -> f64 {
        match *noise {
            NoiseModel::Noiseless => {
                let all_match = positives
                    .iter()
                    .zip(&observed)
                    .all(|(&c, &o)| (c > 0) == o);
                if all_match {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::Bsc { epsilon } => {
                positives
                    .iter()
                    .zip(&observed)
                    .fold(1.0, |acc, (&c, &o)| {
                        if (c > 0) == o {
                            acc * (1.0 - epsilon)
                        } else {
                            acc * epsilon
                        }
                    })
            }
        }
    };

    let mut x = vec![false; n];
    let mut counts = vec![0u32; m];
    let mut weight = 0usize;
    let mut mass0 = vec![0.0f64; n];
    let mut mass1 = vec![0.0f64; n];

    let total: u64 = 1u64 << n;
    for k in 0..total {
        if k > 0 {
            let flip = k.trailing_zeros() as usize;
            x[flip] = !x[flip];
            for &i in &pools[flip] {
                if x[flip] {
                    counts[i] += 1;
                } else {
                    counts[i] -= 1;
                }
            }
            if x[flip] {
                weight += 1;
            } else {
                weight -= 1;
            }
        }
        let q = likelihood(&counts);
        if q == 0.0 {
            continue;
        }
        let p = q * by_weight[weight];
        for (l, &bit) in x.iter().enumerate() {
            if bit {
                mass1[l] += p;
            } else {
                mass0[l] += p;
            }
        }
    }
    Ok(OracleResult { mass0, mass1 })
}
