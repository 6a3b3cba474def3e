//! Randomized equivalence sweep between the forward-backward engine and the
//! brute-force oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forward_backward::{posterior_pair, run};
use crate::matrices::bernoulli_matrix;
use crate::model::{compute_syndrome, NoiseModel, PriorModel};
use crate::oracle::{brute_posteriors, MAX_ORACLE_N};
use crate::trellis::{Trellis, DEFAULT_MAX_TESTS};

/// Deviation above which a sweep fails.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckConfig {
    pub cases: usize,
    pub max_m: usize,
    pub max_n: usize,
    pub seed: u64,
    pub deltas: Vec<f64>,
    pub noises: Vec<NoiseModel>,
    /// Multiplies the prevalence handed to the trellis engine (not the
    /// oracle). Anything other than 1 corrupts the branch metrics and must
    /// make the sweep fail.
    pub engine_delta_skew: f64,
}

impl Default for OracleCheckConfig {
    fn default() -> Self {
        OracleCheckConfig {
            cases: 200,
            max_m: 6,
            max_n: 12,
            seed: 1,
            deltas: vec![0.05, 0.3],
            noises: vec![
                NoiseModel::Noiseless,
                NoiseModel::Bsc { epsilon: 0.05 },
                NoiseModel::Bsc { epsilon: 0.2 },
            ],
            engine_delta_skew: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckReport {
    pub cases: usize,
    /// Largest relative deviation between engine and oracle posteriors.
    pub max_relative_deviation: f64,
    /// Description of the case that produced it.
    pub worst_case: String,
}

impl OracleCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_deviation <= tolerance
    }
}

fn relative_deviation(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn oracle_check(cfg: &OracleCheckConfig) -> Result<OracleCheckReport> {
    if cfg.max_n == 0 || cfg.max_n > MAX_ORACLE_N {
        return Err(Error::GuardExceeded {
            what: "oracle-check population",
            count: cfg.max_n as u128,
            limit: MAX_ORACLE_N as u128,
        });
    }
    if cfg.max_m == 0 || cfg.max_m > DEFAULT_MAX_TESTS {
        return Err(Error::GuardExceeded {
            what: "oracle-check tests",
            count: cfg.max_m as u128,
            limit: DEFAULT_MAX_TESTS as u128,
        });
    }
    if cfg.deltas.is_empty() || cfg.noises.is_empty() {
        return Err(Error::param("oracle-check", "need at least one prevalence and noise model"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = (0.0f64, String::from("none"));
    for case in 0..cfg.cases {
        let m = rng.gen_range(1..=cfg.max_m);
        let n = rng.gen_range(1..=cfg.max_n);
        let density = rng.gen_range(0.2..0.6);
        let a = bernoulli_matrix(m, n, density, rng.gen())?;
        let prior = PriorModel::new(cfg.deltas[case % cfg.deltas.len()])?;
        let noise = cfg.noises[(case / cfg.deltas.len()) % cfg.noises.len()];
        let x = prior.sample(n, &mut rng);
        let t = noise.observe(&compute_syndrome(&x, &a)?, &mut rng);

        let engine_prior = PriorModel::new(prior.delta() * cfg.engine_delta_skew)?;
        let engine = run(&Trellis::complete(&a)?, &engine_prior, &noise, &t)?;
        let oracle = brute_posteriors(&a, &t, &prior, &noise)?;

        for l in 0..n {
            let (p0, p1) = posterior_pair(engine.lapp()[l]);
            let dev = relative_deviation(p0, oracle.posterior_non_defective(l))
                .max(relative_deviation(p1, oracle.posterior_defective(l)));
            if dev > worst.0 || dev.is_nan() {
                worst = (
                    dev,
                    format!("case {case}: m={m} n={n} delta={} noise={noise} t={t} element {l}", prior.delta()),
                );
            }
        }
    }
    Ok(OracleCheckReport {
        cases: cfg.cases,
        max_relative_deviation: worst.0,
        worst_case: worst.1,
    })
}
