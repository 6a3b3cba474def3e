//! Threshold decisions on log APP ratios and Monte Carlo estimation of the
//! false-alarm / miss-detection trade-off.
//!
//! Trial `k` of a run with seed `s` draws everything from a ChaCha8 stream
//! keyed by `s` with stream id `k`, so results do not depend on how trials
//! are split across workers. Counts are aggregated by summation.

use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward_backward::{run, ForwardPass, PosteriorResult};
use crate::model::{
    compute_syndrome, DefectivityVector, NoiseModel, PriorModel, Syndrome, TestMatrix, TestVector,
};
use crate::trellis::Trellis;

/// Decision at `L == lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    Defective,
    NonDefective,
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Defective => "defective",
            TiePolicy::NonDefective => "non-defective",
        })
    }
}

/// Threshold test on the log APP ratio: `x_hat = 0` when `L > lambda`.
///
/// `L = +inf` (surely non-defective) always decides 0, and so does
/// `lambda = -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    /// Threshold in the APP-ratio domain.
    pub lambda: f64,
    pub tie: TiePolicy,
}

impl ThresholdRule {
    pub fn app(lambda: f64) -> Self {
        ThresholdRule {
            lambda,
            tie: TiePolicy::default(),
        }
    }

    /// Threshold given in the LLR domain, `lambda' = lambda - log((1-delta)/delta)`.
    pub fn llr(lambda_prime: f64, prior: &PriorModel) -> Self {
        ThresholdRule::app(llr_to_app(lambda_prime, prior))
    }

    pub fn with_tie(self, tie: TiePolicy) -> Self {
        ThresholdRule { tie, ..self }
    }

    pub fn lambda_prime(&self, prior: &PriorModel) -> f64 {
        app_to_llr(self.lambda, prior)
    }

    pub fn decides_defective(&self, lapp: f64) -> bool {
        compare(lapp, self.lambda, self.tie)
    }
}

fn compare(value: f64, threshold: f64, tie: TiePolicy) -> bool {
    if value == f64::INFINITY || threshold == f64::NEG_INFINITY {
        return false;
    }
    if value > threshold {
        false
    } else if value < threshold {
        true
    } else {
        tie == TiePolicy::Defective
    }
}

pub fn app_to_llr(lambda: f64, prior: &PriorModel) -> f64 {
    lambda - prior.log_prior_ratio()
}

pub fn llr_to_app(lambda_prime: f64, prior: &PriorModel) -> f64 {
    lambda_prime + prior.log_prior_ratio()
}

/// `L_l = log P(t | X_l = 0) - log P(t | X_l = 1)` from the APP ratios.
pub fn lapp_to_llr(lapp: &[f64], prior: &PriorModel) -> Vec<f64> {
    let shift = prior.log_prior_ratio();
    lapp.iter().map(|&v| v - shift).collect()
}

/// Applies the threshold test to every element.
pub fn decide(lapp: &[f64], rule: &ThresholdRule) -> DefectivityVector {
    DefectivityVector::new(lapp.iter().map(|&v| rule.decides_defective(v)).collect())
}

/// The same test in LLR form.
pub fn decide_llr(llr: &[f64], lambda_prime: f64, tie: TiePolicy) -> DefectivityVector {
    DefectivityVector::new(llr.iter().map(|&v| compare(v, lambda_prime, tie)).collect())
}

/// COMP: everything not seen in a negative test is flagged defective.
pub fn comp_decide(a: &TestMatrix, t: &TestVector) -> Result<DefectivityVector> {
    if t.len() != a.m() {
        return Err(Error::DimensionMismatch {
            what: "test vector",
            expected: a.m(),
            found: t.len(),
        });
    }
    Ok(DefectivityVector::new(
        (0..a.n())
            .map(|l| !(0..a.m()).any(|i| a.get(i, l) && !t.get(i)))
            .collect(),
    ))
}

/// A `(P_FA, P_MD)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub p_fa: f64,
    pub p_md: f64,
}

impl RocPoint {
    pub fn detection(&self) -> f64 {
        1.0 - self.p_md
    }
}

/// Operating point of a randomized test that uses `p2`'s threshold with
/// probability `mix` and `p1`'s otherwise.
pub fn randomized_interpolation(p1: RocPoint, p2: RocPoint, mix: f64) -> Result<RocPoint> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::param("mix", format!("must lie in [0, 1], got {mix}")));
    }
    Ok(RocPoint {
        p_fa: (1.0 - mix) * p1.p_fa + mix * p2.p_fa,
        p_md: (1.0 - mix) * p1.p_md + mix * p2.p_md,
    })
}

/// Pooled event counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub lambda: f64,
    /// Non-defective elements flagged defective.
    pub fa_events: u64,
    /// Non-defective elements seen.
    pub fa_trials: u64,
    /// Defective elements declared non-defective.
    pub md_events: u64,
    /// Defective elements seen.
    pub md_trials: u64,
}

fn ratio(events: u64, trials: u64) -> Option<f64> {
    (trials > 0).then(|| events as f64 / trials as f64)
}

/// Normal-approximation 95% half-width of a binomial proportion.
fn half_width(events: u64, trials: u64) -> Option<f64> {
    ratio(events, trials).map(|p| 1.96 * (p * (1.0 - p) / trials as f64).sqrt())
}

impl OperatingPoint {
    fn empty(lambda: f64) -> Self {
        OperatingPoint {
            lambda,
            fa_events: 0,
            fa_trials: 0,
            md_events: 0,
            md_trials: 0,
        }
    }

    /// `None` when no non-defective element was ever drawn.
    pub fn p_fa(&self) -> Option<f64> {
        ratio(self.fa_events, self.fa_trials)
    }

    /// `None` when no defective element was ever drawn.
    pub fn p_md(&self) -> Option<f64> {
        ratio(self.md_events, self.md_trials)
    }

    pub fn p_fa_half_width(&self) -> Option<f64> {
        half_width(self.fa_events, self.fa_trials)
    }

    pub fn p_md_half_width(&self) -> Option<f64> {
        half_width(self.md_events, self.md_trials)
    }

    pub fn point(&self) -> Option<RocPoint> {
        Some(RocPoint {
            p_fa: self.p_fa()?,
            p_md: self.p_md()?,
        })
    }

    fn merge(&mut self, other: &OperatingPoint) {
        self.fa_events += other.fa_events;
        self.fa_trials += other.fa_trials;
        self.md_events += other.md_events;
        self.md_trials += other.md_trials;
    }

    fn record(&mut self, x: &DefectivityVector, lapp: &[f64], rule: &ThresholdRule) {
        for (l, &v) in lapp.iter().enumerate() {
            let flagged = rule.decides_defective(v);
            if x.get(l) {
                self.md_trials += 1;
                self.md_events += !flagged as u64;
            } else {
                self.fa_trials += 1;
                self.fa_events += flagged as u64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocMetadata {
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    pub noise: NoiseModel,
    pub trials: u64,
    pub seed: u64,
    pub tie: TiePolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Sorted by increasing `lambda`.
    pub points: Vec<OperatingPoint>,
    pub meta: RocMetadata,
}

pub const ROC_CSV_HEADER: &str = "lambda,p_fa,p_md,fa_events,fa_trials,md_events,md_trials";

fn fmt_estimate(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |p| p.to_string())
}

impl RocCurve {
    /// Writes the CSV: `#` metadata lines (`extra` first, then the run
    /// parameters), the header, then one row per threshold.
    pub fn write_csv<W: Write>(&self, mut w: W, extra: &[(String, String)]) -> io::Result<()> {
        for (k, v) in extra {
            writeln!(w, "# {k}={v}")?;
        }
        let meta = &self.meta;
        writeln!(w, "# m={}", meta.m)?;
        writeln!(w, "# n={}", meta.n)?;
        writeln!(w, "# delta={}", meta.delta)?;
        writeln!(w, "# noise={}", meta.noise)?;
        writeln!(w, "# epsilon={}", meta.noise.epsilon())?;
        writeln!(w, "# trials={}", meta.trials)?;
        writeln!(w, "# seed={}", meta.seed)?;
        writeln!(w, "# tie={}", meta.tie)?;
        writeln!(w, "# rng=chacha8(seed, stream=trial)")?;
        writeln!(w, "{ROC_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.lambda,
                fmt_estimate(p.p_fa()),
                fmt_estimate(p.p_md()),
                p.fa_events,
                p.fa_trials,
                p.md_events,
                p.md_trials
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self, extra: &[(String, String)]) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, extra).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Defined points sorted by `P_FA` (ties broken by `P_MD`, descending).
    pub fn roc_points(&self) -> Vec<RocPoint> {
        let mut pts: Vec<RocPoint> = self.points.iter().filter_map(|p| p.point()).collect();
        pts.sort_by(|a, b| {
            a.p_fa
                .total_cmp(&b.p_fa)
                .then(b.p_md.total_cmp(&a.p_md))
        });
        pts
    }

    /// Detection probability `1 - P_MD` of the piecewise-linear curve
    /// through the achievable points at false-alarm rate `p_fa`, using
    /// randomized tests between neighbouring thresholds. `None` outside the
    /// covered `P_FA` range.
    pub fn detection_at(&self, p_fa: f64) -> Option<f64> {
        let pts = self.roc_points();
        let mut best: Option<f64> = None;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if p_fa < a.p_fa || p_fa > b.p_fa {
                continue;
            }
            let mix = if b.p_fa > a.p_fa {
                (p_fa - a.p_fa) / (b.p_fa - a.p_fa)
            } else {
                1.0
            };
            let p = randomized_interpolation(a, b, mix.clamp(0.0, 1.0)).ok()?;
            best = Some(best.map_or(p.detection(), |d: f64| d.max(p.detection())));
        }
        if pts.len() == 1 && pts[0].p_fa == p_fa {
            best = Some(pts[0].detection());
        }
        best
    }
}

/// The default threshold grid: 61 points uniform in the LLR domain over
/// `[-15, 15]`, mapped to the APP domain.
pub fn default_lambda_grid(prior: &PriorModel) -> Vec<f64> {
    (0..61)
        .map(|k| llr_to_app(-15.0 + 0.5 * k as f64, prior))
        .collect()
}

/// Log APP ratios for one observation, dispatching on the noise model:
/// noiseless observations use the reduced trellis, noisy ones reuse the
/// forward metrics of the complete trellis.
pub struct Detector<'a> {
    a: &'a TestMatrix,
    prior: PriorModel,
    noise: NoiseModel,
    forward: Option<ForwardPass<'a>>,
}

impl<'a> Detector<'a> {
    /// `complete` must be the complete trellis of `a` when `noise` is noisy;
    /// it is ignored otherwise.
    pub fn new(
        a: &'a TestMatrix,
        complete: Option<&'a Trellis>,
        prior: PriorModel,
        noise: NoiseModel,
    ) -> Result<Self> {
        let forward = if noise.is_noiseless() {
            None
        } else {
            let tr = complete.ok_or_else(|| {
                Error::param("trellis", "noisy detection needs the complete trellis")
            })?;
            if tr.population() != a.n() || tr.m() != a.m() {
                return Err(Error::param("trellis", "complete trellis does not match the matrix"));
            }
            Some(ForwardPass::new(tr, prior)?)
        };
        Ok(Detector {
            a,
            prior,
            noise,
            forward,
        })
    }

    pub fn lapp(&self, t: &TestVector) -> Result<PosteriorResult> {
        match &self.forward {
            Some(fp) => fp.posterior(&self.noise, t),
            None => {
                let reduced = Trellis::reduced(self.a, t)?;
                run(&reduced, &self.prior, &NoiseModel::Noiseless, t)
            }
        }
    }
}

/// Draws the defectivity vector and observation of trial `trial`.
pub fn draw_trial(
    a: &TestMatrix,
    prior: &PriorModel,
    noise: &NoiseModel,
    seed: u64,
    trial: u64,
) -> (DefectivityVector, Syndrome, TestVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let x = prior.sample(a.n(), &mut rng);
    let s = compute_syndrome(&x, a).expect("sampled vector has the matrix width");
    let t = noise.observe(&s, &mut rng);
    (x, s, t)
}

/// Monte Carlo configuration shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl MonteCarlo {
    pub fn new(trials: u64, seed: u64) -> Self {
        MonteCarlo {
            trials,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        MonteCarlo {
            workers: Some(workers),
            ..self
        }
    }

    /// Counts for every rule, with all rules judged on the same trials.
    pub fn evaluate(
        &self,
        a: &TestMatrix,
        prior: &PriorModel,
        noise: &NoiseModel,
        rules: &[ThresholdRule],
    ) -> Result<Vec<OperatingPoint>> {
        if self.trials == 0 {
            return Err(Error::param("trials", "need at least one trial"));
        }
        let complete = if noise.is_noiseless() {
            None
        } else {
            Some(Trellis::complete(a)?)
        };
        let detector = Detector::new(a, complete.as_ref(), *prior, *noise)?;
        let empty: Vec<OperatingPoint> = rules.iter().map(|r| OperatingPoint::empty(r.lambda)).collect();

        let work = || {
            (0..self.trials)
                .into_par_iter()
                .try_fold(
                    || empty.clone(),
                    |mut acc, trial| -> Result<Vec<OperatingPoint>> {
                        let (x, _, t) = draw_trial(a, prior, noise, self.seed, trial);
                        let post = detector.lapp(&t)?;
                        for (op, rule) in acc.iter_mut().zip(rules) {
                            op.record(&x, post.lapp(), rule);
                        }
                        Ok(acc)
                    },
                )
                .try_reduce(
                    || empty.clone(),
                    |mut lhs, rhs| {
                        lhs.iter_mut().zip(&rhs).for_each(|(l, r)| l.merge(r));
                        Ok(lhs)
                    },
                )
        };
        match self.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::param("workers", e.to_string()))?
                .install(work),
            None => work(),
        }
    }

    pub fn operating_point(
        &self,
        a: &TestMatrix,
        prior: &PriorModel,
        noise: &NoiseModel,
        rule: &ThresholdRule,
    ) -> Result<OperatingPoint> {
        Ok(self.evaluate(a, prior, noise, std::slice::from_ref(rule))?.remove(0))
    }

    /// ROC sweep over `lambdas` (ascending) plus both infinite endpoints.
    pub fn sweep_roc(
        &self,
        a: &TestMatrix,
        prior: &PriorModel,
        noise: &NoiseModel,
        lambdas: &[f64],
        tie: TiePolicy,
    ) -> Result<RocCurve> {
        if lambdas.is_empty() {
            return Err(Error::param("lambdas", "need at least one threshold"));
        }
        if lambdas.iter().any(|v| v.is_nan()) || lambdas.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("lambdas", "thresholds must be sorted and not NaN"));
        }
        let mut grid = Vec::with_capacity(lambdas.len() + 2);
        if lambdas[0] != f64::NEG_INFINITY {
            grid.push(f64::NEG_INFINITY);
        }
        grid.extend_from_slice(lambdas);
        if lambdas[lambdas.len() - 1] != f64::INFINITY {
            grid.push(f64::INFINITY);
        }
        grid.dedup();
        let rules: Vec<ThresholdRule> = grid.iter().map(|&l| ThresholdRule::app(l).with_tie(tie)).collect();
        let points = self.evaluate(a, prior, noise, &rules)?;
        Ok(RocCurve {
            points,
            meta: RocMetadata {
                m: a.m(),
                n: a.n(),
                delta: prior.delta(),
                noise: *noise,
                trials: self.trials,
                seed: self.seed,
                tie,
            },
        })
    }
}

/// Monte Carlo estimate of `(P_FA, P_MD)` at one threshold.
pub fn estimate_operating_point(
    a: &TestMatrix,
    prior: &PriorModel,
    noise: &NoiseModel,
    rule: &ThresholdRule,
    trials: u64,
    seed: u64,
) -> Result<OperatingPoint> {
    MonteCarlo::new(trials, seed).operating_point(a, prior, noise, rule)
}

/// ROC sweep with common random numbers across thresholds.
pub fn sweep_roc(
    a: &TestMatrix,
    prior: &PriorModel,
    noise: &NoiseModel,
    lambdas: &[f64],
    trials: u64,
    seed: u64,
) -> Result<RocCurve> {
    MonteCarlo::new(trials, seed).sweep_roc(a, prior, noise, lambdas, TiePolicy::default())
}

/// Largest population accepted by [`exact_operating_points`].
pub const MAX_EXACT_N: usize = 16;

/// Exact pooled `(P_FA, P_MD)` for each rule, by enumerating every
/// defectivity vector (and every observation for noisy models) weighted by
/// its probability.
pub fn exact_operating_points(
    a: &TestMatrix,
    prior: &PriorModel,
    noise: &NoiseModel,
    rules: &[ThresholdRule],
) -> Result<Vec<RocPoint>> {
    let (m, n) = (a.m(), a.n());
    if n > MAX_EXACT_N {
        return Err(Error::GuardExceeded {
            what: "exact enumeration population",
            count: n as u128,
            limit: MAX_EXACT_N as u128,
        });
    }
    let complete = Trellis::complete(a)?;
    let fp = ForwardPass::new(&complete, *prior)?;
    let outcomes: Vec<TestVector> = if noise.is_noiseless() {
        Vec::new()
    } else {
        (0..(1u64 << m)).map(|w| TestVector::from_word(w, m)).collect::<Result<_>>()?
    };
    // decisions per observation, computed lazily
    let mut cache: std::collections::HashMap<u64, Vec<DefectivityVector>> = Default::default();
    let mut fa = vec![0.0f64; rules.len()];
    let mut md = vec![0.0f64; rules.len()];
    let delta = prior.delta();

    for w in 0..(1u64 << n) {
        let x = DefectivityVector::from_word(w, n);
        let k = x.weight() as i32;
        let px = delta.powi(k) * (1.0 - delta).powi(n as i32 - k);
        let s = compute_syndrome(&x, a)?;
        let observations: Vec<(TestVector, f64)> = if noise.is_noiseless() {
            vec![(s, 1.0)]
        } else {
            outcomes.iter().map(|t| Ok((*t, noise.likelihood(t, &s)?))).collect::<Result<_>>()?
        };
        for (t, q) in observations {
            let weight = px * q;
            if weight == 0.0 {
                continue;
            }
            let decisions = match cache.entry(t.word()) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let post = fp.posterior(noise, &t)?;
                    e.insert(rules.iter().map(|r| decide(post.lapp(), r)).collect())
                }
            };
            for (r, xhat) in decisions.iter().enumerate() {
                for l in 0..n {
                    match (x.get(l), xhat.get(l)) {
                        (false, true) => fa[r] += weight,
                        (true, false) => md[r] += weight,
                        _ => {}
                    }
                }
            }
        }
    }
    let zeros = n as f64 * (1.0 - delta);
    let ones = n as f64 * delta;
    Ok(fa
        .into_iter()
        .zip(md)
        .map(|(f, d)| RocPoint {
            p_fa: f / zeros,
            p_md: d / ones,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{small_matrix, random_matrix};
    use rand::Rng;

    fn t(s: &str) -> TestVector {
        s.parse().unwrap()
    }

    fn bits(x: &DefectivityVector) -> String {
        x.to_string()
    }

    #[test]
    fn decide_examples() {
        let lapp = [f64::INFINITY, 2.0, -1.0];
        assert_eq!(bits(&decide(&lapp, &ThresholdRule::app(0.0))), "001");
        assert_eq!(bits(&decide(&lapp, &ThresholdRule::app(f64::NEG_INFINITY))), "000");
        assert_eq!(bits(&decide(&[f64::NEG_INFINITY, 3.0], &ThresholdRule::app(f64::NEG_INFINITY))), "00");
        assert_eq!(bits(&decide(&lapp, &ThresholdRule::app(f64::INFINITY))), "011");
    }

    #[test]
    fn tie_policy() {
        let rule = ThresholdRule::app(1.0);
        assert!(rule.decides_defective(1.0));
        assert!(!rule.with_tie(TiePolicy::NonDefective).decides_defective(1.0));
    }

    #[test]
    fn llr_and_app_thresholds_agree() {
        let prior = PriorModel::new(0.015).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let lapp: Vec<f64> = (0..20)
                .map(|_| match rng.gen_range(0..10) {
                    0 => f64::INFINITY,
                    1 => f64::NEG_INFINITY,
                    _ => rng.gen_range(-20.0..20.0),
                })
                .collect();
            let lambda_prime = rng.gen_range(-15.0..15.0);
            let rule = ThresholdRule::llr(lambda_prime, &prior);
            assert!((rule.lambda_prime(&prior) - lambda_prime).abs() < 1e-12);
            let llr = lapp_to_llr(&lapp, &prior);
            assert_eq!(decide(&lapp, &rule), decide_llr(&llr, lambda_prime, rule.tie));
        }
    }

    #[test]
    fn decisions_are_nested_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let lapp: Vec<f64> = (0..15).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let l1 = rng.gen_range(-6.0..6.0);
            let l2 = l1 + rng.gen_range(0.0..3.0);
            let lo = decide(&lapp, &ThresholdRule::app(l1));
            let hi = decide(&lapp, &ThresholdRule::app(l2));
            assert!((0..15).all(|l| !lo.get(l) || hi.get(l)));
        }
    }

    #[test]
    fn comp_examples() {
        let a = small_matrix();
        assert_eq!(bits(&comp_decide(&a, &t("101")).unwrap()), "100101");
        assert_eq!(bits(&comp_decide(&a, &t("000")).unwrap()), "000000");
        assert_eq!(bits(&comp_decide(&a, &t("111")).unwrap()), "111111");
        assert!(comp_decide(&a, &t("11")).is_err());
    }

    #[test]
    fn infinite_threshold_recovers_comp() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let m = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=12);
            let a = random_matrix(&mut rng, m, n, 0.4);
            let prior = PriorModel::new(0.2).unwrap();
            let x = prior.sample(n, &mut rng);
            let s = compute_syndrome(&x, &a).unwrap();
            let post = run(&Trellis::reduced(&a, &s).unwrap(), &prior, &NoiseModel::Noiseless, &s).unwrap();
            let comp = comp_decide(&a, &s).unwrap();
            assert_eq!(decide(post.lapp(), &ThresholdRule::app(f64::INFINITY)), comp);
            // a large finite threshold gives the same answer here
            assert_eq!(decide(post.lapp(), &ThresholdRule::app(1e6)), comp);
            // no defective is ever missed
            assert!((0..n).all(|l| !x.get(l) || comp.get(l)));
        }
    }

    #[test]
    fn interpolation() {
        let p1 = RocPoint { p_fa: 0.1, p_md: 0.5 };
        let p2 = RocPoint { p_fa: 0.3, p_md: 0.1 };
        assert_eq!(randomized_interpolation(p1, p2, 0.0).unwrap(), p1);
        assert_eq!(randomized_interpolation(p1, p2, 1.0).unwrap(), p2);
        let mid = randomized_interpolation(p1, p2, 0.5).unwrap();
        assert!((mid.p_fa - 0.2).abs() < 1e-15 && (mid.p_md - 0.3).abs() < 1e-15);
        assert!(randomized_interpolation(p1, p2, 1.5).is_err());
        assert!(randomized_interpolation(p1, p2, -0.1).is_err());
    }

    #[test]
    fn undefined_estimates() {
        let op = OperatingPoint::empty(0.0);
        assert_eq!(op.p_fa(), None);
        assert_eq!(op.p_md(), None);
        assert_eq!(op.point(), None);
    }

    #[test]
    fn no_defectives_drawn_leaves_p_md_undefined() {
        let a = small_matrix();
        // delta small enough that 5 trials draw no defective with this seed
        let prior = PriorModel::new(1e-9).unwrap();
        let op = estimate_operating_point(&a, &prior, &NoiseModel::Noiseless, &ThresholdRule::app(0.0), 5, 1)
            .unwrap();
        assert_eq!(op.md_trials, 0);
        assert_eq!(op.p_md(), None);
        assert_eq!(op.p_fa(), Some(0.0));
        assert!(estimate_operating_point(&a, &prior, &NoiseModel::Noiseless, &ThresholdRule::app(0.0), 0, 1).is_err());
    }

    #[test]
    fn sweep_endpoints_and_monotonicity() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        for noise in [NoiseModel::Noiseless, NoiseModel::bsc(0.1).unwrap()] {
            let curve = sweep_roc(&a, &prior, &noise, &default_lambda_grid(&prior), 2000, 17).unwrap();
            assert_eq!(curve.points.len(), 63);
            let first = curve.points[0];
            assert_eq!(first.lambda, f64::NEG_INFINITY);
            assert_eq!((first.p_fa(), first.p_md()), (Some(0.0), Some(1.0)));
            let last = curve.points[62];
            assert_eq!(last.lambda, f64::INFINITY);
            if noise.is_noiseless() {
                assert_eq!(last.p_md(), Some(0.0));
            }
            for w in curve.points.windows(2) {
                assert!(w[0].fa_events <= w[1].fa_events);
                assert!(w[0].md_events >= w[1].md_events);
                assert_eq!(w[0].fa_trials, w[1].fa_trials);
            }
        }
        assert!(sweep_roc(&a, &prior, &NoiseModel::Noiseless, &[], 10, 1).is_err());
        assert!(sweep_roc(&a, &prior, &NoiseModel::Noiseless, &[1.0, 0.0], 10, 1).is_err());
    }

    #[test]
    fn results_independent_of_worker_count() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        let noise = NoiseModel::bsc(0.05).unwrap();
        let grid = default_lambda_grid(&prior);
        let one = MonteCarlo::new(3000, 99).with_workers(1).sweep_roc(&a, &prior, &noise, &grid, TiePolicy::Defective).unwrap();
        let four = MonteCarlo::new(3000, 99).with_workers(4).sweep_roc(&a, &prior, &noise, &grid, TiePolicy::Defective).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.csv_string(&[]), four.csv_string(&[]));
    }

    #[test]
    fn zero_crossover_matches_noiseless_estimates() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        let grid = default_lambda_grid(&prior);
        let noiseless = sweep_roc(&a, &prior, &NoiseModel::Noiseless, &grid, 3000, 5).unwrap();
        let zero = sweep_roc(&a, &prior, &NoiseModel::bsc(0.0).unwrap(), &grid, 3000, 5).unwrap();
        assert_eq!(noiseless.points, zero.points);
    }

    /// Exact expectation for the example matrix: P_FA of the COMP point by
    /// hand. An element is flagged when none of its tests is negative; with
    /// x_l = 0 that means each of its pools holds another defective.
    #[test]
    fn exact_comp_point_by_direct_enumeration() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        let exact = exact_operating_points(&a, &prior, &NoiseModel::Noiseless, &[ThresholdRule::app(f64::INFINITY)])
            .unwrap()[0];
        let mut fa = 0.0;
        for w in 0..64u64 {
            let x = DefectivityVector::from_word(w, 6);
            let k = x.weight() as i32;
            let p = 0.1f64.powi(k) * 0.9f64.powi(6 - k);
            let s = compute_syndrome(&x, &a).unwrap();
            let comp = comp_decide(&a, &s).unwrap();
            fa += p * (0..6).filter(|&l| !x.get(l) && comp.get(l)).count() as f64;
        }
        assert!((exact.p_fa - fa / (6.0 * 0.9)).abs() < 1e-12);
        assert_eq!(exact.p_md, 0.0);
    }

    #[test]
    fn monte_carlo_converges_to_exact_operating_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..6 {
            let m = rng.gen_range(2..=4);
            let n = rng.gen_range(4..=10);
            let a = random_matrix(&mut rng, m, n, 0.4);
            let prior = PriorModel::new(0.15).unwrap();
            let noise = if case % 2 == 0 { NoiseModel::Noiseless } else { NoiseModel::bsc(0.1).unwrap() };
            let rules: Vec<ThresholdRule> = [-2.0, 0.0, 1.5, 3.0, f64::INFINITY]
                .iter()
                .map(|&l| ThresholdRule::app(l))
                .collect();
            let exact = exact_operating_points(&a, &prior, &noise, &rules).unwrap();
            let mc = MonteCarlo::new(20_000, 1000 + case).evaluate(&a, &prior, &noise, &rules).unwrap();
            for (e, op) in exact.iter().zip(&mc) {
                let se_fa = ((e.p_fa * (1.0 - e.p_fa)).max(0.0) / op.fa_trials as f64).sqrt();
                let se_md = ((e.p_md * (1.0 - e.p_md)).max(0.0) / op.md_trials as f64).sqrt();
                let fa = op.p_fa().unwrap();
                let md = op.p_md().unwrap();
                assert!((fa - e.p_fa).abs() <= 3.0 * se_fa + 1e-9, "case {case} fa {fa} vs {}", e.p_fa);
                assert!((md - e.p_md).abs() <= 3.0 * se_md + 1e-9, "case {case} md {md} vs {}", e.p_md);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        let curve = sweep_roc(&a, &prior, &NoiseModel::Noiseless, &[0.0], 50, 3).unwrap();
        let csv = curve.csv_string(&[("matrix".into(), "example".into())]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# matrix=example");
        let header = lines.iter().position(|l| *l == ROC_CSV_HEADER).unwrap();
        assert!(lines[..header].iter().all(|l| l.starts_with('#')));
        assert!(lines.contains(&"# seed=3"));
        assert!(lines.contains(&"# trials=50"));
        let rows = &lines[header + 1..];
        assert_eq!(rows.len(), 3);
        assert!(rows[0].starts_with("-inf,0,1,"));
        assert!(rows[2].starts_with("inf,"));
    }

    #[test]
    fn detection_interpolates_between_points() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        let curve = sweep_roc(&a, &prior, &NoiseModel::Noiseless, &default_lambda_grid(&prior), 500, 3).unwrap();
        assert_eq!(curve.detection_at(0.0), Some(curve.roc_points().iter().filter(|p| p.p_fa == 0.0).map(|p| p.detection()).fold(0.0, f64::max)));
        let pts = curve.roc_points();
        for w in pts.windows(2) {
            if w[1].p_fa > w[0].p_fa {
                let mid = 0.5 * (w[0].p_fa + w[1].p_fa);
                let d = curve.detection_at(mid).unwrap();
                assert!(d >= 0.5 * (w[0].detection() + w[1].detection()) - 1e-12);
            }
        }
        assert_eq!(curve.detection_at(1.1), None);
    }
}
