//! Forward-backward computation of the per-element log APP ratio
//! `L_l = log P(X_l = 0 | t) - log P(X_l = 1 | t)` on a syndrome trellis.
//!
//! Metrics are kept in the linear domain. Every forward and backward layer is
//! normalized to unit sum and the logarithm of the normalizer is accumulated,
//! so neither `alpha` nor `beta` can underflow while the log-ratios and the
//! evidence `P(T = t)` stay exact up to rounding.
//!
//! On a complete trellis the forward metrics do not depend on the
//! observation. [`ForwardPass`] computes them once so that repeated
//! observations only pay for the backward sweep.

use crate::error::{Error, Result};
use crate::model::{binary_expand, NoiseModel, PriorModel, Syndrome, TestVector};
use crate::trellis::{Edge, Trellis, TrellisKind};

/// Branch metric: `1 - delta` for 0-labeled edges, `delta` for 1-labeled ones.
pub fn gamma(edge: &Edge, prior: &PriorModel) -> f64 {
    branch_weights(prior)[edge.label as usize]
}

fn branch_weights(prior: &PriorModel) -> [f64; 2] {
    [1.0 - prior.delta(), prior.delta()]
}

/// Log APP ratios for the whole population plus the log evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    lapp: Vec<f64>,
    log_evidence: f64,
    zero_forced: Vec<usize>,
}

impl PosteriorResult {
    /// `L_l` per element; `+inf` when the element is surely non-defective and
    /// `-inf` when it is surely defective.
    pub fn lapp(&self) -> &[f64] {
        &self.lapp
    }

    /// `log P(T = t)`.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// Elements whose posterior defectivity is exactly zero, ascending.
    pub fn zero_forced(&self) -> &[usize] {
        &self.zero_forced
    }

    pub fn posteriors(&self) -> Vec<(f64, f64)> {
        posteriors(self)
    }
}

/// `(P(X_l = 0 | t), P(X_l = 1 | t))` from a log APP ratio.
pub fn posterior_pair(lapp: f64) -> (f64, f64) {
    if lapp == f64::INFINITY {
        (1.0, 0.0)
    } else if lapp == f64::NEG_INFINITY {
        (0.0, 1.0)
    } else {
        (1.0 / (1.0 + (-lapp).exp()), 1.0 / (1.0 + lapp.exp()))
    }
}

/// Per-element posterior pairs `(P(X = 0 | t), P(X = 1 | t))`.
pub fn posteriors(result: &PosteriorResult) -> Vec<(f64, f64)> {
    result.lapp.iter().map(|&l| posterior_pair(l)).collect()
}

/// Normalized forward and backward metrics of one run.
///
/// `alpha[l]` and `beta[l]` are indexed like [`Trellis::states`] at depth
/// `l`; each layer sums to one. The true metrics are recovered by
/// multiplying layer `l` by the product of its scale factors
/// (`alpha_scale[1..=l]` forward, `beta_scale[l..=n]` backward).
#[derive(Debug, Clone)]
pub struct MetricTable {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub alpha_scale: Vec<f64>,
    pub beta_scale: Vec<f64>,
    /// `log` of the sum over section `l` of `alpha * gamma * beta` across
    /// both labels, one entry per section. Every entry equals the log
    /// evidence of the trellis paths.
    pub section_log_evidence: Vec<f64>,
}

/// Forward metrics of a trellis under a given prior.
#[derive(Debug, Clone)]
pub struct ForwardPass<'a> {
    trellis: &'a Trellis,
    prior: PriorModel,
    alpha: Vec<Vec<f64>>,
    alpha_scale: Vec<f64>,
    /// `log` of the product of `alpha_scale[1..=l]`.
    alpha_log_prefix: Vec<f64>,
}

impl<'a> ForwardPass<'a> {
    pub fn new(trellis: &'a Trellis, prior: PriorModel) -> Result<Self> {
        let weights = branch_weights(&prior);
        let n = trellis.n();
        let mut alpha = Vec::with_capacity(n + 1);
        let mut alpha_scale = Vec::with_capacity(n + 1);
        let mut alpha_log_prefix = Vec::with_capacity(n + 1);
        alpha.push(vec![1.0]);
        alpha_scale.push(1.0);
        alpha_log_prefix.push(0.0);

        for (l, sec) in trellis.sections().iter().enumerate() {
            let prev = &alpha[l];
            let mut next = vec![0.0; trellis.states(l + 1).len()];
            for e in sec.edges() {
                next[e.to_pos()] += prev[e.from_pos()] * weights[e.label as usize];
            }
            let c: f64 = next.iter().sum();
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::param(
                    "trellis",
                    format!("forward metrics vanish at depth {}", l + 1),
                ));
            }
            next.iter_mut().for_each(|a| *a /= c);
            alpha_log_prefix.push(alpha_log_prefix[l] + c.ln());
            alpha_scale.push(c);
            alpha.push(next);
        }
        Ok(ForwardPass {
            trellis,
            prior,
            alpha,
            alpha_scale,
            alpha_log_prefix,
        })
    }

    pub fn trellis(&self) -> &Trellis {
        self.trellis
    }

    pub fn prior(&self) -> PriorModel {
        self.prior
    }

    /// Normalized forward metrics per depth.
    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn alpha_scale(&self) -> &[f64] {
        &self.alpha_scale
    }

    pub fn posterior(&self, noise: &NoiseModel, t: &TestVector) -> Result<PosteriorResult> {
        let beta_n = self.terminal_beta(noise, t)?;
        Ok(self.backward(beta_n, false)?.0)
    }

    pub fn posterior_with_metrics(
        &self,
        noise: &NoiseModel,
        t: &TestVector,
    ) -> Result<(PosteriorResult, MetricTable)> {
        let beta_n = self.terminal_beta(noise, t)?;
        let (result, metrics) = self.backward(beta_n, true)?;
        Ok((result, metrics.expect("metrics requested")))
    }

    /// Runs the backward sweep with `beta_n(s) = likelihood([s]_B)` for a
    /// caller-supplied observation model. Complete trellises only.
    pub fn posterior_with_likelihood<F>(&self, likelihood: F) -> Result<(PosteriorResult, MetricTable)>
    where
        F: Fn(&Syndrome) -> f64,
    {
        if !matches!(self.trellis.kind(), TrellisKind::Complete) {
            return Err(Error::NoisyRequiresComplete(self.trellis.kind().name()));
        }
        let m = self.trellis.m();
        let beta_n = self
            .trellis
            .states(self.trellis.n())
            .iter()
            .map(|&s| binary_expand(s as u64, m).map(|s| likelihood(&s)))
            .collect::<Result<Vec<f64>>>()?;
        if beta_n.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::param("likelihood", "values must be finite and non-negative"));
        }
        if !beta_n.iter().any(|&b| b > 0.0) {
            return Err(Error::ZeroLikelihood);
        }
        let (result, metrics) = self.backward(beta_n, true)?;
        Ok((result, metrics.expect("metrics requested")))
    }

    fn terminal_beta(&self, noise: &NoiseModel, t: &TestVector) -> Result<Vec<f64>> {
        let tr = self.trellis;
        let finals = tr.states(tr.n());
        let beta = match tr.kind() {
            TrellisKind::Complete => {
                if t.len() != tr.m() {
                    return Err(Error::DimensionMismatch {
                        what: "test vector",
                        expected: tr.m(),
                        found: t.len(),
                    });
                }
                finals
                    .iter()
                    .map(|&s| noise.word_likelihood(t.word(), s as u64, tr.m()))
                    .collect()
            }
            TrellisKind::Expurgated { final_state } => {
                if !noise.is_noiseless() {
                    return Err(Error::NoisyRequiresComplete("expurgated"));
                }
                if t.len() != tr.m() {
                    return Err(Error::DimensionMismatch {
                        what: "test vector",
                        expected: tr.m(),
                        found: t.len(),
                    });
                }
                if t.word() != *final_state as u64 {
                    return Err(Error::TrellisMismatch);
                }
                vec![1.0; finals.len()]
            }
            TrellisKind::Reduced(red) => {
                if !noise.is_noiseless() {
                    return Err(Error::NoisyRequiresComplete("reduced"));
                }
                if red.test_vector != *t {
                    return Err(Error::TrellisMismatch);
                }
                vec![1.0; finals.len()]
            }
        };
        if !beta.iter().any(|&b: &f64| b > 0.0) {
            return Err(if noise.is_noiseless() {
                Error::NotASyndrome(t.to_string())
            } else {
                Error::ZeroLikelihood
            });
        }
        Ok(beta)
    }

    fn backward(
        &self,
        mut beta: Vec<f64>,
        keep_metrics: bool,
    ) -> Result<(PosteriorResult, Option<MetricTable>)> {
        let tr = self.trellis;
        let n = tr.n();
        let weights = branch_weights(&self.prior);

        let d_n: f64 = beta.iter().sum();
        beta.iter_mut().for_each(|b| *b /= d_n);
        // log of the product of beta_scale[l..=n]
        let mut beta_log_suffix = d_n.ln();

        let terminal: f64 = self.alpha[n].iter().zip(&beta).map(|(a, b)| a * b).sum();
        let log_evidence_paths = terminal.ln() + self.alpha_log_prefix[n] + beta_log_suffix;

        let mut section_lapp = vec![0.0; n];
        let mut section_log_evidence = Vec::new();
        let mut betas = Vec::new();
        let mut beta_scale = Vec::new();
        if keep_metrics {
            section_log_evidence = vec![0.0; n];
            betas = vec![Vec::new(); n + 1];
            beta_scale = vec![0.0; n + 1];
            beta_scale[n] = d_n;
        }

        for l in (1..=n).rev() {
            let alpha_prev = &self.alpha[l - 1];
            let mut prev = vec![0.0; tr.states(l - 1).len()];
            let mut sums = [0.0f64; 2];
            for e in tr.section(l).edges() {
                let v = weights[e.label as usize] * beta[e.to_pos()];
                prev[e.from_pos()] += v;
                sums[e.label as usize] += alpha_prev[e.from_pos()] * v;
            }
            section_lapp[l - 1] = log_ratio(sums[0], sums[1]);

            let d: f64 = prev.iter().sum();
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::ZeroLikelihood);
            }
            prev.iter_mut().for_each(|b| *b /= d);
            if keep_metrics {
                section_log_evidence[l - 1] =
                    (sums[0] + sums[1]).ln() + self.alpha_log_prefix[l - 1] + beta_log_suffix;
                beta_scale[l - 1] = d;
                betas[l] = std::mem::replace(&mut beta, prev);
            } else {
                beta = prev;
            }
            beta_log_suffix += d.ln();
        }

        let mut lapp = vec![f64::INFINITY; tr.population()];
        let mut log_evidence = log_evidence_paths;
        for (&element, &value) in tr.elements().iter().zip(&section_lapp) {
            lapp[element] = value;
        }
        if let TrellisKind::Reduced(red) = tr.kind() {
            // zero-covered elements sit at x = 0 with prior weight 1 - delta each
            log_evidence += red.zero_covered_elements.len() as f64 * (1.0 - self.prior.delta()).ln();
            if keep_metrics {
                let shift = red.zero_covered_elements.len() as f64 * (1.0 - self.prior.delta()).ln();
                section_log_evidence.iter_mut().for_each(|v| *v += shift);
            }
        }
        debug_assert!(lapp.iter().all(|v| !v.is_nan()));
        debug_assert!(log_evidence.is_finite());

        let zero_forced = lapp
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == f64::INFINITY)
            .map(|(l, _)| l)
            .collect();
        let result = PosteriorResult {
            lapp,
            log_evidence,
            zero_forced,
        };
        let metrics = keep_metrics.then(|| {
            betas[0] = beta;
            MetricTable {
                alpha: self.alpha.clone(),
                beta: betas,
                alpha_scale: self.alpha_scale.clone(),
                beta_scale,
                section_log_evidence,
            }
        });
        Ok((result, metrics))
    }
}

fn log_ratio(zero: f64, one: f64) -> f64 {
    match (zero > 0.0, one > 0.0) {
        (true, true) => zero.ln() - one.ln(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => f64::NAN,
    }
}

/// Log APP ratios of every element given the observation `t`.
///
/// Noiseless observations may use a complete, expurgated or reduced trellis;
/// noisy ones need the complete trellis.
pub fn run(
    trellis: &Trellis,
    prior: &PriorModel,
    noise: &NoiseModel,
    t: &TestVector,
) -> Result<PosteriorResult> {
    ForwardPass::new(trellis, *prior)?.posterior(noise, t)
}

pub fn run_with_metrics(
    trellis: &Trellis,
    prior: &PriorModel,
    noise: &NoiseModel,
    t: &TestVector,
) -> Result<(PosteriorResult, MetricTable)> {
    ForwardPass::new(trellis, *prior)?.posterior_with_metrics(noise, t)
}

/// Forward-backward with a caller-supplied likelihood `Q(t | s)`, evaluated
/// once per final state of the complete trellis.
pub fn run_with_likelihood<F>(
    trellis: &Trellis,
    prior: &PriorModel,
    likelihood: F,
) -> Result<(PosteriorResult, MetricTable)>
where
    F: Fn(&Syndrome) -> f64,
{
    ForwardPass::new(trellis, *prior)?.posterior_with_likelihood(likelihood)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_syndrome, DefectivityVector, TestMatrix};
    use crate::testutil::{small_matrix, random_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(s: &str) -> TestVector {
        s.parse().unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        if a == b {
            return true;
        }
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn gamma_values() {
        let tr = Trellis::complete(&TestMatrix::from_rows(&[[1]]).unwrap()).unwrap();
        let edges = tr.section(1).edges();
        let p = PriorModel::new(0.015).unwrap();
        assert!((gamma(&edges[0], &p) - 0.985).abs() < 1e-15);
        assert_eq!(gamma(&edges[1], &PriorModel::new(0.5).unwrap()), 0.5);
        assert_eq!(gamma(&edges[1], &PriorModel::new(0.1).unwrap()), 0.1);
    }

    #[test]
    fn posterior_pair_examples() {
        assert_eq!(posterior_pair(0.0), (0.5, 0.5));
        assert_eq!(posterior_pair(f64::INFINITY), (1.0, 0.0));
        assert_eq!(posterior_pair(f64::NEG_INFINITY), (0.0, 1.0));
        let (p0, p1) = posterior_pair(9f64.ln());
        assert!((p0 - 0.9).abs() < 1e-15 && (p1 - 0.1).abs() < 1e-15);
        let mut last = 1.0;
        for k in -40..=40 {
            let (p0, p1) = posterior_pair(k as f64);
            assert!((p0 + p1 - 1.0).abs() < 1e-12);
            assert!(p1 <= last);
            last = p1;
        }
    }

    #[test]
    fn all_negative_tests_force_everything_to_zero() {
        let a = small_matrix();
        let tr = Trellis::complete(&a).unwrap();
        for delta in [0.01, 0.1, 0.7] {
            let r = run(&tr, &PriorModel::new(delta).unwrap(), &NoiseModel::Noiseless, &t("000")).unwrap();
            assert!(r.lapp().iter().all(|&v| v == f64::INFINITY));
            assert_eq!(r.zero_forced(), &[0, 1, 2, 3, 4, 5]);
            assert!((r.log_evidence() - 6.0 * (1.0 - delta).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn unpooled_element_keeps_its_prior() {
        let a = TestMatrix::from_rows(&[[1, 0, 1], [0, 0, 1]]).unwrap();
        let prior = PriorModel::new(0.2).unwrap();
        let tr = Trellis::complete(&a).unwrap();
        for obs in ["00", "10", "11"] {
            let r = run(&tr, &prior, &NoiseModel::Noiseless, &t(obs)).unwrap();
            assert!((r.lapp()[1] - 4f64.ln()).abs() < 1e-12, "t={obs}");
        }
        let r = run(&tr, &prior, &NoiseModel::bsc(0.1).unwrap(), &t("01")).unwrap();
        assert!((r.lapp()[1] - prior.log_prior_ratio()).abs() < 1e-12);
    }

    // Frozen from an independent brute-force summation over all 64 vectors
    // at delta = 0.1: masses (0.006561, 0.0729) for element 1 and
    // (0.06561, 0.013851) for elements 4 and 6; evidence 0.079461.
    #[test]
    fn small_matrix_posteriors_match_frozen_values() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        let obs = t("101");
        let expected = [
            0.09f64.ln(),
            f64::INFINITY,
            f64::INFINITY,
            (90.0f64 / 19.0).ln(),
            f64::INFINITY,
            (90.0f64 / 19.0).ln(),
        ];
        let complete = Trellis::complete(&a).unwrap();
        let trellises = [
            complete.clone(),
            complete.expurgate(&obs).unwrap(),
            Trellis::reduced(&a, &obs).unwrap(),
        ];
        for tr in &trellises {
            let r = run(tr, &prior, &NoiseModel::Noiseless, &obs).unwrap();
            for (got, want) in r.lapp().iter().zip(expected) {
                assert!(close(*got, want, 1e-12), "{} {got} vs {want}", tr.kind().name());
            }
            assert!(close(r.log_evidence(), 0.079461f64.ln(), 1e-12));
            assert_eq!(r.zero_forced(), &[1, 2, 4]);
            let p = r.posteriors();
            assert!((p[0].1 - 100.0 / 109.0).abs() < 1e-12);
            assert!((p[3].1 - 19.0 / 109.0).abs() < 1e-12);
        }
    }

    #[test]
    fn surely_defective_element_gets_negative_infinity() {
        // element 1 is the only member of test 1
        let a = TestMatrix::from_rows(&[[1, 0], [1, 1]]).unwrap();
        let tr = Trellis::complete(&a).unwrap();
        let r = run(&tr, &PriorModel::new(0.3).unwrap(), &NoiseModel::Noiseless, &t("11")).unwrap();
        assert_eq!(r.lapp()[0], f64::NEG_INFINITY);
        assert_eq!(posterior_pair(r.lapp()[0]), (0.0, 1.0));
        assert!(r.lapp()[1].is_finite());
    }

    #[test]
    fn error_paths() {
        let a = small_matrix();
        let prior = PriorModel::new(0.1).unwrap();
        let bsc = NoiseModel::bsc(0.1).unwrap();
        let complete = Trellis::complete(&a).unwrap();
        let ex = complete.expurgate(&t("101")).unwrap();
        let red = Trellis::reduced(&a, &t("101")).unwrap();
        assert!(matches!(run(&ex, &prior, &bsc, &t("101")), Err(Error::NoisyRequiresComplete(_))));
        assert!(matches!(run(&red, &prior, &bsc, &t("101")), Err(Error::NoisyRequiresComplete(_))));
        assert!(matches!(run(&ex, &prior, &NoiseModel::Noiseless, &t("111")), Err(Error::TrellisMismatch)));
        assert!(matches!(run(&red, &prior, &NoiseModel::Noiseless, &t("100")), Err(Error::TrellisMismatch)));
        assert!(matches!(
            run(&complete, &prior, &NoiseModel::Noiseless, &t("10")),
            Err(Error::DimensionMismatch { .. })
        ));
        let two = TestMatrix::from_rows(&[[1], [1]]).unwrap();
        let tr2 = Trellis::complete(&two).unwrap();
        assert!(matches!(
            run(&tr2, &prior, &NoiseModel::Noiseless, &t("10")),
            Err(Error::NotASyndrome(_))
        ));
        assert!(run(&tr2, &prior, &bsc, &t("10")).is_ok());
        assert!(matches!(
            run_with_likelihood(&tr2, &prior, |_| 0.0),
            Err(Error::ZeroLikelihood)
        ));
        assert!(run_with_likelihood(&ex, &prior, |_| 1.0).is_err());
    }

    #[test]
    fn metric_identities_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=12);
            let a = random_matrix(&mut rng, m, n, 0.35);
            let prior = PriorModel::new([0.05, 0.3][rng.gen_range(0..2)]).unwrap();
            let x = prior.sample(n, &mut rng);
            let s = compute_syndrome(&x, &a).unwrap();
            let complete = Trellis::complete(&a).unwrap();

            for noise in [NoiseModel::Noiseless, NoiseModel::bsc(0.05).unwrap(), NoiseModel::bsc(0.2).unwrap()] {
                let obs = noise.observe(&s, &mut rng);
                let (r, mt) = run_with_metrics(&complete, &prior, &noise, &obs).unwrap();
                for le in &mt.section_log_evidence {
                    assert!(close(*le, r.log_evidence(), 1e-12), "{le} vs {}", r.log_evidence());
                }
                // alpha before the observation is the prior state distribution
                for (layer, &c) in mt.alpha.iter().zip(&mt.alpha_scale) {
                    assert!((layer.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!((c - 1.0).abs() < 1e-12);
                }
                for layer in &mt.beta {
                    assert!((layer.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
                assert!(mt.beta_scale.iter().all(|&d| d > 0.0));

                // scaling Q by a constant leaves L unchanged
                let (scaled, _) = run_with_likelihood(&complete, &prior, |sy| {
                    1234.5 * noise.likelihood(&obs, sy).unwrap()
                })
                .unwrap();
                for (p, q) in r.lapp().iter().zip(scaled.lapp()) {
                    assert!(close(*p, *q, 1e-12));
                }
                assert!(close(scaled.log_evidence(), r.log_evidence() + 1234.5f64.ln(), 1e-12));
            }

            // noiseless equivalence of the three trellis shapes and of BSC(0)
            let base = run(&complete, &prior, &NoiseModel::Noiseless, &s).unwrap();
            let zero = run(&complete, &prior, &NoiseModel::bsc(0.0).unwrap(), &s).unwrap();
            assert_eq!(base, zero);
            for tr in [complete.expurgate(&s).unwrap(), Trellis::reduced(&a, &s).unwrap()] {
                let (r, mt) = run_with_metrics(&tr, &prior, &NoiseModel::Noiseless, &s).unwrap();
                assert_eq!(r.zero_forced(), base.zero_forced());
                for (p, q) in r.lapp().iter().zip(base.lapp()) {
                    assert!(close(*p, *q, 1e-12), "{} {p} vs {q}", tr.kind().name());
                }
                assert!(close(r.log_evidence(), base.log_evidence(), 1e-12));
                for le in &mt.section_log_evidence {
                    assert!(close(*le, r.log_evidence(), 1e-12));
                }
                for layer in &mt.alpha {
                    assert!((layer.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identical_columns_share_a_ratio_and_permutations_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let m = rng.gen_range(2..=5);
            let n = rng.gen_range(3..=10);
            let base = random_matrix(&mut rng, m, n, 0.4);
            // duplicate column 0 at the end
            let mut rows: Vec<Vec<u8>> = base.rows().map(|r| r.to_vec()).collect();
            for r in rows.iter_mut() {
                let first = r[0];
                r.push(first);
            }
            let a = TestMatrix::from_rows(&rows).unwrap();
            let prior = PriorModel::new(0.1).unwrap();
            let noise = NoiseModel::bsc(0.1).unwrap();
            let obs = noise.observe(&compute_syndrome(&prior.sample(n + 1, &mut rng), &a).unwrap(), &mut rng);
            let r = run(&Trellis::complete(&a).unwrap(), &prior, &noise, &obs).unwrap();
            assert!(close(r.lapp()[0], r.lapp()[n], 1e-12));

            // reverse the column order
            let rev_rows: Vec<Vec<u8>> = rows.iter().map(|r| r.iter().rev().copied().collect()).collect();
            let b = TestMatrix::from_rows(&rev_rows).unwrap();
            let rr = run(&Trellis::complete(&b).unwrap(), &prior, &noise, &obs).unwrap();
            for l in 0..=n {
                assert!(close(r.lapp()[l], rr.lapp()[n - l], 1e-12));
            }
        }
    }

    #[test]
    fn long_population_does_not_underflow() {
        // 200 elements, prior weights of order 0.01^200 underflow without normalization
        let m = 4;
        let n = 200;
        let entries: Vec<u8> = (0..m * n).map(|k| ((k * 7 + k / 3) % 3 == 0) as u8).collect();
        let a = TestMatrix::new(m, n, entries).unwrap();
        let prior = PriorModel::new(0.01).unwrap();
        let x = DefectivityVector::new((0..n).map(|l| l % 50 == 3).collect());
        let s = compute_syndrome(&x, &a).unwrap();
        let tr = Trellis::complete(&a).unwrap();
        for noise in [NoiseModel::Noiseless, NoiseModel::bsc(0.05).unwrap()] {
            let r = run(&tr, &prior, &noise, &s).unwrap();
            assert!(r.lapp().iter().all(|v| !v.is_nan()));
            assert!(r.log_evidence().is_finite());
        }
    }
}
