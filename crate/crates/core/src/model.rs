//! Domain types shared by every other module: the pooling matrix, binary
//! population and outcome vectors, the Boolean OR syndrome map, the i.i.d.
//! prior and the observation (noise) models.
//!
//! Syndromes are packed into a single `u64` word. Test `i` (zero-based) lives
//! at bit `i`, so the word value is exactly the decimal state index
//! `sum_i s_i 2^(i-1)` with one-based tests.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Widest syndrome that fits a state word.
pub const MAX_TESTS: usize = 64;

fn low_mask(m: usize) -> u64 {
    if m >= 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

/// An `m x n` binary pool-assignment matrix. Entry `(i, l)` is set when
/// element `l` takes part in pool `i`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TestMatrix {
    m: usize,
    n: usize,
    entries: Vec<u8>,
    columns: Vec<u64>,
}

impl TestMatrix {
    /// Builds a matrix from row-major 0/1 entries.
    pub fn new(m: usize, n: usize, entries: Vec<u8>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::param("dimensions", "m and n must be at least 1"));
        }
        if m > MAX_TESTS {
            return Err(Error::param(
                "m",
                format!("at most {MAX_TESTS} tests are supported, got {m}"),
            ));
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch {
                what: "matrix entries",
                expected: m * n,
                found: entries.len(),
            });
        }
        if let Some(bad) = entries.iter().find(|&&e| e > 1) {
            return Err(Error::param("entries", format!("non-binary entry {bad}")));
        }
        let columns = (0..n)
            .map(|l| {
                (0..m).fold(0u64, |acc, i| {
                    acc | ((entries[i * n + l] as u64) << i)
                })
            })
            .collect();
        Ok(TestMatrix {
            m,
            n,
            entries,
            columns,
        })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(m * n);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: n,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        TestMatrix::new(m, n, entries)
    }

    /// Number of tests (rows).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Population size (columns).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, l: usize) -> bool {
        self.entries[i * self.n + l] == 1
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.chunks(self.n)
    }

    pub fn column(&self, l: usize) -> Vec<u8> {
        (0..self.m).map(|i| self.entries[i * self.n + l]).collect()
    }

    /// Column `l` packed into a state word (bit `i` = test `i`).
    pub fn column_mask(&self, l: usize) -> u64 {
        self.columns[l]
    }

    pub fn column_masks(&self) -> &[u64] {
        &self.columns
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&e| e == 1).count()
    }

    pub fn column_weight(&self, l: usize) -> usize {
        self.columns[l].count_ones() as usize
    }
}

impl fmt::Debug for TestMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "TestMatrix {}x{} [", self.m, self.n)?;
        for row in self.rows() {
            let line: String = row.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

/// Binary status of the population; `true` marks a defective element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DefectivityVector(Vec<bool>);

impl DefectivityVector {
    pub fn new(bits: Vec<bool>) -> Self {
        DefectivityVector(bits)
    }

    pub fn zeros(n: usize) -> Self {
        DefectivityVector(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, l: usize) -> bool {
        self.0[l]
    }

    pub fn set(&mut self, l: usize, value: bool) {
        self.0[l] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Decodes the low `n` bits of `word`, element `l` at bit `l`.
    pub fn from_word(word: u64, n: usize) -> Self {
        DefectivityVector((0..n).map(|l| (word >> l) & 1 == 1).collect())
    }
}

impl fmt::Display for DefectivityVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for DefectivityVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_bits(s).map(DefectivityVector)
    }
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.trim()
        .chars()
        .enumerate()
        .map(|(pos, c)| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::param(
                "bit string",
                format!("invalid character {other:?} at position {}", pos + 1),
            )),
        })
        .collect()
}

/// A length-`m` binary vector: either a noiseless syndrome or an observed
/// test vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Syndrome {
    bits: u64,
    len: usize,
}

/// Observed test outcomes share the syndrome representation.
pub type TestVector = Syndrome;

impl Syndrome {
    pub fn zeros(len: usize) -> Self {
        Syndrome { bits: 0, len }
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() > MAX_TESTS {
            return Err(Error::param(
                "syndrome",
                format!("length {} exceeds {MAX_TESTS}", bits.len()),
            ));
        }
        let word = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
        Ok(Syndrome {
            bits: word,
            len: bits.len(),
        })
    }

    /// Wraps a packed word. Bits above `len` must be clear.
    pub fn from_word(word: u64, len: usize) -> Result<Self> {
        if len > MAX_TESTS || word & !low_mask(len) != 0 {
            return Err(Error::StateOutOfRange { index: word, m: len });
        }
        Ok(Syndrome { bits: word, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.bits >> i) & 1 == 1
    }

    pub fn word(&self) -> u64 {
        self.bits
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn weight(&self) -> usize {
        self.bits.count_ones() as usize
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Syndrome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Syndrome::from_bits(&parse_bits(s)?)
    }
}

/// Boolean OR syndrome: `s_i = OR_l (x_l AND a_{i,l})`.
pub fn compute_syndrome(x: &DefectivityVector, a: &TestMatrix) -> Result<Syndrome> {
    if x.len() != a.n() {
        return Err(Error::DimensionMismatch {
            what: "defectivity vector",
            expected: a.n(),
            found: x.len(),
        });
    }
    let word = x
        .bits()
        .iter()
        .zip(a.column_masks())
        .filter(|(&b, _)| b)
        .fold(0u64, |acc, (_, &col)| acc | col);
    Ok(Syndrome {
        bits: word,
        len: a.m(),
    })
}

/// Decimal state index of a syndrome.
pub fn decimal_index(s: &Syndrome) -> u64 {
    s.bits
}

/// Inverse of [`decimal_index`].
pub fn binary_expand(index: u64, m: usize) -> Result<Syndrome> {
    Syndrome::from_word(index, m)
}

/// Product-form binary symmetric channel likelihood
/// `(1 - eps)^agreements * eps^disagreements`.
pub fn bsc_likelihood(t: &TestVector, s: &Syndrome, epsilon: f64) -> Result<f64> {
    if t.len() != s.len() {
        return Err(Error::DimensionMismatch {
            what: "test vector",
            expected: s.len(),
            found: t.len(),
        });
    }
    Ok(bsc_word_likelihood(t.word(), s.word(), s.len(), epsilon))
}

pub(crate) fn bsc_word_likelihood(t: u64, s: u64, m: usize, epsilon: f64) -> f64 {
    let flips = (t ^ s).count_ones() as i32;
    (1.0 - epsilon).powi(m as i32 - flips) * epsilon.powi(flips)
}

/// I.i.d. Bernoulli prior on defectivity with prevalence `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorModel {
    delta: f64,
}

impl PriorModel {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(
                "delta",
                format!("prevalence must lie in (0, 1), got {delta}"),
            ));
        }
        Ok(PriorModel { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `log((1 - delta) / delta)`, the a-priori log ratio.
    pub fn log_prior_ratio(&self) -> f64 {
        ((1.0 - self.delta) / self.delta).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DefectivityVector {
        DefectivityVector((0..n).map(|_| rng.gen_bool(self.delta)).collect())
    }
}

/// Observation model `Q(t | s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// `t = s`.
    Noiseless,
    /// Each outcome flipped independently with probability `epsilon`.
    Bsc { epsilon: f64 },
}

impl NoiseModel {
    pub fn bsc(epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::param(
                "epsilon",
                format!("crossover probability must lie in [0, 0.5), got {epsilon}"),
            ));
        }
        Ok(NoiseModel::Bsc { epsilon })
    }

    /// True when `Q(t | s)` is the indicator of `t = s`, which includes a
    /// zero-crossover BSC.
    pub fn is_noiseless(&self) -> bool {
        match *self {
            NoiseModel::Noiseless => true,
            NoiseModel::Bsc { epsilon } => epsilon == 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::Bsc { epsilon } => epsilon,
        }
    }

    pub fn likelihood(&self, t: &TestVector, s: &Syndrome) -> Result<f64> {
        if t.len() != s.len() {
            return Err(Error::DimensionMismatch {
                what: "test vector",
                expected: s.len(),
                found: t.len(),
            });
        }
        Ok(self.word_likelihood(t.word(), s.word(), s.len()))
    }

    pub(crate) fn word_likelihood(&self, t: u64, s: u64, m: usize) -> f64 {
        match *self {
            NoiseModel::Noiseless => {
                if t == s {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::Bsc { epsilon } => bsc_word_likelihood(t, s, m, epsilon),
        }
    }

    /// Passes a syndrome through the channel.
    pub fn observe<R: Rng + ?Sized>(&self, s: &Syndrome, rng: &mut R) -> TestVector {
        match *self {
            NoiseModel::Noiseless => *s,
            NoiseModel::Bsc { epsilon } => {
                let flips = (0..s.len()).fold(0u64, |acc, i| {
                    acc | ((rng.gen_bool(epsilon) as u64) << i)
                });
                Syndrome {
                    bits: s.bits ^ flips,
                    len: s.len,
                }
            }
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Noiseless => write!(f, "noiseless"),
            NoiseModel::Bsc { epsilon } => write!(f, "bsc({epsilon})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::small_matrix;
    use proptest::prelude::*;

    fn sv(s: &str) -> Syndrome {
        s.parse().unwrap()
    }

    #[test]
    fn syndrome_of_single_defective_is_its_column() {
        let a = small_matrix();
        let x: DefectivityVector = "100000".parse().unwrap();
        assert_eq!(compute_syndrome(&x, &a).unwrap(), sv("101"));
    }

    #[test]
    fn syndrome_of_two_defectives() {
        // rows: (1 OR 0), (1 OR 1), (0 OR 0)
        let a = small_matrix();
        let x: DefectivityVector = "010010".parse().unwrap();
        assert_eq!(compute_syndrome(&x, &a).unwrap(), sv("110"));
    }

    #[test]
    fn empty_population_gives_zero_syndrome() {
        let a = small_matrix();
        let s = compute_syndrome(&DefectivityVector::zeros(6), &a).unwrap();
        assert_eq!(s, Syndrome::zeros(3));
    }

    #[test]
    fn syndrome_rejects_wrong_length() {
        let a = small_matrix();
        let err = compute_syndrome(&DefectivityVector::zeros(5), &a).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 6, found: 5, .. }));
    }

    #[test]
    fn decimal_index_examples() {
        assert_eq!(decimal_index(&sv("101")), 5);
        assert_eq!(decimal_index(&sv("0000")), 0);
        assert_eq!(decimal_index(&sv("111")), 7);
    }

    #[test]
    fn binary_expand_examples() {
        assert_eq!(binary_expand(5, 3).unwrap(), sv("101"));
        assert_eq!(binary_expand(0, 4).unwrap(), sv("0000"));
        assert_eq!(binary_expand(6, 3).unwrap(), sv("011"));
        assert!(matches!(
            binary_expand(8, 3),
            Err(Error::StateOutOfRange { index: 8, m: 3 })
        ));
    }

    #[test]
    fn bsc_likelihood_examples() {
        let s = sv("101");
        assert!((bsc_likelihood(&s, &s, 0.1).unwrap() - 0.729).abs() < 1e-15);
        assert!((bsc_likelihood(&sv("010"), &s, 0.1).unwrap() - 0.001).abs() < 1e-15);
        let v = bsc_likelihood(&sv("101"), &sv("111"), 0.05).unwrap();
        assert!((v - 0.95 * 0.95 * 0.05).abs() < 1e-15);
        assert!(bsc_likelihood(&sv("10"), &s, 0.1).is_err());
    }

    #[test]
    fn bsc_likelihood_sums_to_one() {
        for m in 1..=6 {
            for eps in [0.0, 0.05, 0.2, 0.49] {
                for s in 0..(1u64 << m) {
                    let s = binary_expand(s, m).unwrap();
                    let total: f64 = (0..(1u64 << m))
                        .map(|t| bsc_likelihood(&binary_expand(t, m).unwrap(), &s, eps).unwrap())
                        .sum();
                    assert!((total - 1.0).abs() < 1e-12, "m={m} eps={eps} total={total}");
                }
            }
        }
    }

    #[test]
    fn zero_crossover_bsc_matches_noiseless() {
        let bsc = NoiseModel::bsc(0.0).unwrap();
        for t in 0..8u64 {
            for s in 0..8u64 {
                assert_eq!(
                    bsc.word_likelihood(t, s, 3),
                    NoiseModel::Noiseless.word_likelihood(t, s, 3)
                );
            }
        }
        assert!(bsc.is_noiseless());
    }

    #[test]
    fn degenerate_parameters_rejected() {
        assert!(PriorModel::new(0.0).is_err());
        assert!(PriorModel::new(1.0).is_err());
        assert!(PriorModel::new(f64::NAN).is_err());
        assert!(NoiseModel::bsc(0.5).is_err());
        assert!(NoiseModel::bsc(-0.1).is_err());
        assert!(TestMatrix::new(0, 3, vec![]).is_err());
        assert!(TestMatrix::new(1, 2, vec![0, 2]).is_err());
        assert!(TestMatrix::new(65, 1, vec![0; 65]).is_err());
    }

    #[test]
    fn matrix_accessors_agree() {
        let a = small_matrix();
        assert_eq!(a.column(0), vec![1, 0, 1]);
        assert_eq!(a.column_mask(0), 5);
        assert_eq!(a.row(1), &[0, 1, 1, 0, 1, 0]);
        for i in 0..3 {
            for l in 0..6 {
                assert_eq!(a.get(i, l), a.column(l)[i] == 1);
                assert_eq!(a.get(i, l), (a.column_mask(l) >> i) & 1 == 1);
            }
        }
    }

    fn matrix_and_vectors() -> impl Strategy<Value = (TestMatrix, Vec<bool>, Vec<bool>)> {
        (1usize..=8, 1usize..=12).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0u8..=1, m * n),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(e, x, y)| (TestMatrix::new(m, n, e).unwrap(), x, y))
        })
    }

    proptest! {
        #[test]
        fn syndrome_is_monotone((a, x, y) in matrix_and_vectors()) {
            let lo = DefectivityVector::new(x.iter().zip(&y).map(|(&p, &q)| p && q).collect());
            let hi = DefectivityVector::new(x.clone());
            let s_lo = compute_syndrome(&lo, &a).unwrap().word();
            let s_hi = compute_syndrome(&hi, &a).unwrap().word();
            prop_assert_eq!(s_lo & !s_hi, 0);
        }

        #[test]
        fn syndrome_matches_row_formula_and_column_fold((a, x, _y) in matrix_and_vectors()) {
            let x = DefectivityVector::new(x);
            let s = compute_syndrome(&x, &a).unwrap();
            // row-wise disjunction
            for i in 0..a.m() {
                let si = (0..a.n()).any(|l| x.get(l) && a.get(i, l));
                prop_assert_eq!(s.get(i), si);
            }
            // partial-syndrome recursion over columns
            let mut partial = vec![false; a.m()];
            for l in 0..a.n() {
                let col = a.column(l);
                for i in 0..a.m() {
                    partial[i] = partial[i] || (x.get(l) && col[i] == 1);
                }
            }
            prop_assert_eq!(s.to_bits(), partial);
        }

        #[test]
        fn index_expand_round_trip(m in 1usize..=20, raw in any::<u64>()) {
            let index = raw & ((1u64 << m) - 1);
            let s = binary_expand(index, m).unwrap();
            prop_assert_eq!(decimal_index(&s), index);
            prop_assert_eq!(binary_expand(decimal_index(&s), m).unwrap(), s);
        }
    }
}
