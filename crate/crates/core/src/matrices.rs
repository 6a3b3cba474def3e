//! Test-matrix constructions and the plain-text matrix format.
//!
//! File format: a header line `m n`, then `m` lines of `n` space-separated
//! `0`/`1` tokens. Trailing blank lines are ignored; anything else is an
//! error. [`format_matrix`] is the canonical writer (single spaces, `\n`
//! line ends, final newline).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::TestMatrix;

/// Upper bound on generated hypergraph columns.
pub const MAX_HYPERGRAPH_COLUMNS: u128 = 1 << 20;

/// Recipe for a test matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSpec {
    /// Incidence matrix of the complete `k`-uniform hypergraph on `order`
    /// vertices.
    Hypergraph { order: usize, uniformity: usize },
    /// 7 x 64 parity-check matrix of the (64,57) extended BCH code.
    ExtendedBch6457,
    Bernoulli {
        m: usize,
        n: usize,
        density: f64,
        seed: u64,
    },
    FromFile { path: PathBuf },
}

impl MatrixSpec {
    pub fn build(&self) -> Result<TestMatrix> {
        match self {
            MatrixSpec::Hypergraph { order, uniformity } => hypergraph_incidence(*order, *uniformity),
            MatrixSpec::ExtendedBch6457 => Ok(ebch_64_57_parity_check()),
            MatrixSpec::Bernoulli { m, n, density, seed } => bernoulli_matrix(*m, *n, *density, *seed),
            MatrixSpec::FromFile { path } => read_matrix(path),
        }
    }
}

impl fmt::Display for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixSpec::Hypergraph { order, uniformity } => {
                write!(f, "hypergraph(v={order},k={uniformity})")
            }
            MatrixSpec::ExtendedBch6457 => write!(f, "ebch(64,57)"),
            MatrixSpec::Bernoulli { m, n, density, seed } => {
                write!(f, "bernoulli(m={m},n={n},density={density},seed={seed})")
            }
            MatrixSpec::FromFile { path } => write!(f, "file({})", path.display()),
        }
    }
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    (0..k).try_fold(1u128, |acc, i| {
        acc.checked_mul((n - i) as u128).map(|v| v / (i as u128 + 1))
    })
}

/// `v x C(v, k)` incidence matrix whose columns are all weight-`k` vectors,
/// ordered lexicographically by their vertex sets.
pub fn hypergraph_incidence(v: usize, k: usize) -> Result<TestMatrix> {
    if k == 0 || k > v {
        return Err(Error::param("uniformity", format!("need 1 <= k <= v, got k={k}, v={v}")));
    }
    let cols = binomial(v, k).unwrap_or(u128::MAX);
    if cols > MAX_HYPERGRAPH_COLUMNS {
        return Err(Error::GuardExceeded {
            what: "hypergraph columns",
            count: cols,
            limit: MAX_HYPERGRAPH_COLUMNS,
        });
    }
    let n = cols as usize;
    let mut entries = vec![0u8; v * n];
    for (l, subset) in (0..v).combinations(k).enumerate() {
        for i in subset {
            entries[i * n + l] = 1;
        }
    }
    TestMatrix::new(v, n, entries)
}

/// Powers `alpha^0 .. alpha^62` of a root of `x^6 + x + 1` in GF(64), as
/// 6-bit polynomial-basis words.
fn gf64_powers() -> Vec<u8> {
    let mut out = Vec::with_capacity(63);
    let mut e: u8 = 1;
    for _ in 0..63 {
        out.push(e);
        e <<= 1;
        if e & 0x40 != 0 {
            e ^= 0x43; // x^6 = x + 1
        }
    }
    out
}

/// Parity-check matrix of the (64,57) extended BCH (extended Hamming) code
/// over `x^6 + x + 1`.
///
/// Column `j < 63` holds `alpha^j`, column 63 is the extension coordinate.
/// Rows 1-6 are the coordinate functions of the field element; since
/// multiplication by `alpha` shifts the coordinates, they are consecutive
/// cyclic shifts of one m-sequence. Row 7 is the complement of row 1, which
/// brings the all-ones parity row into the row space while keeping every
/// row at weight 32.
pub fn ebch_64_57_parity_check() -> TestMatrix {
    let powers = gf64_powers();
    let n = 64;
    let mut entries = vec![0u8; 7 * n];
    for i in 0..6 {
        for (j, &e) in powers.iter().enumerate() {
            entries[i * n + j] = (e >> i) & 1;
        }
    }
    for j in 0..n {
        entries[6 * n + j] = 1 - entries[j];
    }
    let a = TestMatrix::new(7, n, entries).expect("7x64 binary matrix");
    assert!((0..7).all(|i| a.row_weight(i) == 32), "every row must have weight 32");
    assert_eq!(gf2_rank(&a), 7, "parity-check rows must be independent");
    a
}

/// Rank of the matrix over GF(2).
pub fn gf2_rank(a: &TestMatrix) -> usize {
    let mut rows: Vec<Vec<u64>> = a
        .rows()
        .map(|r| {
            let mut words = vec![0u64; r.len().div_ceil(64)];
            for (l, &b) in r.iter().enumerate() {
                words[l / 64] |= (b as u64) << (l % 64);
            }
            words
        })
        .collect();
    let mut rank = 0;
    for col in 0..a.n() {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] & bit != 0 {
                row.iter_mut().zip(&pivot).for_each(|(x, y)| *x ^= y);
            }
        }
        rank += 1;
    }
    rank
}

/// I.i.d. Bernoulli(`density`) entries, reproducible from `seed`.
pub fn bernoulli_matrix(m: usize, n: usize, density: f64, seed: u64) -> Result<TestMatrix> {
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::param("density", format!("must lie in (0, 1), got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..m * n).map(|_| rng.gen_bool(density) as u8).collect();
    TestMatrix::new(m, n, entries)
}

pub fn format_matrix(a: &TestMatrix) -> String {
    let mut out = format!("{} {}\n", a.m(), a.n());
    for row in a.rows() {
        out.push_str(&row.iter().map(|b| b.to_string()).join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<TestMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "missing `m n` header".into(),
    })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line: 1,
            reason: format!("malformed header dimension {s:?}"),
        })
    };
    let (m, n) = match dims.as_slice() {
        [m, n] => (parse_dim(m)?, parse_dim(n)?),
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("header must be `m n`, got {header:?}"),
            })
        }
    };
    if m == 0 || n == 0 {
        return Err(Error::Parse {
            line: 1,
            reason: "dimensions must be positive".into(),
        });
    }

    let mut entries = Vec::with_capacity(m * n);
    let mut rows = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if rows == m {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("more than {m} rows"),
            });
        }
        let mut len = 0;
        for tok in line.split_whitespace() {
            let bit = match tok {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: format!("invalid token {other:?}, expected 0 or 1"),
                    })
                }
            };
            entries.push(bit);
            len += 1;
        }
        if len != n {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("row has {len} entries, expected {n}"),
            });
        }
        rows += 1;
    }
    if rows != m {
        return Err(Error::Parse {
            line: text.lines().count() + 1,
            reason: format!("found {rows} rows, header declares {m}"),
        });
    }
    TestMatrix::new(m, n, entries)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<TestMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text)
}

pub fn write_matrix(path: impl AsRef<Path>, a: &TestMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(a)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
