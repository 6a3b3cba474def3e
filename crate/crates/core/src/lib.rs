//! A-posteriori detection of defective elements in non-adaptive group
//! testing.
//!
//! The pooling matrix is turned into a trellis over partial OR syndromes
//! ([`trellis`]); the forward-backward recursion on that trellis yields the
//! exact log APP ratio of every element under an i.i.d. prior and a noiseless
//! or binary-symmetric observation model ([`forward_backward`]). Thresholding
//! those ratios gives a family of detectors whose false-alarm / miss-detection
//! trade-off is estimated by Monte Carlo in [`decision`].
//!
//! ```
//! use gtrellis::{forward_backward, NoiseModel, PriorModel, TestMatrix, Trellis};
//!
//! let a = TestMatrix::from_rows(&[
//!     [1, 1, 0, 1, 0, 0],
//!     [0, 1, 1, 0, 1, 0],
//!     [1, 0, 1, 0, 0, 1],
//! ])
//! .unwrap();
//! let t = "101".parse().unwrap();
//! let reduced = Trellis::reduced(&a, &t).unwrap();
//! let prior = PriorModel::new(0.1).unwrap();
//! let post = forward_backward::run(&reduced, &prior, &NoiseModel::Noiseless, &t).unwrap();
//! assert_eq!(post.zero_forced(), &[1, 2, 4]);
//! ```

pub mod decision;
pub mod error;
pub mod forward_backward;
pub mod matrices;
pub mod model;
pub mod oracle;
pub mod oracle_check;
pub mod trellis;

pub use error::{Error, Result};
pub use forward_backward::{ForwardPass, MetricTable, PosteriorResult};
pub use model::{
    binary_expand, compute_syndrome, decimal_index, DefectivityVector, NoiseModel, PriorModel,
    Syndrome, TestMatrix, TestVector,
};
pub use trellis::{Trellis, TrellisKind};

#[cfg(test)]
pub(crate) mod testutil {
    use rand::Rng;

    use crate::model::TestMatrix;

    pub fn small_matrix() -> TestMatrix {
        TestMatrix::from_rows(&[
            [1, 1, 0, 1, 0, 0],
            [0, 1, 1, 0, 1, 0],
            [1, 0, 1, 0, 0, 1],
        ])
        .unwrap()
    }

    pub fn random_matrix<R: Rng>(rng: &mut R, m: usize, n: usize, density: f64) -> TestMatrix {
        TestMatrix::new(m, n, (0..m * n).map(|_| rng.gen_bool(density) as u8).collect()).unwrap()
    }
}
