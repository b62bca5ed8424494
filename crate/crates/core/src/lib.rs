//! Grassmannian frames from gradient descent on the unconstrained feature
//! model, with the tooling to check what comes out.
//!
//! * [`linalg`]: small dense matrices, softmax, skew exponentials, random
//!   rotations and permutations, ranks and spectra.
//! * [`frames`]: frame data model, correlation and Welch-bound checks,
//!   simplex ETFs, Type I/II equivalence transforms.
//! * [`ufm`]: losses, analytic gradients and the gradient-descent driver.
//! * [`collapse`]: NC1–NC4 metrics.
//! * [`channel`]: Gaussian-channel Monte Carlo with minimum-distance decoding.
//! * [`bounds`]: margins, the multiclass margin bound and covering-number
//!   accuracy bounds.

// Guards are written `!(x > 0.0)` so that NaN is rejected along with
// non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod collapse;
pub mod error;
pub mod frames;
pub mod linalg;
pub mod rng;
pub mod ufm;

pub use error::{Error, Result};
pub use frames::{CorrelationMode, Frame, FrameReport};
pub use linalg::Matrix;
pub use rng::RngSeed;
