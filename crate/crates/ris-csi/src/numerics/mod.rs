//! Complex matrix/vector arithmetic, real tensors and reproducible random
//! number generation underpinning every other module.
//!
//! All types are immutable values after construction and safe to share
//! between threads; operations are pure functions.

mod complex;
mod linalg;
mod rng;
mod tensor;

pub use complex::{frob_norm, hermitian, matmul, CMat, CVec};
pub use linalg::lstsq;
pub use rng::{cgauss, RngStream};
pub use tensor::RTensor3;
