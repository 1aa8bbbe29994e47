//! Scalar abstraction for the geometric kernels.
//!
//! Distance kernels, simplification and the metric index are generic over the
//! coordinate scalar so they can run in `f32` or `f64`. The data model and the
//! classification pipeline are pinned to `f64` (dataset files widen 32-bit
//! values on load).

use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point scalar usable as a trajectory coordinate.
pub trait Real: Float + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from `f64`, for tolerances and constants.
    fn from_f64(v: f64) -> Self {
        num_traits::cast(v).expect("finite f64 converts to any Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}
