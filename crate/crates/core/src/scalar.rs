use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point types an expression can be evaluated in.
pub trait Scalar: Float + FromPrimitive + Display + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
