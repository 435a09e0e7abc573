//! Design space identification for multi-dimensional process parameters.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod chromapcc;
pub mod dsid;
pub mod geometry;
pub mod model;
pub mod ode;
pub mod sampling;
pub mod surrogate;
