// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod grid;
pub mod channel;
pub mod optics;
pub mod skr;
pub mod tnn;
pub mod wfe;
pub mod experiment;
