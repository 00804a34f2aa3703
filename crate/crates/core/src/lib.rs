//! Standing-and-walking biped lab: a planar simulator, the standing/walking
//! reward, a recurrent PPO trainer with mirror loss, and benchmark metrics.

// `!(x > 0.0)` deliberately rejects NaN; index loops read better in the numerics.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::manual_is_multiple_of
)]

pub mod bench;
pub mod config;
pub mod error;
pub mod policy;
pub mod rewards;
pub mod sim;
pub mod train;
pub mod types;
pub mod validation;

pub use error::{Error, Result};
pub use types::*;
