//! Motion-gated multi-object tracking.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: box arithmetic and IoU.
//! * [`kinematics`]: constant-velocity Kalman filter with a confidence-gated correction.
//! * [`association`]: score fusion, exclusive assignment, track lifecycle and the
//!   adaptive temporal buffer.
//! * [`temporal_memory`]: attention-based memory-cache selection, the FIFO motion
//!   queue with pluggable forecasters, and the gated combiner.
//! * [`metrics`]: CLEAR MOT, identity metrics and HOTA.
//! * [`simulator`]: seeded synthetic scenarios with occlusion, fast motion and clutter.
//! * [`harness`]: configuration, MOTChallenge I/O and run orchestration.

pub mod assignment;
pub mod association;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kinematics;
pub mod metrics;
pub mod rng;
pub mod simulator;
pub mod temporal_memory;

pub use error::{Error, Result};
pub use geometry::BoundingBox;
