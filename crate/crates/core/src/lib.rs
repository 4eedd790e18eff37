//! Recovery of one-hidden-layer ReLU teacher networks by full-batch gradient
//! descent on the empirical square loss.
//!
//! The crate is organized around the pipeline: build a ground-truth network
//! with a controlled spectrum ([`teacher`]), draw a synthetic dataset, run
//! fixed-step gradient descent ([`training`]) on the empirical loss
//! ([`objective`]), and score the result up to hidden-neuron relabeling
//! ([`evaluation`]). [`numerics`] supplies the dense-matrix and seeded-RNG
//! substrate; everything is 64-bit float and deterministic under a fixed seed.

pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod objective;
pub mod teacher;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{derive_seed, hash_label, Matrix, RngStream};
pub use teacher::{Dataset, TeacherSpec};
pub use training::{GDConfig, StopReason, Trajectory};
