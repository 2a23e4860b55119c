//! Hidden Markov switching models: plain and mixture-emission HMMs, switching autoregressions,
//! explicit-duration models with one or two sets of count variables, and switching linear
//! Gaussian state-space models, together with brute-force oracles and synthetic data.

pub mod bench;
pub mod discrete;
pub mod duration;
pub mod segmental;
pub mod slgssm;
pub mod synth;
pub mod error;
pub mod experiment;
pub mod math;
pub mod model;
pub mod oracle;
pub mod pipeline;

pub use error::{Error, Result};
