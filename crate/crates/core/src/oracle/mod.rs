//! Brute-force references: every hidden path is walked explicitly with independently written
//! densities and Kalman algebra. Slow by design.

mod continuous;
mod discrete;

pub use continuous::{
    exact_mixture_filter, exact_mixture_filter_with_guard, Config, ConfigMoments, MixtureReport, MixtureStep,
    OracleComponent, CONTINUOUS_GUARD,
};
pub use discrete::{
    enumerate_discrete, enumerate_discrete_with_guard, EnumerationReport, HiddenConfig, HiddenSpace,
    DISCRETE_GUARD,
};
