//! Exact inference and EM for the regime chain with per-step emissions.

pub mod em;
pub mod gmm;
pub mod hmm;

pub use em::{em_fit, EmConfig, EmResult};
pub use gmm::{smooth_gmm, smooth_gmm_chained, MixturePosteriors};
pub use hmm::{
    filter, path_log_joint, posterior_mode, sample_path, smooth_parallel, smooth_sequential,
    viterbi, PosteriorTables, ViterbiResult,
};
