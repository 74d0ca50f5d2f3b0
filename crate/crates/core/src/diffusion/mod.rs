//! Noise schedule, forward noising, deterministic DDIM stepping, layered
//! classifier-free guidance and pairwise joint multi-view sampling.

mod denoiser;
mod guidance;
mod pairing;
mod sampler;
mod schedule;

pub use denoiser::{Conditions, OracleDenoiser, PairDenoiser, PairInput};
pub use guidance::{cfg_compose, CfgScales, GuidanceLevels, GuidedDenoiser};
pub use pairing::{pair_schedule, rounds_per_cycle, Bye, PairRound};
pub use sampler::{
    blob_init, joint_multiview_sample, SamplerConfig, DEFAULT_BLOB_STEPS, DEFAULT_STEPS,
};
pub use schedule::{
    ddim_step, forward_noise, make_schedule, DiffusionSchedule, BASE_STEPS, BETA_END, BETA_START,
};
