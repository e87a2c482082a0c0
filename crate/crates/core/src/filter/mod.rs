//! Sampling near-optimal trajectories by filtering a virtual stochastic system.

mod particle;
mod system;
mod ut;

pub use particle::{
    ensemble_to_trajectories, multinomial_indices, particle_filter, should_resample, stream_rng, FilterConfig,
    ParticleEnsemble, INNOVATION_REGULARIZATION,
};
pub use system::{build_virtual_system, VirtualSystem, DEFAULT_NU};
pub use ut::{matrix_sqrt_psd, softplus, unscented_transform, ut_lambda, UtResult};
