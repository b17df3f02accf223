//! Polymer paths of the critical SHF: the singular-drift SDE sampler, radial
//! goodness-of-fit against the Doob density, local and intersection times,
//! and Radon–Nikodym reweighting between disorder parameters.

mod drift;
mod fit;
mod loctime;
mod paths;
mod vchain;

pub use drift::{DriftProfile, DriftTable, DEFAULT_CORE_FACTOR};
pub use fit::{two_sample_chi_square, transition_check, GofReport, RadialReference};
pub use loctime::{intersection_time, local_time, local_times, occupation_time, LocalTimeEstimate};
pub use paths::{sample_paths, PathEnsemble};
pub use vchain::{
    finite_dim_v_density, rn_reweight_check, sample_v_chain, FiniteDimV, RnCheck, VChainEnsemble,
    ESS_THRESHOLD,
};
