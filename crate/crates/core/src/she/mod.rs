//! Monte Carlo for the mollified stochastic heat equation in the critical
//! regime: coupling schedule, lattice noise and Feynman–Kac estimators.

mod coupling;
mod fk;
mod lattice;
mod mollifier;
mod noise;

pub use coupling::{coupling, CouplingSchedule};
pub use fk::{feynman_kac, feynman_kac_pairing, path_weight_terms, FeynmanKacEstimate};
pub use lattice::{
    bootstrap_se, bootstrap_var_se, chapman_mc, estimate_variance_pairing, lattice_mean_pairing, lattice_pairing,
    lattice_pairing_segments, lattice_pairing_with_chaos, realization_seed, ChapmanMc, FirstChaos, Segment,
    VariancePairing,
};
pub use mollifier::{compute_i_j, MollifierSpec};
pub use noise::{sample_noise, LatticeSpec, NoiseRealization, NoiseSlice};
