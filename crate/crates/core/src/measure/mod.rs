//! Grid measures with the gluing operations •_ς, ∘_ς and •, the moment
//! densities U_P, Q_P^ϑ, K_P^ϑ, and second-moment pairings including the
//! Chapman–Kolmogorov defect.

mod grid;
mod moment;
mod pairing;

pub use grid::{GridMeasure, SlotGrid};
pub use moment::{
    k_density, moment_density_with, q_density, u_density, MomentDensity, MomentKind, Partition,
};
pub use pairing::{
    chain_nodes, chain_pairing, chapman_defect, chapman_defect_with, k_pairing, q_pairing,
    u_mean_pairing, u_pairing, ChainOp, GaussTerm, GaussianTest,
};
