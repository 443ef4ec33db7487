//! Solution algorithms `h` for the three testbeds, plus exhaustive oracles.

pub mod cvrp;
pub mod kp;
pub mod oracle;
pub mod spp;

pub use cvrp::{solve_cvrp, CvrpInstance, DepotArcMode};
pub use kp::{solve_kp, KpInstance, KpParams};
pub use oracle::brute_force_oracle;
pub use spp::{solve_spp, SppInstance};
