//! Particle dynamics: generator action, exact simulation, exact dual semigroup.

pub mod fenwick;
pub mod generator;
pub mod semigroup;
pub mod simulate;

pub use generator::{apply_generator, capped_occupancies, check_duality_pointwise, detailed_balance_check};
pub use semigroup::{exact_semigroup, poisson_weights, DualStateSpace, DEFAULT_STATE_LIMIT};
pub use simulate::{replica_rng, simulate, simulate_coordinates, simulate_dual, Event, Simulator, Trajectory};
