//! Orthogonal self-duality for IRW / SEP / SIP particle systems and the
//! higher-order fluctuation fields built from the duality polynomials.

pub mod dynamics;
pub mod error;
pub mod fields;
pub mod model;
pub mod orthopoly;
pub mod rational;
pub mod scalar;
pub mod series;
pub mod verify;

pub use error::{Error, Result};
pub use model::{DualConfig, Family, Geometry, Kernel, ModelSpec, Occupancy, Torus};
pub use rational::Q;
pub use scalar::Scalar;
pub use verify::{run_suite, Context, RunConfig, SuiteName, SuiteReport, Verdict};
