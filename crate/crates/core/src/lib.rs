pub mod config;
pub mod coupling;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod kac;
pub mod momentum;
pub mod noise;
pub mod sphere;
pub mod state;
pub mod stats;

pub use config::{Engine, IntegratorKind, Renorm, RotationPairs, SimConfig};
pub use error::{Error, Result};
pub use state::StateVector;
