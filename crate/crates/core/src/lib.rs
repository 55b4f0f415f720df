//! Structured-grid simulator for a four-equation diffuse-interface tumor
//! growth model: Cahn-Hilliard for the tumor fraction, a Darcy law with
//! Korteweg forcing, transport of the viable-cell fraction and a
//! quasi-static nutrient equation.

pub mod cahn_hilliard;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod flow;
pub mod limit;
pub mod mms;
pub mod nutrient;
pub mod physics;
pub mod rng;
pub mod simulate;
pub mod transport;

pub use error::Error;
