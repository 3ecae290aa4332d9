//! Entanglement farming in a cavity with moving walls, simulated exactly in
//! the Gaussian (continuous-variable) formalism.

pub mod audit;
pub mod cavity;
pub mod drivers;
pub mod error;
pub mod experiment;
pub mod farming;
pub mod gaussian;
pub mod integrate;

pub use error::{Error, Result};
