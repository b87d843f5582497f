//! Stochastic simulation of brain-pulse reduction driven by probability
//! current.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod reduction;
pub mod scenarios;
pub mod state;

pub use error::{Error, Result};
