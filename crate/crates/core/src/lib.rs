//! Lumped-parameter simulation, control and sizing for portable high-flow
//! pneumatic supply/regulators that drive soft robots from an onboard
//! pressure reservoir.

pub mod analysis;
pub mod cli;
pub mod components;
pub mod config;
pub mod control;
pub mod error;
pub mod gasmodel;
pub mod output;
pub mod sim;
pub mod sizing;

pub use error::{Error, Result};
