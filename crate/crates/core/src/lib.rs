//! Simulation, fitting and calibration toolkit for flux-driven
//! SNAIL-terminated resonators.

pub mod circuit;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod fitting;
pub mod optim;
pub mod quantum;
pub mod roots;

pub use error::{Error, Result};
