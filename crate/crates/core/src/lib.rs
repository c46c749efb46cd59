//! Pricing, hedging, simulation and calibration of life-insurance
//! liabilities in a market driven by a polynomial diffusion, valued with
//! the benchmark portfolio as numéraire.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod generator;
pub mod hedging;
pub mod market;
pub mod poly;
pub mod presets;
pub mod pricing;
pub mod simulate;

pub use error::{Error, Result};
