//! Multilevel binary polar-coded modulation with Honda-Yamamoto shaping.

pub mod crc;
pub mod error;
pub mod modem;
pub mod polar;
pub mod rng;
pub mod bounds;
pub mod ccdm;
pub mod construction;
pub mod shaping;
pub mod sim;

pub use error::{Error, Result};
