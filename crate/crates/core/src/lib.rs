//! Circuit, dynamics, noise and estimation models for an array of mechanical
//! drum oscillators coupled to a six-site microwave ring (hexamer).
//!
//! All quantities are SI with angular frequencies in rad/s. Conversion to and
//! from Hz happens only at the file/CLI boundary (see [`config`] and [`io`]).

pub mod circuit;
pub mod config;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod quad;
pub mod ringdown;
pub mod spectra;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
