//! Fitting of reflection traces, noise spectra and calibration sweeps.

mod asymmetry;
mod background;
mod calibration;
mod kerr;
mod omit;
mod psd;

pub use asymmetry::*;
pub use background::*;
pub use calibration::*;
pub use kerr::*;
pub use omit::*;
pub use psd::*;

use crate::optimize::LmResult;
use crate::units::rad_to_hz;
use serde::{Deserialize, Serialize};

/// Named parameter estimates with one-sigma errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub units: Vec<String>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Root-sum-square of the final residual vector.
    pub residual: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub(crate) const RAD_S: &str = "rad/s";

impl FitResult {
    pub(crate) fn from_lm(names: Vec<String>, units: Vec<String>, lm: &LmResult) -> Self {
        let n = lm.params.len();
        let covariance = (0..n).map(|i| (0..n).map(|j| lm.covariance[(i, j)]).collect()).collect();
        Self {
            names,
            units,
            values: lm.params.clone(),
            errors: lm.stderr.clone(),
            covariance,
            residual: lm.rss.sqrt(),
            converged: true,
            samples: None,
            seed: None,
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|k| self.values[k])
    }

    pub fn error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|k| self.errors[k])
    }

    /// Copy with every `rad/s` entry expressed as ω/2π in Hz.
    pub fn in_hz(&self) -> Self {
        let mut out = self.clone();
        let scale: Vec<f64> = self.units.iter().map(|u| if u == RAD_S { rad_to_hz(1.0) } else { 1.0 }).collect();
        for k in 0..out.values.len() {
            out.values[k] *= scale[k];
            out.errors[k] *= scale[k];
            for j in 0..out.values.len() {
                out.covariance[k][j] *= scale[k] * scale[j];
            }
            if out.units[k] == RAD_S {
                out.units[k] = "Hz".into();
            }
        }
        out
    }
}

pub(crate) fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

#[cfg(test)]
mod tests;
