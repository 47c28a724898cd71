use crate::error::ensure;
use crate::linalg::CVec;
use crate::Result;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Normalized amplitudes and relative phases of a collective mechanical mode.
/// The oscillator with the largest participation is the phase reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeShape {
    pub eta: Vec<f64>,
    #[serde(rename = "phi_rad")]
    pub phi: Vec<f64>,
    #[serde(rename = "reference_index")]
    pub reference: usize,
}

impl ModeShape {
    pub fn from_amplitudes(a: &[Complex64]) -> Result<Self> {
        let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        ensure(norm > 0.0 && norm.is_finite(), || "mode amplitudes vanish".into())?;
        let mut reference = 0;
        for (k, z) in a.iter().enumerate() {
            if z.norm() > a[reference].norm() * (1.0 + 1e-12) {
                reference = k;
            }
        }
        let ref_phase = a[reference].arg();
        let eta = a.iter().map(|z| z.norm() / norm).collect();
        let phi = a.iter().map(|z| wrap(z.arg() - ref_phase)).collect();
        Ok(Self { eta, phi, reference })
    }

    pub fn vector(&self) -> CVec {
        CVec::from_iterator(self.eta.len(), self.eta.iter().zip(&self.phi).map(|(e, p)| Complex64::from_polar(*e, *p)))
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &ModeShape) -> f64 {
        self.vector().dotc(&other.vector()).norm_sqr()
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
}

/// Wrap to (-π, π].
pub fn wrap(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}
