//! Transfer-matrix model of the two-coupler interferometric feedline.

use crate::error::ensure;
use crate::linalg::CMat;
use crate::units::db_to_amplitude;
use crate::Result;
use num_complex::Complex64;

/// Two directional couplers joined by a pair of lossy lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplerChain {
    /// Coupling of the first coupler, dB (positive number).
    pub first_db: f64,
    /// Coupling of the second coupler, dB.
    pub second_db: f64,
    /// Loss of each branch between the couplers, dB.
    pub branch_loss_db: f64,
}

impl Default for CouplerChain {
    fn default() -> Self {
        Self { first_db: 10.0, second_db: 20.0, branch_loss_db: 2.0 }
    }
}

fn coupler(db: f64) -> CMat {
    let cpl = db_to_amplitude(-db);
    let t = (1.0 - cpl * cpl).max(0.0).sqrt();
    let (d, x) = (1.0 / cpl, t / cpl);
    CMat::from_row_slice(
        4,
        4,
        &[d, 0.0, 0.0, x, 0.0, d, x, 0.0, 0.0, x, d, 0.0, x, 0.0, 0.0, d].map(Complex64::from),
    )
}

fn line(phi: f64, loss_db: f64) -> CMat {
    let eta = db_to_amplitude(-loss_db);
    let fwd = Complex64::from_polar(1.0 / eta, -phi);
    let bwd = Complex64::from_polar(eta, phi);
    CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![fwd, fwd, bwd, bwd]))
}

/// Transmission through the cascade for a single-branch phase `phi` (the
/// interferometer loop phase is `2 phi`).
pub fn coupler_cascade_s21(chain: &CouplerChain, phi: f64) -> Result<Complex64> {
    ensure(chain.first_db >= 0.0 && chain.second_db >= 0.0, || "coupling must be >= 0 dB".into())?;
    ensure(chain.branch_loss_db >= 0.0, || "branch loss must be >= 0 dB".into())?;
    let t = coupler(chain.first_db) * line(phi, chain.branch_loss_db) * coupler(chain.second_db);
    let (t11, t12, t21, t22) = (t[(0, 0)], t[(0, 1)], t[(1, 0)], t[(1, 1)]);
    Ok(-t22 / (t21 * t12 - t22 * t11))
}

/// `|S21|²` in dB over a set of loop phases `2 phi`.
pub fn coupler_s21_sweep(chain: &CouplerChain, loop_phases: &[f64]) -> Result<Vec<(f64, f64)>> {
    loop_phases
        .iter()
        .map(|&p| coupler_cascade_s21(chain, p / 2.0).map(|s| (p, 10.0 * s.norm_sqr().log10())))
        .collect()
}
