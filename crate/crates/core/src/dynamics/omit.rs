use super::{collective_eigenmodes, System};
use crate::linalg::{self, c};
use crate::{Error, Result};
use num_complex::Complex64;

/// Probe reflection `S11(ω) = 1 - κ_ex / (Σ g_i² χ_i + 1/χ_c)` on a grid of
/// pump-frame probe frequencies.
pub fn omit_reflection(sys: &System, omegas: &[f64]) -> Result<Vec<Complex64>> {
    sys.validate()?;
    let w0 = sys.reference_frequency();
    // all detunings are taken relative to the same reference so that both
    // evaluation routes see identical rounded inputs
    let dc = sys.detuning - w0;
    let dm: Vec<f64> = sys.omega.iter().map(|o| o - w0).collect();
    Ok(omegas
        .iter()
        .map(|&w| {
            let x = w - w0;
            let mut d = c(sys.kappa() / 2.0, -(x - dc));
            for i in 0..sys.n() {
                let chi = 1.0 / c(sys.gamma[i] / 2.0, -(x - dm[i]));
                d += chi * sys.g[i] * sys.g[i];
            }
            1.0 - sys.kappa_ex / d
        })
        .collect())
}

/// The same response expanded over the collective eigenmodes:
/// `S11 = 1 - κ_ex Σ_j S_0j (S⁻¹)_j0 / (-iω - λ_j)`.
pub fn omit_reflection_collective(sys: &System, omegas: &[f64]) -> Result<Vec<Complex64>> {
    let modes = collective_eigenmodes(sys)?;
    if modes.is_defective() {
        return Err(Error::Defective(modes.condition));
    }
    let (s, _) = modes.basis();
    let sinv = linalg::inverse(&s)?;
    let n = s.nrows();
    let weights: Vec<Complex64> = (0..n).map(|j| s[(0, j)] * sinv[(j, 0)]).collect();
    Ok(omegas
        .iter()
        .map(|&w| {
            let x = w - modes.shift;
            let sum: Complex64 = (0..n).map(|j| weights[j] / (c(0.0, -x) - modes.modes[j].shifted)).sum();
            1.0 - sys.kappa_ex * sum
        })
        .collect())
}
