//! Quantum-noise spectra of the linearized array: the cavity output power
//! spectral density, mechanical correlators, their covariance matrix and
//! the occupations of its eigenmodes.
//!
//! Spectra are in quanta per unit bandwidth and symmetrized where stated;
//! integrals use `dω/2π`.

mod chain;
mod covariance;

pub use chain::{aux_cavity_heating, thermal_occupation, MeasurementChain};
pub use covariance::{
    collective_occupations, covariance_from_spectra, covariance_matrix, default_grid, CorrelatorSpectra, Occupations,
};

use crate::dynamics::{Baths, System};
use crate::error::ensure;
use crate::linalg::{c, CMat, I};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Real-valued spectrum on an angular-frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
}

/// Complex-valued trace (e.g. a reflection coefficient) on an angular-frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTrace {
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Frequency-domain response coefficients at one probe frequency.
///
/// `a[p]` maps input port `p` (0: cavity, i ≥ 1: oscillator i) to the cavity
/// field; `b[(k, p)]` maps it to oscillator `k`.
#[derive(Debug, Clone)]
pub struct Response {
    pub a: Vec<Complex64>,
    pub b: CMat,
    pub chi: Vec<Complex64>,
    pub d: Complex64,
}

/// Response at pump-frame frequency `omega`. Detunings are formed relative to
/// the system's reference frequency before any further arithmetic.
pub fn response(sys: &System, omega: f64) -> Response {
    let w0 = sys.reference_frequency();
    let x = omega - w0;
    let n = sys.n();
    let chi: Vec<Complex64> =
        (0..n).map(|i| 1.0 / c(sys.gamma[i] / 2.0, -(x - (sys.omega[i] - w0)))).collect();
    let mut d = c(sys.kappa() / 2.0, -(x - (sys.detuning - w0)));
    for i in 0..n {
        d += chi[i] * sys.g[i] * sys.g[i];
    }
    let mut a = Vec::with_capacity(n + 1);
    a.push(1.0 / d);
    for i in 0..n {
        a.push(-I * sys.g[i] * chi[i] / d);
    }
    let mut b = CMat::zeros(n, n + 1);
    for k in 0..n {
        b[(k, 0)] = -I * sys.g[k] * chi[k] / d;
        for p in 0..n {
            b[(k, p + 1)] = if k == p {
                chi[k] - sys.g[k] * sys.g[k] * chi[k] * chi[k] / d
            } else {
                -sys.g[k] * sys.g[p] * chi[k] * chi[p] / d
            };
        }
    }
    Response { a, b, chi, d }
}

fn check_baths(sys: &System, baths: &Baths) -> Result<()> {
    sys.validate()?;
    if baths.mechanics.len() != sys.n() {
        return Err(Error::Dimension(format!("{} bath occupations for {} oscillators", baths.mechanics.len(), sys.n())));
    }
    ensure(baths.cavity >= 0.0 && baths.mechanics.iter().all(|n| *n >= 0.0), || {
        "bath occupations must be non-negative".into()
    })
}

/// Symmetrized output spectrum in closed form:
/// `1/2 + [κ_ex κ_0 n_c + Σ κ_ex Γ_i g_i² |χ_i|² n_i] / |D|²`.
pub fn output_psd(sys: &System, baths: &Baths, omegas: &[f64]) -> Result<Psd> {
    check_baths(sys, baths)?;
    let values = omegas
        .iter()
        .map(|&w| {
            let r = response(sys, w);
            let mut num = sys.kappa_ex * sys.kappa_0 * baths.cavity;
            for i in 0..sys.n() {
                num += sys.kappa_ex * sys.gamma[i] * sys.g[i] * sys.g[i] * r.chi[i].norm_sqr() * baths.mechanics[i];
            }
            0.5 + num / r.d.norm_sqr()
        })
        .collect();
    Ok(Psd { omega: omegas.to_vec(), values })
}

/// The same spectrum assembled port by port from the response coefficients,
/// before the algebraic cancellation of the vacuum terms.
pub fn output_psd_by_ports(sys: &System, baths: &Baths, omegas: &[f64]) -> Result<Psd> {
    check_baths(sys, baths)?;
    let values = omegas
        .iter()
        .map(|&w| {
            let r = response(sys, w);
            let mut s = 0.5 * (1.0 - sys.kappa_ex * r.a[0]).norm_sqr()
                + (baths.cavity + 0.5) * sys.kappa_ex * sys.kappa_0 * r.a[0].norm_sqr();
            for i in 0..sys.n() {
                s += (baths.mechanics[i] + 0.5) * sys.kappa_ex * sys.gamma[i] * r.a[i + 1].norm_sqr();
            }
            s
        })
        .collect();
    Ok(Psd { omega: omegas.to_vec(), values })
}

/// Noise weights of the input ports for normally ordered (`anti = false`)
/// or anti-normally ordered correlators.
fn port_weights(sys: &System, baths: &Baths, anti: bool) -> Vec<f64> {
    let extra = if anti { 1.0 } else { 0.0 };
    let mut w = Vec::with_capacity(sys.n() + 1);
    w.push(sys.kappa_0 * (baths.cavity + extra) + sys.kappa_ex * extra);
    for i in 0..sys.n() {
        w.push(sys.gamma[i] * (baths.mechanics[i] + extra));
    }
    w
}

/// `S_{b_i† b_j}(ω) = Σ_p conj(B_ip) B_jp w_p` (normally ordered).
pub(crate) fn correlator_at(sys: &System, weights: &[f64], omega: f64, out: &mut CMat) {
    let r = response(sys, omega);
    let n = sys.n();
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for (p, w) in weights.iter().enumerate() {
                s += r.b[(i, p)].conj() * r.b[(j, p)] * *w;
            }
            out[(i, j)] = s;
        }
    }
}

/// Sampled mechanical correlator spectra on `omegas`.
pub fn mechanical_correlators(sys: &System, baths: &Baths, omegas: &[f64]) -> Result<CorrelatorSpectra> {
    check_baths(sys, baths)?;
    let weights = port_weights(sys, baths, false);
    let n = sys.n();
    let values = omegas
        .iter()
        .map(|&w| {
            let mut m = CMat::zeros(n, n);
            correlator_at(sys, &weights, w, &mut m);
            m
        })
        .collect();
    Ok(CorrelatorSpectra { omega: omegas.to_vec(), values })
}

/// Spectra of a readout quadrature `X = Σ w_i b_i / |w|`: the normally
/// ordered `S_{X†X}` (anti-Stokes-like) and anti-normally ordered `S_{XX†}`
/// (Stokes-like) densities.
pub fn readout_spectra(sys: &System, baths: &Baths, readout: &[f64], omegas: &[f64]) -> Result<(Psd, Psd)> {
    check_baths(sys, baths)?;
    if readout.len() != sys.n() {
        return Err(Error::Dimension("readout weights must match the oscillator count".into()));
    }
    let norm = readout.iter().map(|x| x * x).sum::<f64>().sqrt();
    ensure(norm > 0.0, || "readout weights vanish".into())?;
    let w: Vec<f64> = readout.iter().map(|x| x / norm).collect();
    let quad = |weights: &[f64]| -> Vec<f64> {
        omegas
            .iter()
            .map(|&om| {
                let r = response(sys, om);
                weights
                    .iter()
                    .enumerate()
                    .map(|(p, wp)| {
                        let x: Complex64 = (0..sys.n()).map(|i| r.b[(i, p)] * w[i]).sum();
                        x.norm_sqr() * wp
                    })
                    .sum()
            })
            .collect()
    };
    let normal = quad(&port_weights(sys, baths, false));
    let anti = quad(&port_weights(sys, baths, true));
    Ok((Psd { omega: omegas.to_vec(), values: normal }, Psd { omega: omegas.to_vec(), values: anti }))
}

/// Weak-coupling rate-equation occupation of the bright collective mode:
/// `(Γ̄_m n̄_th + A₋ n_c' + A₊ (n_c' + 1)) / (Γ̄_m + A₋ − A₊)` with
/// `A∓ = g_col² κ/(κ²/4 + (Δ ∓ Ω̄)²)`, `g_col² = Σ g_i²` and the cavity
/// noise occupation `n_c' = κ_0 n_c/κ`.
pub fn rate_equation_occupation(sys: &System, baths: &Baths) -> Result<f64> {
    check_baths(sys, baths)?;
    let n = sys.n() as f64;
    let kappa = sys.kappa();
    let gamma = sys.gamma.iter().sum::<f64>() / n;
    let heat = sys.gamma.iter().zip(&baths.mechanics).map(|(g, b)| g * b).sum::<f64>() / n;
    let omega = sys.omega.iter().sum::<f64>() / n;
    let g2: f64 = sys.g.iter().map(|g| g * g).sum();
    let lorentz = |d: f64| g2 * kappa / (kappa * kappa / 4.0 + d * d);
    let (cool, anti) = (lorentz(sys.detuning - omega), lorentz(sys.detuning + omega));
    let n_c = sys.kappa_0 * baths.cavity / kappa;
    Ok((heat + cool * n_c + anti * (n_c + 1.0)) / (gamma + cool - anti))
}

#[cfg(test)]
mod tests;
