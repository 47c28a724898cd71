//! Driven Kerr resonator. With `δ = ω_c − ω`, drive flux `Ṅ = P/(ħω)` at
//! the device and a resonance pulled to `ω_c − K n`, the intracavity photon
//! number solves
//! `K² n³ − 2δK n² + (δ² + κ²/4) n − κ_ex Ṅ = 0`
//! and the reflection is `1 − 2κ_ex/(κ + 2i(ω − ω_c + K n))`.

use super::{FitResult, RAD_S};
use crate::error::ensure;
use crate::linalg::c;
use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::spectra::ComplexTrace;
use crate::units::{db_to_power, HBAR};
use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrParams {
    pub kappa_ex: f64,
    pub kappa_0: f64,
    pub omega_c: f64,
    /// Frequency pull per photon (rad/s).
    pub kerr: f64,
    /// Attenuation between source and device, dB.
    pub attenuation_db: f64,
}

impl KerrParams {
    pub fn kappa(&self) -> f64 {
        self.kappa_ex + self.kappa_0
    }

    fn validate(&self) -> Result<()> {
        ensure(self.kappa_ex > 0.0 && self.kappa_0 >= 0.0, || "decay rates must be positive".into())?;
        ensure(self.kerr.is_finite() && self.attenuation_db.is_finite(), || "non-finite Kerr parameters".into())
    }

    /// Photon flux at the device for source power `power` (W) at drive `omega`.
    pub fn flux(&self, power: f64, omega: f64) -> f64 {
        power * db_to_power(-self.attenuation_db) / (HBAR * omega)
    }

    /// Coefficients `[a3, a2, a1, a0]` of the photon-number cubic.
    pub fn cubic(&self, power: f64, omega: f64) -> [f64; 4] {
        let d = self.omega_c - omega;
        let k = self.kappa();
        [self.kerr * self.kerr, -2.0 * d * self.kerr, d * d + k * k / 4.0, -self.kappa_ex * self.flux(power, omega)]
    }

    pub fn reflection(&self, omega: f64, photons: f64) -> Complex64 {
        1.0 - 2.0 * self.kappa_ex / c(self.kappa(), 2.0 * (omega - self.omega_c + self.kerr * photons))
    }
}

/// Real roots of `a3 x³ + a2 x² + a1 x + a0`, ascending, polished by Newton steps.
pub fn real_cubic_roots(coef: [f64; 4]) -> Vec<f64> {
    let [a3, a2, a1, a0] = coef;
    let mut roots = if a3 == 0.0 {
        if a2 == 0.0 {
            if a1 == 0.0 { vec![] } else { vec![-a0 / a1] }
        } else {
            let disc = a1 * a1 - 4.0 * a2 * a0;
            if disc < 0.0 {
                vec![]
            } else {
                let q = -0.5 * (a1 + a1.signum() * disc.sqrt());
                let mut r = vec![];
                if q != 0.0 {
                    r.push(a0 / q);
                    r.push(q / a2);
                } else {
                    r.push(0.0);
                }
                r
            }
        }
    } else {
        let (b, cc, d) = (a2 / a3, a1 / a3, a0 / a3);
        let q = (b * b - 3.0 * cc) / 9.0;
        let r = (2.0 * b * b * b - 9.0 * b * cc + 27.0 * d) / 54.0;
        if r * r < q * q * q {
            let theta = (r / q.powf(1.5)).clamp(-1.0, 1.0).acos();
            let s = -2.0 * q.sqrt();
            (0..3).map(|k| s * ((theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() - b / 3.0).collect()
        } else {
            let a = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
            let bb = if a == 0.0 { 0.0 } else { q / a };
            vec![a + bb - b / 3.0]
        }
    };
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((a3 * *x + a2) * *x + a1) * *x + a0;
            let df = (3.0 * a3 * *x + 2.0 * a2) * *x + a1;
            if df != 0.0 {
                let step = f / df;
                if step.is_finite() {
                    *x -= step;
                }
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

/// Non-negative photon numbers at one drive frequency and power.
pub fn photon_roots(p: &KerrParams, power: f64, omega: f64) -> Result<Vec<f64>> {
    p.validate()?;
    ensure(power >= 0.0, || "drive power must be non-negative".into())?;
    if power == 0.0 {
        return Ok(vec![0.0]);
    }
    let roots: Vec<f64> = real_cubic_roots(p.cubic(power, omega)).into_iter().filter(|n| *n > 0.0).collect();
    if roots.is_empty() {
        return Err(Error::IntegrationDomain(format!("no positive photon-number root at ω = {omega:.6e}")));
    }
    Ok(roots)
}

#[derive(Debug, Clone)]
pub struct KerrSweep {
    pub powers: Vec<f64>,
    pub traces: Vec<ComplexTrace>,
    /// Selected (smallest positive, up-sweep) photon number per point.
    pub photons: Vec<Vec<f64>>,
    /// All positive roots per point (three inside the bistable band).
    pub roots: Vec<Vec<Vec<f64>>>,
}

/// Reflection traces over `omegas` for each source power (W).
pub fn kerr_response(p: &KerrParams, omegas: &[f64], powers: &[f64]) -> Result<KerrSweep> {
    let mut traces = Vec::with_capacity(powers.len());
    let mut photons = Vec::with_capacity(powers.len());
    let mut all = Vec::with_capacity(powers.len());
    for &pw in powers {
        let roots: Vec<Vec<f64>> = omegas.iter().map(|&w| photon_roots(p, pw, w)).collect::<Result<_>>()?;
        let n: Vec<f64> = roots.iter().map(|r| r[0]).collect();
        traces.push(ComplexTrace {
            omega: omegas.to_vec(),
            values: omegas.iter().zip(&n).map(|(w, n)| p.reflection(*w, *n)).collect(),
        });
        photons.push(n);
        all.push(roots);
    }
    Ok(KerrSweep { powers: powers.to_vec(), traces, photons, roots: all })
}

/// Discriminant of the photon-number cubic as a function of drive frequency.
pub fn cubic_discriminant(p: &KerrParams, power: f64, omega: f64) -> f64 {
    let [a, b, c, d] = p.cubic(power, omega);
    18.0 * a * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * a * c * c * c - 27.0 * a * a * d * d
}

/// Drive-frequency interval with three positive roots, located from the
/// zeros of the cubic discriminant inside `[lo, hi]`.
pub fn bistable_band(p: &KerrParams, power: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let steps = 4000;
    let f = |w: f64| cubic_discriminant(p, power, w);
    let grid: Vec<f64> = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect();
    let mut zeros = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (f(a), f(b));
        if fa == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
            if (b - a).abs() <= 1e-15 * m.abs() {
                break;
            }
        }
        zeros.push(0.5 * (a + b));
    }
    match zeros.as_slice() {
        [a, b] => Some((*a, *b)),
        _ => None,
    }
}

/// Joint fit of reflection traces at several source powers with
/// `κ_ex, κ_0, ω_c, K` free and the attenuation fixed.
pub fn fit_kerr(traces: &[ComplexTrace], powers: &[f64], guess: &KerrParams) -> Result<FitResult> {
    ensure(!traces.is_empty() && traces.len() == powers.len(), || "one power per trace required".into())?;
    let att = guess.attenuation_db;
    // the center is fitted as an offset from the guess
    let w0 = guess.omega_c;
    let total: usize = traces.iter().map(|t| t.omega.len()).sum();
    ensure(total > 4, || "not enough points".into())?;
    let resid = |x: &[f64]| -> Result<Vec<f64>> {
        let p = KerrParams { kappa_ex: x[0], kappa_0: x[1], omega_c: w0 + x[2], kerr: x[3], attenuation_db: att };
        if p.kappa_ex <= 0.0 || p.kappa_0 < 0.0 {
            return Err(Error::Inadmissible("negative decay rate".into()));
        }
        let mut out = Vec::with_capacity(2 * total);
        for (t, &pw) in traces.iter().zip(powers) {
            for (w, d) in t.omega.iter().zip(&t.values) {
                let n = photon_roots(&p, pw, *w)?[0];
                let r = p.reflection(*w, n) - d;
                out.push(r.re);
                out.push(r.im);
            }
        }
        Ok(out)
    };
    let k = guess.kappa();
    let max_n = traces
        .iter()
        .zip(powers)
        .map(|(t, pw)| guess.kappa_ex * guess.flux(*pw, t.omega[0]) / (k * k / 4.0))
        .fold(1.0, f64::max);
    let x0 = [guess.kappa_ex, guess.kappa_0, 0.0, guess.kerr];
    let typical = vec![k, k, k, guess.kerr.abs().max(1e-3 * k / max_n)];
    let lm = levenberg_marquardt(resid, &x0, &LmOptions { typical: Some(typical), ..Default::default() })?;
    let names = ["kappa_ex", "kappa_0", "omega_c", "kerr"].map(String::from).to_vec();
    let mut fit = FitResult::from_lm(names, vec![RAD_S.to_string(); 4], &lm);
    fit.values[2] += w0;
    Ok(fit)
}
