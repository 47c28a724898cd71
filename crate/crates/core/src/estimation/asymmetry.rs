use super::{FitResult, RAD_S};
use crate::error::ensure;
use crate::linalg::c;
use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::quad::{integrate, QuadOptions};
use crate::spectra::Psd;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

const WEIDEMAN_N: usize = 32;

fn weideman_coefficients() -> &'static (f64, Vec<f64>) {
    static COEF: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    COEF.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        let mut f = vec![0.0; m2];
        for (slot, k) in (1..m2).zip(-(m as i64) + 1..m as i64) {
            let t = l * (k as f64 * PI / m as f64 / 2.0).tan();
            f[slot] = (-t * t).exp() * (l * l + t * t);
        }
        // fftshift, then the real part of a forward DFT
        let shifted: Vec<f64> = (0..m2).map(|i| f[(i + m) % m2]).collect();
        let a: Vec<f64> = (0..m2)
            .map(|j| {
                shifted
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (2.0 * PI * (i * j) as f64 / m2 as f64).cos())
                    .sum::<f64>()
                    / m2 as f64
            })
            .collect();
        (l, a[1..=n].iter().rev().cloned().collect())
    })
}

/// Faddeeva function `w(z) = e^{−z²} erfc(−iz)` for `Im z ≥ 0`
/// (Weideman's rational expansion, 32 terms).
pub fn faddeeva(z: Complex64) -> Complex64 {
    let (l, a) = weideman_coefficients();
    let iz = Complex64::new(-z.im, z.re);
    let denom = *l - iz;
    let zz = (*l + iz) / denom;
    let mut p = Complex64::new(0.0, 0.0);
    for coef in a {
        p = p * zz + coef;
    }
    2.0 * p / (denom * denom) + (1.0 / PI.sqrt()) / denom
}

/// Area-normalized Lorentzian of full width `gamma`.
pub fn lorentzian(x: f64, gamma: f64) -> f64 {
    (gamma / (2.0 * PI)) / (x * x + gamma * gamma / 4.0)
}

/// Area-normalized Voigt profile: Lorentzian of full width `gamma`
/// convolved with a Gaussian of standard deviation `sigma`.
pub fn voigt(x: f64, gamma: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return lorentzian(x, gamma);
    }
    let s2 = sigma * 2f64.sqrt();
    faddeeva(c(x / s2, gamma / 2.0 / s2)).re / (sigma * (2.0 * PI).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lineshape {
    Lorentzian,
    /// Gaussian resolution bandwidth with standard deviation `sigma` (rad/s).
    Voigt { sigma: f64 },
}

impl Lineshape {
    fn eval(&self, x: f64, gamma: f64) -> f64 {
        match self {
            Lineshape::Lorentzian => lorentzian(x, gamma),
            Lineshape::Voigt { sigma } => voigt(x, gamma, *sigma),
        }
    }
}

/// A single sideband peak `BG + area · shape(ω − center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandFit {
    pub area: f64,
    pub center: f64,
    pub width: f64,
    pub background: f64,
    pub fit: FitResult,
}

fn edge_mean(v: &[f64]) -> f64 {
    let k = (v.len() / 10).max(1);
    (v[..k].iter().sum::<f64>() + v[v.len() - k..].iter().sum::<f64>()) / (2 * k) as f64
}

pub fn fit_sideband(psd: &Psd, shape: Lineshape) -> Result<SidebandFit> {
    ensure(psd.omega.len() == psd.values.len() && psd.omega.len() >= 8, || "sideband spectrum too short".into())?;
    let bg = edge_mean(&psd.values);
    let kmax = (0..psd.values.len()).max_by(|&a, &b| psd.values[a].total_cmp(&psd.values[b])).unwrap_or(0);
    let height = psd.values[kmax] - bg;
    let half = bg + height / 2.0;
    let (mut lo, mut hi) = (kmax, kmax);
    while lo > 0 && psd.values[lo] > half {
        lo -= 1;
    }
    while hi + 1 < psd.values.len() && psd.values[hi] > half {
        hi += 1;
    }
    let step = (psd.omega[psd.omega.len() - 1] - psd.omega[0]).abs() / psd.omega.len() as f64;
    let width = (psd.omega[hi] - psd.omega[lo]).abs().max(step);
    let center = psd.omega[kmax];
    let x0 = [height.abs().max(f64::MIN_POSITIVE) * PI * width / 2.0, 0.0, width, bg];
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        if p[2] <= 0.0 {
            return Err(Error::Inadmissible("negative linewidth".into()));
        }
        Ok(psd
            .omega
            .iter()
            .zip(&psd.values)
            .map(|(w, s)| p[3] + p[0] * shape.eval(w - center - p[1], p[2]) - s)
            .collect())
    };
    let typical = vec![x0[0].abs().max(1e-300), width, width, bg.abs().max(height.abs() * 1e-3).max(1e-300)];
    let lm = levenberg_marquardt(resid, &x0, &LmOptions { typical: Some(typical), ..Default::default() })?;
    let names = ["area", "center", "width", "background"].map(String::from).to_vec();
    let units = ["", RAD_S, RAD_S, ""].map(String::from).to_vec();
    let mut fit = FitResult::from_lm(names, units, &lm);
    fit.values[1] += center;
    Ok(SidebandFit { area: lm.params[0], center: center + lm.params[1], width: lm.params[2], background: lm.params[3], fit })
}

/// Sideband scattering rates `Γ± = 4g²κ/(κ² + 4(Ω ± Δ)²)`.
pub fn gamma_pm(g: f64, kappa: f64, omega_m: f64, detuning: f64) -> (f64, f64) {
    let r = |d: f64| 4.0 * g * g * kappa / (kappa * kappa + 4.0 * d * d);
    (r(omega_m + detuning), r(omega_m - detuning))
}

/// How the anti-Stokes/Stokes rate imbalance `Γ+/Γ−` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SidebandRates {
    Nominal { g: f64, kappa: f64, omega_m: f64, detuning: f64 },
    /// Measured ratio, e.g. from [`rate_ratio_from_hot_reference`].
    Calibrated { ratio: f64 },
}

impl SidebandRates {
    pub fn ratio(&self) -> f64 {
        match *self {
            SidebandRates::Nominal { g, kappa, omega_m, detuning } => {
                let (p, m) = gamma_pm(g, kappa, omega_m, detuning);
                p / m
            }
            SidebandRates::Calibrated { ratio } => ratio,
        }
    }
}

/// `Γ+/Γ−` from sidebands of a hot oscillator (cooling pump off). With
/// `n_hot` unknown the high-occupation limit `n/(n+1) → 1` is used.
pub fn rate_ratio_from_hot_reference(anti_area: f64, stokes_area: f64, n_hot: Option<f64>, n_aux: f64) -> Result<f64> {
    ensure(anti_area > 0.0 && stokes_area > 0.0, || "hot reference areas must be positive".into())?;
    let corr = match n_hot {
        Some(n) => {
            ensure(n > 2.0 * n_aux, || "hot occupation must exceed 2 n_aux".into())?;
            (n + 1.0 + 2.0 * n_aux) / (n - 2.0 * n_aux)
        }
        None => 1.0,
    };
    Ok(anti_area / stokes_area * corr)
}

/// Occupation from sideband areas `A_AS ∝ Γ+(n − 2n_aux)` and
/// `A_S ∝ Γ−(n + 1 + 2n_aux)`.
pub fn occupation_from_areas(anti_area: f64, stokes_area: f64, rate_ratio: f64, n_aux: f64) -> Result<f64> {
    ensure(stokes_area > 0.0 && rate_ratio > 0.0 && n_aux >= 0.0, || "invalid sideband inputs".into())?;
    let r = (anti_area / rate_ratio) / stokes_area;
    if r <= 0.0 {
        return Err(Error::Inadmissible(
            "anti-Stokes area vanishes after correction: occupation below the resolution of the ground state".into(),
        ));
    }
    ensure(r < 1.0, || format!("anti-Stokes/Stokes ratio {r} ≥ 1 after rate correction"))?;
    Ok((r * (1.0 + 2.0 * n_aux) + 2.0 * n_aux) / (1.0 - r))
}

/// Occupation added by the backaction of the readout pump itself:
/// `(Γ−(n_aux + 1) + Γ+ n_aux)/(Γ_m + Γ_opt + Γ+ − Γ−)`.
pub fn backaction_occupation(gamma_plus: f64, gamma_minus: f64, n_aux: f64, gamma_m: f64, gamma_opt: f64) -> f64 {
    (gamma_minus * (n_aux + 1.0) + gamma_plus * n_aux) / (gamma_m + gamma_opt + gamma_plus - gamma_minus)
}

/// Background-subtracted-or-not sideband spectra of one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetryInputs {
    pub stokes: Psd,
    pub anti_stokes: Psd,
    pub rates: SidebandRates,
    pub n_aux: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetryResult {
    pub n_m: f64,
    pub anti_area: f64,
    pub stokes_area: f64,
    pub rate_ratio: f64,
}

/// Individual-oscillator regime: fit one peak per sideband and convert
/// the area ratio into an occupation.
pub fn sideband_asymmetry_individual(inputs: &AsymmetryInputs, shape: Lineshape) -> Result<AsymmetryResult> {
    let anti = fit_sideband(&inputs.anti_stokes, shape)?;
    let stokes = fit_sideband(&inputs.stokes, shape)?;
    let ratio = inputs.rates.ratio();
    let n_m = occupation_from_areas(anti.area, stokes.area, ratio, inputs.n_aux)?;
    Ok(AsymmetryResult { n_m, anti_area: anti.area, stokes_area: stokes.area, rate_ratio: ratio })
}

/// Shared parameters of the hybridized doublet, with frequencies measured
/// as offsets `δ` from each sideband center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongGuess {
    pub g: f64,
    pub kappa: f64,
    pub detuning: f64,
}

/// `(Aδ² + B)/|4g² − 4δ(δ + Δ̃) + 2iδκ|²` without background.
pub fn strong_sideband_shape(delta: f64, g: f64, kappa: f64, detuning: f64, a: f64, b: f64) -> f64 {
    let den = c(4.0 * g * g - 4.0 * delta * (delta + detuning), 2.0 * delta * kappa);
    (a * delta * delta + b) / den.norm_sqr()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongFit {
    pub g: f64,
    pub kappa: f64,
    pub detuning: f64,
    /// `(A, B, BG)` of the anti-Stokes and Stokes sidebands.
    pub anti: [f64; 3],
    pub stokes: [f64; 3],
    pub result: AsymmetryResult,
    pub fit: FitResult,
}

fn doublet_area(g: f64, kappa: f64, detuning: f64, a: f64, b: f64) -> Result<f64> {
    let scale = g.abs().max(kappa).max(detuning.abs());
    let mut breaks: Vec<f64> = [-g.abs(), g.abs(), 0.0].iter().map(|x| x - detuning / 2.0).collect();
    breaks.extend([-4.0 * scale, 4.0 * scale]);
    breaks.sort_by(|x, y| x.total_cmp(y));
    let v = integrate(
        |d, out| out[0] = strong_sideband_shape(d, g, kappa, detuning, a, b),
        1,
        &breaks,
        Some(scale),
        QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 4000 },
    )?;
    Ok(v[0])
}

/// Linear sub-problem: `(A, B, BG)` of one sideband for fixed `g, κ, Δ̃`.
fn linear_amplitudes(psd: &Psd, g: f64, kappa: f64, detuning: f64) -> Result<[f64; 3]> {
    let m = psd.omega.len();
    let mut a = DMatrix::zeros(m, 3);
    let mut y = DVector::zeros(m);
    for (r, (&d, &s)) in psd.omega.iter().zip(&psd.values).enumerate() {
        a[(r, 0)] = strong_sideband_shape(d, g, kappa, detuning, 1.0, 0.0);
        a[(r, 1)] = strong_sideband_shape(d, g, kappa, detuning, 0.0, 1.0);
        a[(r, 2)] = 1.0;
        y[r] = s;
    }
    // column scaling keeps the SVD well conditioned
    let norms: Vec<f64> = (0..3).map(|k| a.column(k).norm().max(1e-300)).collect();
    for k in 0..3 {
        a.column_mut(k).scale_mut(1.0 / norms[k]);
    }
    let sol = a.svd(true, true).solve(&y, 1e-14).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok([sol[0] / norms[0], sol[1] / norms[1], sol[2] / norms[2]])
}

/// Strong-coupling regime: fit both sidebands with shared `{g, κ, Δ̃}`,
/// integrate the fitted doublets and convert the area ratio.
pub fn sideband_asymmetry_strong(inputs: &AsymmetryInputs, guess: &StrongGuess) -> Result<StrongFit> {
    for s in [&inputs.stokes, &inputs.anti_stokes] {
        ensure(s.omega.len() == s.values.len() && s.omega.len() >= 10, || "sideband spectrum too short".into())?;
    }
    let la = linear_amplitudes(&inputs.anti_stokes, guess.g, guess.kappa, guess.detuning)?;
    let ls = linear_amplitudes(&inputs.stokes, guess.g, guess.kappa, guess.detuning)?;
    let x0 = [guess.g, guess.kappa, guess.detuning, la[0], la[1], la[2], ls[0], ls[1], ls[2]];
    let peak = |p: &Psd| p.values.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let (pa, ps) = (peak(&inputs.anti_stokes), peak(&inputs.stokes));
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (psd, off, norm) in [(&inputs.anti_stokes, 3, pa), (&inputs.stokes, 6, ps)] {
            for (d, s) in psd.omega.iter().zip(&psd.values) {
                let m = p[off + 2] + strong_sideband_shape(*d, p[0], p[1], p[2], p[off], p[off + 1]);
                out.push((m - s) / norm);
            }
        }
        Ok(out)
    };
    let k = guess.kappa;
    let typical: Vec<f64> = x0
        .iter()
        .enumerate()
        .map(|(i, v)| match i {
            0..=2 => v.abs().max(k),
            5 => v.abs().max(pa * 1e-3),
            8 => v.abs().max(ps * 1e-3),
            _ => v.abs().max(1e-300),
        })
        .collect();
    let lm = levenberg_marquardt(resid, &x0, &LmOptions { typical: Some(typical), ..Default::default() })?;
    let p = &lm.params;
    let (g, kappa, detuning) = (p[0].abs(), p[1], p[2]);
    ensure(kappa > 0.0, || "fitted cavity linewidth is not positive".into())?;
    if 2.0 * g < kappa / 2.0 {
        return Err(Error::Unidentifiable(format!(
            "doublet unresolved: splitting 2g = {:.4e} below κ/2 = {:.4e}",
            2.0 * g,
            kappa / 2.0
        )));
    }
    let anti_area = doublet_area(g, kappa, detuning, p[3], p[4])?;
    let stokes_area = doublet_area(g, kappa, detuning, p[6], p[7])?;
    let ratio = inputs.rates.ratio();
    let n_m = occupation_from_areas(anti_area, stokes_area, ratio, inputs.n_aux)?;
    let names = ["g", "kappa", "detuning", "a_as", "b_as", "bg_as", "a_s", "b_s", "bg_s"].map(String::from).to_vec();
    let units = [RAD_S, RAD_S, RAD_S, "", "", "", "", "", ""].map(String::from).to_vec();
    let mut fit = FitResult::from_lm(names, units, &lm);
    fit.values[0] = g;
    Ok(StrongFit {
        g,
        kappa,
        detuning,
        anti: [p[3], p[4], p[5]],
        stokes: [p[6], p[7], p[8]],
        result: AsymmetryResult { n_m, anti_area, stokes_area, rate_ratio: ratio },
        fit,
    })
}
