use super::{FitResult, RAD_S};
use crate::error::ensure;
use crate::linalg::{c, I};
use crate::optimize::{levenberg_marquardt, LmOptions, LmResult};
use crate::spectra::ComplexTrace;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Reflection of a single resonance seen through a cable delay and a
/// rotated (impedance-mismatched) port:
/// `e^{i(xτ − α)} (1 − 2κ_ex e^{iφ} / (κ_ex + κ_0 + 2i(ω − ω_0)))`,
/// with `x = ω − reference` so that the delay phase stays small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub kappa_ex: f64,
    pub kappa_0: f64,
    pub omega_0: f64,
    pub tau: f64,
    pub alpha: f64,
    pub phi: f64,
    pub reference: f64,
}

impl Resonance {
    pub fn ideal(kappa_ex: f64, kappa_0: f64, omega_0: f64) -> Self {
        Self { kappa_ex, kappa_0, omega_0, tau: 0.0, alpha: 0.0, phi: 0.0, reference: omega_0 }
    }

    pub fn s11(&self, omega: f64) -> Complex64 {
        let env = (I * ((omega - self.reference) * self.tau - self.alpha)).exp();
        let dip = 2.0 * self.kappa_ex * Complex64::from_polar(1.0, self.phi)
            / c(self.kappa_ex + self.kappa_0, 2.0 * (omega - self.omega_0));
        env * (1.0 - dip)
    }

    pub fn regime(&self) -> CouplingRegime {
        let tol = 1e-9 * (self.kappa_ex + self.kappa_0);
        if (self.kappa_ex - self.kappa_0).abs() <= tol {
            CouplingRegime::Critical
        } else if self.kappa_ex > self.kappa_0 {
            CouplingRegime::Overcoupled
        } else {
            CouplingRegime::Undercoupled
        }
    }

    fn params(&self) -> [f64; 6] {
        [self.kappa_ex, self.kappa_0, self.omega_0 - self.reference, self.tau, self.alpha, self.phi]
    }

    // the center is carried as an offset from `reference` during fits
    fn from_params(p: &[f64], reference: f64) -> Self {
        Self { kappa_ex: p[0], kappa_0: p[1], omega_0: reference + p[2], tau: p[3], alpha: p[4], phi: p[5], reference }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingRegime {
    Overcoupled,
    Critical,
    Undercoupled,
}

/// Amplitude background of the feedline:
/// `A/(πγ(1 + ((ω − ω_bg)/γ)²)) + B cos(C x + φ_0) + D`, `x = ω − reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeBackground {
    pub a: f64,
    pub gamma: f64,
    pub omega_bg: f64,
    pub b: f64,
    pub c: f64,
    pub phi0: f64,
    pub d: f64,
    pub reference: f64,
}

impl AmplitudeBackground {
    pub fn flat(level: f64, reference: f64) -> Self {
        Self { a: 0.0, gamma: 1.0, omega_bg: reference, b: 0.0, c: 0.0, phi0: 0.0, d: level, reference }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let u = (omega - self.omega_bg) / self.gamma;
        self.a / (PI * self.gamma * (1.0 + u * u)) + self.b * (self.c * (omega - self.reference) + self.phi0).cos() + self.d
    }

    fn params(&self) -> [f64; 7] {
        [self.a, self.gamma, self.omega_bg - self.reference, self.b, self.c, self.phi0, self.d]
    }

    fn from_params(p: &[f64], reference: f64) -> Self {
        Self { a: p[0], gamma: p[1], omega_bg: reference + p[2], b: p[3], c: p[4], phi0: p[5], d: p[6], reference }
    }
}

/// Complex background of a broad mode: a transmission-type resonance plus
/// a standing-wave ripple, `a e^{i(xτ − α_bg)}/(κ_t + 2i(ω − ω_bg)) + B cos(C x + φ_0) + D`.
/// The delay `τ` is shared with the resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexBackground {
    /// Product `A √(κ_i κ_ext)` of the background resonator.
    pub a: f64,
    pub alpha_bg: f64,
    pub kappa_t: f64,
    pub omega_bg: f64,
    pub b: f64,
    pub c: f64,
    pub phi0: f64,
    pub d: f64,
}

impl ComplexBackground {
    pub fn eval(&self, omega: f64, tau: f64, reference: f64) -> Complex64 {
        let x = omega - reference;
        self.a * (I * (x * tau - self.alpha_bg)).exp() / c(self.kappa_t, 2.0 * (omega - self.omega_bg))
            + self.b * (self.c * x + self.phi0).cos()
            + self.d
    }

    fn params(&self, reference: f64) -> [f64; 8] {
        [self.a, self.alpha_bg, self.kappa_t, self.omega_bg - reference, self.b, self.c, self.phi0, self.d]
    }

    fn from_params(p: &[f64], reference: f64) -> Self {
        Self { a: p[0], alpha_bg: p[1], kappa_t: p[2], omega_bg: reference + p[3], b: p[4], c: p[5], phi0: p[6], d: p[7] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundModel {
    /// Resonance much narrower than the background structure.
    Narrow { background: AmplitudeBackground, resonance: Resonance },
    /// Background and resonance fitted jointly on the complex trace.
    Broad { background: ComplexBackground, resonance: Resonance },
}

#[derive(Debug, Clone)]
pub struct BackgroundRemoval {
    /// Raw trace divided by the fitted background.
    pub normalized: ComplexTrace,
    pub resonance: Resonance,
    pub model: BackgroundModel,
    pub regime: CouplingRegime,
    pub fit: FitResult,
}

fn stack(v: impl Iterator<Item = Complex64>) -> Vec<f64> {
    v.flat_map(|z| [z.re, z.im]).collect()
}

fn typical_of(x: &[f64], floor: &[f64]) -> Vec<f64> {
    x.iter().zip(floor).map(|(v, f)| v.abs().max(*f)).collect()
}

fn check_rates(r: &Resonance) -> Result<()> {
    if r.kappa_ex <= 0.0 || r.kappa_0 < 0.0 {
        return Err(Error::Inadmissible(format!(
            "fit converged to negative decay rates (kappa_ex = {:.4e}, kappa_0 = {:.4e}); Fano interference suspected",
            r.kappa_ex, r.kappa_0
        )));
    }
    Ok(())
}

fn resonance_names() -> Vec<String> {
    ["kappa_ex", "kappa_0", "omega_0", "tau", "alpha", "phi"].map(String::from).to_vec()
}

fn resonance_units() -> Vec<String> {
    [RAD_S, RAD_S, RAD_S, "s", "rad", "rad"].map(String::from).to_vec()
}

/// Complex fit of a background-free reflection trace.
pub fn fit_resonance(trace: &ComplexTrace, guess: &Resonance) -> Result<(Resonance, LmResult)> {
    ensure(trace.omega.len() == trace.values.len() && trace.omega.len() >= 6, || "trace too short".into())?;
    let reference = guess.reference;
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        let r = Resonance::from_params(p, reference);
        Ok(stack(trace.omega.iter().zip(&trace.values).map(|(w, d)| r.s11(*w) - d)))
    };
    let k = guess.kappa_ex + guess.kappa_0;
    let x0 = guess.params();
    let opts = LmOptions { typical: Some(typical_of(&x0, &[k, k, k, 1.0 / k, 1.0, 1.0])), ..Default::default() };
    let lm = levenberg_marquardt(resid, &x0, &opts)?;
    let r = Resonance::from_params(&lm.params, reference);
    check_rates(&r)?;
    Ok((r, lm))
}

/// Seed a resonance from the deepest point of `|S|` and the half-depth width.
pub fn seed_resonance(trace: &ComplexTrace, level: &dyn Fn(f64) -> f64) -> Result<Resonance> {
    let mags: Vec<f64> = trace.omega.iter().zip(&trace.values).map(|(w, s)| s.norm() / level(*w)).collect();
    let kmin = (0..mags.len()).min_by(|&a, &b| mags[a].total_cmp(&mags[b])).ok_or_else(|| {
        Error::InvalidParameter("empty trace".into())
    })?;
    let half = (1.0 + mags[kmin]) / 2.0;
    let mut lo = kmin;
    while lo > 0 && mags[lo] < half {
        lo -= 1;
    }
    let mut hi = kmin;
    while hi + 1 < mags.len() && mags[hi] < half {
        hi += 1;
    }
    let kappa = (trace.omega[hi] - trace.omega[lo]).abs().max(1e-12);
    let omega_0 = trace.omega[kmin];
    // assume overcoupling: |S_min| = (κ_ex − κ_0)/κ
    let depth = mags[kmin].min(0.99);
    let kappa_ex = kappa * (1.0 + depth) / 2.0;
    let s0 = trace.values[kmin];
    let reference = trace.omega.iter().sum::<f64>() / trace.omega.len() as f64;
    let alpha = -(s0 / Complex64::from(1.0 - 2.0 * kappa_ex / kappa)).arg();
    Ok(Resonance { kappa_ex, kappa_0: kappa - kappa_ex, omega_0, tau: 0.0, alpha, phi: 0.0, reference })
}

/// Narrow mode: amplitude-only background (refined jointly with the
/// resonance magnitude), then a complex resonance fit of the
/// background-divided trace.
pub fn remove_background_narrow(
    raw: &ComplexTrace,
    background: &AmplitudeBackground,
    resonance: Option<&Resonance>,
) -> Result<BackgroundRemoval> {
    ensure(raw.omega.len() == raw.values.len() && raw.omega.len() >= 16, || "trace too short".into())?;
    let reference = background.reference;
    let bg_eval = |w: f64| background.eval(w);
    let res0 = match resonance {
        Some(r) => *r,
        None => seed_resonance(raw, &bg_eval)?,
    };
    // joint magnitude fit: |S| = bg(ω) |S11(ω)| (delay and port phase drop out)
    let mag: Vec<f64> = raw.values.iter().map(|s| s.norm()).collect();
    let mut x0 = background.params().to_vec();
    x0.extend([res0.kappa_ex, res0.kappa_0, res0.omega_0 - reference, res0.phi]);
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        let bg = AmplitudeBackground::from_params(&p[..7], reference);
        let r = Resonance { kappa_ex: p[7], kappa_0: p[8], omega_0: reference + p[9], phi: p[10], ..Resonance::ideal(0.0, 0.0, 0.0) };
        Ok(raw.omega.iter().zip(&mag).map(|(w, m)| bg.eval(*w) * r.s11(*w).norm() - m).collect())
    };
    let k = res0.kappa_ex + res0.kappa_0;
    let span = raw.omega.last().unwrap_or(&1.0) - raw.omega[0];
    let floor = [1e-3 * span, span.abs() / 100.0, span.abs(), 1e-3, 1.0 / span.abs(), 1.0, 1e-3, k, k, k, 1.0];
    let opts = LmOptions { typical: Some(typical_of(&x0, &floor)), ..Default::default() };
    let stage1 = levenberg_marquardt(resid, &x0, &opts)?;
    let bg = AmplitudeBackground::from_params(&stage1.params[..7], reference);
    ensure(raw.omega.iter().all(|w| bg.eval(*w) > 0.0), || "fitted background amplitude crosses zero".into())?;
    let normalized = ComplexTrace {
        omega: raw.omega.clone(),
        values: raw.omega.iter().zip(&raw.values).map(|(w, s)| s / bg.eval(*w)).collect(),
    };
    let p = &stage1.params;
    let seed = Resonance { kappa_ex: p[7], kappa_0: p[8], omega_0: reference + p[9], phi: p[10], reference, ..res0 };
    check_rates(&seed)?;
    let (res, lm) = fit_resonance(&normalized, &seed)?;
    let mut fit = FitResult::from_lm(resonance_names(), resonance_units(), &lm);
    fit.values[2] = res.omega_0;
    Ok(BackgroundRemoval {
        normalized,
        resonance: res,
        regime: res.regime(),
        model: BackgroundModel::Narrow { background: bg, resonance: res },
        fit,
    })
}

/// Broad mode: complex background and resonance fitted jointly.
pub fn remove_background_broad(
    raw: &ComplexTrace,
    background: &ComplexBackground,
    resonance: &Resonance,
) -> Result<BackgroundRemoval> {
    ensure(raw.omega.len() == raw.values.len() && raw.omega.len() >= 28, || "trace too short".into())?;
    let reference = resonance.reference;
    let model = |p: &[f64], w: f64| -> Complex64 {
        let bg = ComplexBackground::from_params(&p[..8], reference);
        let r = Resonance::from_params(&p[8..], reference);
        bg.eval(w, r.tau, reference) * r.s11(w)
    };
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(stack(raw.omega.iter().zip(&raw.values).map(|(w, d)| model(p, *w) - d)))
    };
    let mut x0 = background.params(reference).to_vec();
    x0.extend(resonance.params());
    let k = resonance.kappa_ex + resonance.kappa_0;
    let span = (raw.omega.last().unwrap_or(&1.0) - raw.omega[0]).abs();
    let floor = [1e-3, 1.0, span / 10.0, span, 1e-3, 1.0 / span, 1.0, 1e-3, k, k, k, 1.0 / k, 1.0, 1.0];
    let opts = LmOptions { typical: Some(typical_of(&x0, &floor)), ..Default::default() };
    let lm = levenberg_marquardt(resid, &x0, &opts)?;
    let bg = ComplexBackground::from_params(&lm.params[..8], reference);
    let res = Resonance::from_params(&lm.params[8..], reference);
    check_rates(&res)?;
    let normalized = ComplexTrace {
        omega: raw.omega.clone(),
        values: raw.omega.iter().zip(&raw.values).map(|(w, s)| s / bg.eval(*w, res.tau, reference)).collect(),
    };
    let mut names: Vec<String> =
        ["bg_a", "bg_alpha", "bg_kappa_t", "bg_omega", "bg_b", "bg_c", "bg_phi0", "bg_d"].map(String::from).to_vec();
    names.extend(resonance_names());
    let mut units: Vec<String> = ["", "rad", RAD_S, RAD_S, "", "s", "rad", ""].map(String::from).to_vec();
    units.extend(resonance_units());
    let mut fit = FitResult::from_lm(names, units, &lm);
    fit.values[3] = bg.omega_bg;
    fit.values[10] = res.omega_0;
    Ok(BackgroundRemoval {
        normalized,
        resonance: res,
        regime: res.regime(),
        model: BackgroundModel::Broad { background: bg, resonance: res },
        fit,
    })
}
