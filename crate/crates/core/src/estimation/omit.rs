use super::{indexed, FitResult, RAD_S};
use crate::dynamics::{omit_reflection, System};
use crate::error::ensure;
use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::spectra::ComplexTrace;
use crate::{Error, Result};
use num_complex::Complex64;

/// Known quantities of an OMIT fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OmitFixed {
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kappa_ex: f64,
}

/// Starting point `(g_i, κ, Δ)`; `None` entries are seeded from the trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OmitGuess {
    pub g: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub detuning: Option<f64>,
}

fn system(fixed: &OmitFixed, p: &[f64]) -> System {
    let n = fixed.omega.len();
    System {
        detuning: p[n + 1],
        kappa_ex: fixed.kappa_ex,
        kappa_0: p[n] - fixed.kappa_ex,
        omega: fixed.omega.clone(),
        gamma: fixed.gamma.clone(),
        g: p[..n].iter().map(|g| g.abs()).collect(),
    }
}

/// Seed from the trace: κ from the deepest excursion of `1 - S11` and each
/// `g_i` from the transparency depth, `κ_ex/(1 - S11(Ω_i)) - χ_c⁻¹ ≈ 2 g_i²/Γ_i`.
fn seed(trace: &ComplexTrace, fixed: &OmitFixed, guess: &OmitGuess) -> Result<Vec<f64>> {
    let n = fixed.omega.len();
    let depth = trace.values.iter().map(|s| (1.0 - s).norm()).fold(0.0, f64::max);
    ensure(depth > 0.0, || "trace shows no cavity response".into())?;
    let kappa = guess.kappa.unwrap_or((2.0 * fixed.kappa_ex / depth).max(fixed.kappa_ex * 1.0001));
    let detuning = guess.detuning.unwrap_or(fixed.omega.iter().sum::<f64>() / n as f64);
    let g = match &guess.g {
        Some(g) => g.clone(),
        None => (0..n)
            .map(|i| {
                let k = nearest(&trace.omega, fixed.omega[i]);
                let inv_chi_c = Complex64::new(kappa / 2.0, -(trace.omega[k] - detuning));
                let y = fixed.kappa_ex / (1.0 - trace.values[k]) - inv_chi_c;
                (fixed.gamma[i] * y.re.max(0.0) / 2.0).sqrt().max(fixed.gamma[i])
            })
            .collect(),
    };
    let mut x = g;
    x.push(kappa);
    x.push(detuning);
    Ok(x)
}

fn nearest(grid: &[f64], w: f64) -> usize {
    (0..grid.len()).min_by(|&a, &b| (grid[a] - w).abs().total_cmp(&(grid[b] - w).abs())).unwrap_or(0)
}

/// Fit the multimode reflection with `g_i`, `κ` and `Δ` free. Frequencies
/// of the trace are probe offsets from the pump (rad/s).
pub fn fit_omit(trace: &ComplexTrace, fixed: &OmitFixed, guess: &OmitGuess) -> Result<FitResult> {
    let n = fixed.omega.len();
    ensure(n > 0 && fixed.gamma.len() == n, || "one damping rate per oscillator required".into())?;
    ensure(trace.omega.len() == trace.values.len(), || "trace length mismatch".into())?;
    ensure(trace.omega.len() >= n + 2, || "trace shorter than the parameter count".into())?;
    let lo = trace.omega.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = trace.omega.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ensure(fixed.omega.iter().all(|w| *w > lo && *w < hi), || {
        "trace does not cover every transparency window".into()
    })?;
    let x0 = seed(trace, fixed, guess)?;
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        if p[n] <= fixed.kappa_ex {
            return Err(Error::Inadmissible("kappa below kappa_ex".into()));
        }
        let s = omit_reflection(&system(fixed, p), &trace.omega)?;
        Ok(s.iter().zip(&trace.values).flat_map(|(m, d)| [(m - d).re, (m - d).im]).collect())
    };
    let mut typical: Vec<f64> = x0[..n].iter().map(|g| g.abs().max(1.0)).collect();
    typical.push(x0[n]);
    typical.push(x0[n]);
    let opts = LmOptions { typical: Some(typical), ..LmOptions::default() };
    let lm = levenberg_marquardt(resid, &x0, &opts)?;
    let mut names = indexed("g", n);
    names.push("kappa".into());
    names.push("detuning".into());
    let mut res = FitResult::from_lm(names, vec![RAD_S.to_string(); n + 2], &lm);
    for k in 0..n {
        res.values[k] = res.values[k].abs();
        if res.values[k] < 1e-3 * res.values[n] * 1e-3 {
            log::warn!("g_{} converged to the lower bound", k + 1);
        }
    }
    Ok(res)
}

/// System reconstructed from an OMIT fit.
pub fn omit_system(fit: &FitResult, fixed: &OmitFixed) -> System {
    system(fixed, &fit.values)
}
