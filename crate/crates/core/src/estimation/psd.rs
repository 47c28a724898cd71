use super::{indexed, FitResult, RAD_S};
use crate::dynamics::{Baths, System};
use crate::error::ensure;
use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::spectra::{collective_occupations, covariance_matrix, output_psd, response, Psd};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Known quantities of a noise-spectrum fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFixed {
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kappa_ex: f64,
}

/// Starting point; typically taken from an OMIT fit at the same pump power.
/// Missing decoherence rates and cavity occupation are solved for linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdGuess {
    pub g: Vec<f64>,
    pub kappa: f64,
    pub detuning: f64,
    pub decoherence: Option<Vec<f64>>,
    pub cavity_bath: Option<f64>,
}

// parameter layout: [Γ_th (n), g (n), κ, Δ, n_c]
fn unpack(fixed: &PsdFixed, kappa_ex: f64, p: &[f64]) -> (System, Baths) {
    let n = fixed.omega.len();
    let sys = System {
        detuning: p[2 * n + 1],
        kappa_ex,
        kappa_0: p[2 * n] - kappa_ex,
        omega: fixed.omega.clone(),
        gamma: fixed.gamma.clone(),
        g: p[n..2 * n].iter().map(|g| g.abs()).collect(),
    };
    let baths = Baths {
        cavity: p[2 * n + 2].abs(),
        mechanics: (0..n).map(|i| p[i].abs() / fixed.gamma[i]).collect(),
    };
    (sys, baths)
}

/// Occupations `(n_c, n_1..n_N)` minimizing the residual for fixed
/// couplings, using the linearity of the spectrum in the bath occupations.
fn linear_baths(sys: &System, psd: &Psd) -> Result<Vec<f64>> {
    let n = sys.n();
    let m = psd.omega.len();
    let mut a = DMatrix::zeros(m, n + 1);
    let mut y = DVector::zeros(m);
    for (r, (&w, &s)) in psd.omega.iter().zip(&psd.values).enumerate() {
        let resp = response(sys, w);
        let d2 = resp.d.norm_sqr();
        let scale = 1.0 / s.abs().max(1e-300);
        a[(r, 0)] = sys.kappa_ex * sys.kappa_0 / d2 * scale;
        for i in 0..n {
            a[(r, i + 1)] = sys.kappa_ex * sys.gamma[i] * sys.g[i] * sys.g[i] * resp.chi[i].norm_sqr() / d2 * scale;
        }
        y[r] = (s - 0.5) * scale;
    }
    let sol = a.svd(true, true).solve(&y, 1e-12).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(sol.iter().map(|v| v.max(0.0)).collect())
}

fn names(n: usize) -> (Vec<String>, Vec<String>) {
    let mut names = indexed("gamma_th", n);
    names.extend(indexed("g", n));
    names.extend(["kappa", "detuning", "n_c"].map(String::from));
    let mut units = vec![RAD_S.to_string(); 2 * n + 2];
    units.push("quanta".into());
    (names, units)
}

fn fit_psd_with(psd: &Psd, fixed: &PsdFixed, kappa_ex: f64, guess: &PsdGuess) -> Result<FitResult> {
    let n = fixed.omega.len();
    ensure(n > 0 && fixed.gamma.len() == n && guess.g.len() == n, || "inconsistent oscillator count".into())?;
    ensure(psd.omega.len() == psd.values.len() && psd.omega.len() > 2 * n + 3, || {
        "spectrum shorter than the parameter count".into()
    })?;
    ensure(guess.kappa > kappa_ex, || "kappa guess must exceed kappa_ex".into())?;
    let start = System {
        detuning: guess.detuning,
        kappa_ex,
        kappa_0: guess.kappa - kappa_ex,
        omega: fixed.omega.clone(),
        gamma: fixed.gamma.clone(),
        g: guess.g.clone(),
    };
    let lin = linear_baths(&start, psd)?;
    let mut x0: Vec<f64> = match &guess.decoherence {
        Some(d) => d.clone(),
        None => (0..n).map(|i| (lin[i + 1] * fixed.gamma[i]).max(fixed.gamma[i])).collect(),
    };
    x0.extend(&guess.g);
    x0.extend([guess.kappa, guess.detuning, guess.cavity_bath.unwrap_or(lin[0])]);
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        if p[2 * n] <= kappa_ex {
            return Err(Error::Inadmissible("kappa below kappa_ex".into()));
        }
        let (sys, baths) = unpack(fixed, kappa_ex, p);
        let model = output_psd(&sys, &baths, &psd.omega)?;
        Ok(model.values.iter().zip(&psd.values).map(|(m, d)| (m - d) / d.abs().max(1e-300)).collect())
    };
    let mut typical: Vec<f64> = x0.iter().map(|v| v.abs().max(1e-12)).collect();
    typical[2 * n + 1] = guess.kappa;
    typical[2 * n + 2] = x0[2 * n + 2].abs().max(1e-3);
    let opts = LmOptions { typical: Some(typical), ..LmOptions::default() };
    let lm = levenberg_marquardt(resid, &x0, &opts)?;
    let (names, units) = names(n);
    let mut res = FitResult::from_lm(names, units, &lm);
    for k in (0..2 * n).chain([2 * n + 2]) {
        res.values[k] = res.values[k].abs();
    }
    Ok(res)
}

/// Fit a calibrated (symmetrized, vacuum = 1/2) output spectrum with the
/// decoherence rates `Γ_th,i = n_th,i Γ_m,i`, couplings, `κ`, `Δ` and the
/// cavity bath occupation free.
pub fn fit_psd(psd: &Psd, fixed: &PsdFixed, guess: &PsdGuess) -> Result<FitResult> {
    fit_psd_with(psd, fixed, fixed.kappa_ex, guess)
}

/// System and baths described by a [`fit_psd`] result.
pub fn psd_system(fit: &FitResult, fixed: &PsdFixed) -> (System, Baths) {
    unpack(fixed, fixed.kappa_ex, &fit.values)
}

/// Uncertain inputs of the Monte Carlo propagation (one-sigma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdPriors {
    /// Relative uncertainty of `κ_ex` (0.1 for 10%).
    pub kappa_ex_rel: f64,
    /// Added noise of the chain referred to the device, and its uncertainty.
    pub n_add: f64,
    pub n_add_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloOptions {
    pub n_rep: usize,
    pub seed: u64,
    /// Also evaluate collective-mode occupations for every draw.
    pub occupations: bool,
    /// Background level `G (1 + n_add)` of the detected spectrum; estimated
    /// from the outer 5% of the trace on each side when absent.
    pub background: Option<f64>,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self { n_rep: 200, seed: 1, occupations: false, background: None }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloFit {
    /// Mean parameters with the spread over draws as errors.
    pub fit: FitResult,
    /// Standard error of each mean, `std/√N_ok`.
    pub sem: Vec<f64>,
    /// Collective occupations (ascending) per successful draw.
    pub occupations: Vec<Vec<f64>>,
    pub occupation_mean: Vec<f64>,
    pub occupation_std: Vec<f64>,
    pub failures: usize,
    pub draws: Vec<FitResult>,
}

fn edge_level(psd: &Psd) -> f64 {
    let m = psd.values.len();
    let k = (m / 20).max(1);
    let edge: Vec<f64> = psd.values[..k].iter().chain(&psd.values[m - k..]).cloned().collect();
    edge.iter().sum::<f64>() / edge.len() as f64
}

fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.first().map_or(0, Vec::len);
    let count = rows.len() as f64;
    let mean: Vec<f64> = (0..n).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / count).collect();
    let std = (0..n)
        .map(|k| {
            let v = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
            v.sqrt()
        })
        .collect();
    (mean, std)
}

/// Propagate the `κ_ex` and added-noise uncertainties into the fitted
/// parameters: every draw samples the uncertain inputs, recalibrates the
/// detected spectrum `G (S̄ + 1/2 + n_add)` with `G = background/(1 + n_add)`
/// and refits it.
pub fn fit_psd_montecarlo(
    detected: &Psd,
    fixed: &PsdFixed,
    guess: &PsdGuess,
    priors: &PsdPriors,
    opts: &MonteCarloOptions,
) -> Result<MonteCarloFit> {
    ensure(opts.n_rep >= 1, || "n_rep must be positive".into())?;
    ensure(priors.kappa_ex_rel >= 0.0 && priors.n_add_std >= 0.0 && priors.n_add >= 0.0, || {
        "prior widths must be non-negative".into()
    })?;
    let background = opts.background.unwrap_or_else(|| edge_level(detected));
    ensure(background > 0.0, || "detected background must be positive".into())?;
    let outcomes: Vec<Result<(FitResult, Vec<f64>)>> = (0..opts.n_rep)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(draw as u64);
            let zk: f64 = rng.sample(StandardNormal);
            let kappa_ex = fixed.kappa_ex * (1.0 + priors.kappa_ex_rel * zk);
            let n_add = loop {
                let z: f64 = rng.sample(StandardNormal);
                let v = priors.n_add + priors.n_add_std * z;
                if v >= 0.0 {
                    break v;
                }
            };
            ensure(kappa_ex > 0.0 && kappa_ex < guess.kappa, || "drawn kappa_ex outside (0, kappa)".into())?;
            let gain = background / (1.0 + n_add);
            let calibrated = Psd {
                omega: detected.omega.clone(),
                values: detected.values.iter().map(|s| s / gain - 0.5 - n_add).collect(),
            };
            let fit = fit_psd_with(&calibrated, fixed, kappa_ex, guess)?;
            let occ = if opts.occupations {
                let (sys, baths) = unpack(fixed, kappa_ex, &fit.values);
                collective_occupations(&covariance_matrix(&sys, &baths)?)?.values
            } else {
                Vec::new()
            };
            Ok((fit, occ))
        })
        .collect();
    let mut draws = Vec::new();
    let mut occupations = Vec::new();
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok((f, occ)) => {
                draws.push(f);
                occupations.push(occ);
            }
            Err(e) => {
                log::debug!("Monte Carlo draw failed: {e}");
                failures += 1;
            }
        }
    }
    if draws.is_empty() {
        return Err(Error::NonConvergence(format!("all {} Monte Carlo draws failed", opts.n_rep)));
    }
    if failures * 10 > opts.n_rep {
        log::warn!("{failures} of {} Monte Carlo draws failed to converge", opts.n_rep);
    }
    let rows: Vec<Vec<f64>> = draws.iter().map(|d| d.values.clone()).collect();
    let (mean, std) = mean_std(&rows);
    let ok = draws.len() as f64;
    let sem = std.iter().map(|s| s / ok.sqrt()).collect();
    let (occupation_mean, occupation_std) = if opts.occupations { mean_std(&occupations) } else { (vec![], vec![]) };
    let first = &draws[0];
    let n = mean.len();
    let mut cov = vec![vec![0.0; n]; n];
    for r in &rows {
        for i in 0..n {
            for j in 0..n {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (ok - 1.0).max(1.0);
            }
        }
    }
    let fit = FitResult {
        names: first.names.clone(),
        units: first.units.clone(),
        values: mean,
        errors: std,
        covariance: cov,
        residual: draws.iter().map(|d| d.residual).sum::<f64>() / ok,
        converged: failures * 10 <= opts.n_rep,
        samples: Some(draws.len()),
        seed: Some(opts.seed),
    };
    Ok(MonteCarloFit { fit, sem, occupations, occupation_mean, occupation_std, failures, draws })
}
