use super::{check_baths, correlator_at, port_weights};
use crate::dynamics::{collective_eigenmodes, Baths, System};
use crate::linalg::{self, CMat, CVec};
use crate::quad::{integrate, trapezoid, QuadOptions};
use crate::{Error, Result};
use log::warn;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Half-width of the integration window around each resonance, in linewidths.
pub const WINDOW_LINEWIDTHS: f64 = 20.0;

/// Correlator matrices `S_{b_i† b_j}(ω)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct CorrelatorSpectra {
    pub omega: Vec<f64>,
    pub values: Vec<CMat>,
}

/// Resonances `(center, linewidth)` of the collective modes.
fn resonances(sys: &System) -> Result<Vec<(f64, f64)>> {
    let modes = collective_eigenmodes(sys)?;
    Ok(modes.modes.iter().map(|m| (m.frequency, m.linewidth)).collect())
}

/// Hermitian part, warning if the anti-Hermitian residue is not negligible.
fn hermitize(m: CMat) -> CMat {
    let h = (&m + m.adjoint()) * Complex64::from(0.5);
    let resid = (&m - &h).norm();
    if resid > 1e-6 * h.norm().max(1e-300) {
        warn!("covariance anti-Hermitian residue {resid:.3e} removed");
    }
    h
}

/// `⟨b_i† b_j⟩ = ∫ S_{b_i† b_j}(ω) dω/2π` by adaptive quadrature over the
/// whole real line, with break points at ±20 linewidths around every
/// collective resonance.
pub fn covariance_matrix(sys: &System, baths: &Baths) -> Result<CMat> {
    check_baths(sys, baths)?;
    let n = sys.n();
    let res = resonances(sys)?;
    let mut breaks: Vec<f64> = Vec::new();
    for &(w, g) in &res {
        let half = WINDOW_LINEWIDTHS * g;
        breaks.extend([w - half, w - 0.5 * g, w, w + 0.5 * g, w + half]);
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let tail = res.iter().map(|r| r.1).fold(0.0, f64::max);
    let weights = port_weights(sys, baths, false);
    let flat = integrate(
        |w, out| {
            let mut m = CMat::zeros(n, n);
            correlator_at(sys, &weights, w, &mut m);
            for i in 0..n {
                for j in 0..n {
                    out[2 * (i * n + j)] = m[(i, j)].re;
                    out[2 * (i * n + j) + 1] = m[(i, j)].im;
                }
            }
        },
        2 * n * n,
        &breaks,
        Some(tail),
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 200_000 },
    )?;
    let cov = CMat::from_fn(n, n, |i, j| {
        Complex64::new(flat[2 * (i * n + j)], flat[2 * (i * n + j) + 1]) / (2.0 * PI)
    });
    Ok(hermitize(cov))
}

/// Trapezoidal covariance from sampled spectra. Every resonance must be
/// covered by the grid to ±20 linewidths.
pub fn covariance_from_spectra(spectra: &CorrelatorSpectra, resonances: &[(f64, f64)]) -> Result<CMat> {
    let (lo, hi) = match (spectra.omega.first(), spectra.omega.last()) {
        (Some(a), Some(b)) if spectra.omega.len() >= 2 => (*a, *b),
        _ => return Err(Error::IntegrationDomain("need at least two samples".into())),
    };
    if spectra.omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::IntegrationDomain("grid must be strictly increasing".into()));
    }
    for &(w, g) in resonances {
        let half = WINDOW_LINEWIDTHS * g;
        if w - half < lo || w + half > hi {
            return Err(Error::IntegrationDomain(format!(
                "grid [{lo:.6e}, {hi:.6e}] does not cover resonance {w:.6e} ± {half:.3e}"
            )));
        }
    }
    let n = spectra.values[0].nrows();
    let cov = CMat::from_fn(n, n, |i, j| {
        let re: Vec<f64> = spectra.values.iter().map(|m| m[(i, j)].re).collect();
        let im: Vec<f64> = spectra.values.iter().map(|m| m[(i, j)].im).collect();
        Complex64::new(trapezoid(&spectra.omega, &re), trapezoid(&spectra.omega, &im)) / (2.0 * PI)
    });
    Ok(hermitize(cov))
}

/// Grid made of the union of per-resonance windows, each sampled with
/// `per_window` points concentrated near the line centre (tangent map).
pub fn default_grid(sys: &System, per_window: usize) -> Result<Vec<f64>> {
    let res = resonances(sys)?;
    let theta_max = (2.0 * WINDOW_LINEWIDTHS).atan();
    let mut grid = Vec::with_capacity(res.len() * per_window);
    for &(w, g) in &res {
        for k in 0..per_window {
            let t = -theta_max + 2.0 * theta_max * k as f64 / (per_window - 1) as f64;
            grid.push(w + 0.5 * g * t.tan());
        }
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(grid)
}

/// Eigen-decomposition of a covariance matrix: occupations ascending (the
/// first entry is the bright, most strongly cooled, collective mode).
#[derive(Debug, Clone)]
pub struct Occupations {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMat,
}

impl Occupations {
    pub fn bright(&self) -> f64 {
        self.values[0]
    }

    pub fn vector(&self, k: usize) -> CVec {
        self.vectors.column(k).into_owned()
    }

    /// `|⟨ideal|v_k⟩|²` for each supplied ideal shape, paired in order.
    pub fn fidelities(&self, ideal: &[CVec]) -> Vec<f64> {
        ideal.iter().enumerate().map(|(k, v)| linalg::inner(v, &self.vector(k)).norm_sqr() / v.norm_squared()).collect()
    }

    /// Largest fidelity of any eigenvector with `ideal`, and its index.
    pub fn best_match(&self, ideal: &CVec) -> (usize, f64) {
        (0..self.values.len())
            .map(|k| (k, linalg::inner(ideal, &self.vector(k)).norm_sqr() / ideal.norm_squared()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

pub fn collective_occupations(cov: &CMat) -> Result<Occupations> {
    if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let (mut values, vectors) = linalg::hermitian_eig(cov);
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-9 {
                warn!("negative occupation {v:.3e} clamped to zero");
            }
            *v = 0.0;
        }
    }
    Ok(Occupations { values, vectors })
}
