//! Linearized multimode optomechanics: the dynamical matrix, its collective
//! eigenmodes, probe reflection (OMIT) and coupling metrics.
//!
//! The dynamical matrix acts on `(a, b_1, …, b_N)` in the pump frame:
//! `M00 = -iΔ - κ/2`, `M0i = Mi0 = -i g_i`, `Mii = -iΩ_i - Γ_i/2`.
//! An eigenvalue `λ` describes a mode with linewidth `-2 Re λ` and
//! frequency `-Im λ`.

mod modeshape;
mod omit;
mod system;

pub use modeshape::ModeShape;
pub use omit::{omit_reflection, omit_reflection_collective};
pub use system::{Baths, Cavity, DeviceParams, Oscillator, System};

use crate::error::ensure;
use crate::linalg::{self, c, CMat, CVec, I};
use crate::{Error, Result};
use num_complex::Complex64;

/// Eigenvector matrices with `1/cond` below this are treated as defective.
pub const DEFECTIVE_TOL: f64 = 1e-8;

pub fn dynamical_matrix(sys: &System) -> Result<CMat> {
    shifted_matrix(sys, 0.0)
}

/// `M + i ω_ref I`, i.e. the dynamical matrix in a frame rotating at `ω_ref`
/// relative to the pump. Diagonalizing here keeps the entries comparable.
pub fn shifted_matrix(sys: &System, omega_ref: f64) -> Result<CMat> {
    sys.validate()?;
    let n = sys.n();
    let mut m = CMat::zeros(n + 1, n + 1);
    m[(0, 0)] = c(-sys.kappa() / 2.0, -(sys.detuning - omega_ref));
    for i in 0..n {
        m[(i + 1, i + 1)] = c(-sys.gamma[i] / 2.0, -(sys.omega[i] - omega_ref));
        m[(0, i + 1)] = -I * sys.g[i];
        m[(i + 1, 0)] = -I * sys.g[i];
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct CollectiveMode {
    /// Eigenvalue in the pump frame.
    pub eigenvalue: Complex64,
    /// Eigenvalue in the frame shifted by [`Eigenmodes::shift`].
    pub shifted: Complex64,
    pub linewidth: f64,
    pub frequency: f64,
    /// Unit-norm eigenvector over `(a, b_1, …, b_N)`.
    pub vector: CVec,
    /// |cavity component|².
    pub cavity_weight: f64,
    /// Normalized mechanical part, if non-vanishing.
    pub shape: Option<ModeShape>,
}

impl CollectiveMode {
    /// Normalized mechanical sub-vector ψ.
    pub fn mechanical(&self) -> Option<CVec> {
        let n = self.vector.len() - 1;
        let v = self.vector.rows(1, n).into_owned();
        let norm = v.norm();
        (norm > 1e-12).then(|| v / Complex64::from(norm))
    }
}

#[derive(Debug, Clone)]
pub struct Eigenmodes {
    /// Sorted by linewidth descending, ties by frequency ascending.
    pub modes: Vec<CollectiveMode>,
    /// Condition number of the eigenvector matrix.
    pub condition: f64,
    /// Reference frequency used for the diagonalization.
    pub shift: f64,
}

impl Eigenmodes {
    /// Eigenvector matrix `S` (columns in mode order) and eigenvalues.
    pub fn basis(&self) -> (CMat, Vec<Complex64>) {
        let n = self.modes.len();
        let mut s = CMat::zeros(n, n);
        for (k, m) in self.modes.iter().enumerate() {
            s.set_column(k, &m.vector);
        }
        (s, self.modes.iter().map(|m| m.eigenvalue).collect())
    }

    pub fn is_defective(&self) -> bool {
        !(1.0 / self.condition > DEFECTIVE_TOL)
    }

    /// Index of the mode with the largest cavity weight.
    pub fn cavity_like(&self) -> usize {
        argmax(self.modes.iter().map(|m| m.cavity_weight))
    }

    /// The "bright" collective mode: among all modes except the most
    /// cavity-like one, the one whose mechanical part overlaps most with
    /// the coupling vector `g`.
    pub fn bright(&self, g: &[f64]) -> usize {
        let cav = self.cavity_like();
        let gv = CVec::from_iterator(g.len(), g.iter().map(|&x| c(x, 0.0)));
        let score = self.modes.iter().enumerate().map(|(k, m)| {
            if k == cav {
                -1.0
            } else {
                m.mechanical().map_or(0.0, |psi| linalg::inner(&psi, &gv).norm())
            }
        });
        argmax(score)
    }

    /// Broadest linewidth among the mechanically dominated modes.
    pub fn broadest_mechanical(&self) -> usize {
        let cav = self.cavity_like();
        argmax(self.modes.iter().enumerate().map(|(k, m)| if k == cav { f64::NEG_INFINITY } else { m.linewidth }))
    }
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in it.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

pub fn collective_eigenmodes(sys: &System) -> Result<Eigenmodes> {
    let shift = sys.reference_frequency();
    let m = shifted_matrix(sys, shift)?;
    let e = linalg::eig(&m)?;
    let n = sys.n();
    let mut modes: Vec<CollectiveMode> = (0..=n)
        .map(|k| {
            let eigenvalue = e.values[k] - I * shift;
            let vector = e.vectors.column(k).into_owned();
            let cavity_weight = vector[0].norm_sqr();
            let mech: Vec<Complex64> = vector.iter().skip(1).cloned().collect();
            let shape = ModeShape::from_amplitudes(&mech).ok();
            CollectiveMode {
                eigenvalue,
                shifted: e.values[k],
                linewidth: -2.0 * eigenvalue.re,
                frequency: -eigenvalue.im,
                vector,
                cavity_weight,
                shape,
            }
        })
        .collect();
    let scale = m.norm();
    modes.sort_by(|a, b| {
        if (a.linewidth - b.linewidth).abs() <= 1e-12 * scale {
            a.frequency.total_cmp(&b.frequency)
        } else {
            b.linewidth.total_cmp(&a.linewidth)
        }
    });
    Ok(Eigenmodes { modes, condition: e.condition, shift })
}

/// Collective coupling of a mechanical mode shape ψ to the cavity:
/// `g_col = |⟨ψ|g⟩|` and the enhancement `ξ = g_col² / ⟨g_i²⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingMetrics {
    pub g_col: f64,
    pub xi: f64,
}

pub fn collective_coupling(psi: &CVec, g: &[f64]) -> Result<CouplingMetrics> {
    if psi.len() != g.len() {
        return Err(Error::Dimension(format!("shape of length {} vs {} couplings", psi.len(), g.len())));
    }
    ensure((psi.norm() - 1.0).abs() < 1e-9, || format!("mode shape not normalized (norm {})", psi.norm()))?;
    let mean_sq = g.iter().map(|x| x * x).sum::<f64>() / g.len() as f64;
    ensure(mean_sq > 0.0, || "all couplings vanish".into())?;
    let g_col = psi.iter().zip(g).map(|(p, x)| p.conj() * *x).sum::<Complex64>().norm();
    Ok(CouplingMetrics { g_col, xi: g_col * g_col / mean_sq })
}

/// Photon numbers at which the collective coupling reaches the frequency
/// spread (`n_p1`) and the cavity linewidth (`n_p2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    pub collective: f64,
    pub strong: f64,
    /// Whether the collective regime is entered before strong coupling (σ < κ).
    pub collective_first: bool,
}

pub fn regime_thresholds(kappa: f64, sigma: f64, mean_g0_sq: f64, n: usize) -> Result<RegimeThresholds> {
    ensure(kappa > 0.0 && sigma >= 0.0, || "κ must be positive and σ non-negative".into())?;
    ensure(mean_g0_sq > 0.0 && n > 0, || "couplings and oscillator count must be positive".into())?;
    let denom = 4.0 * mean_g0_sq * n as f64;
    Ok(RegimeThresholds { collective: kappa * sigma / denom, strong: kappa * kappa / denom, collective_first: sigma < kappa })
}
