//! Lumped-element model of the six-site microwave ring: normal modes,
//! tight-binding couplings, and feedline-induced mode damping.
//!
//! Mode ordering everywhere is by descending frequency, which for the
//! physical inductance ordering is the ring index sequence `0, +1, -1, +2,
//! -2, 3`: the fully symmetric (auxiliary) mode first and the alternating
//! (primary) mode last.

mod coupler;
mod reconstruct;

pub use coupler::{coupler_cascade_s21, coupler_s21_sweep, CouplerChain};
pub use reconstruct::{reconstruct_split_modes, reconstruction_cost, SplitModeReconstruction};

use crate::error::ensure;
use crate::linalg::{c, CMat, I};
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SITES: usize = 6;

/// Ring index `n` of each mode in output order.
pub const MODE_ORDERS: [i32; SITES] = [0, 1, -1, 2, -2, 3];

pub const AUXILIARY: usize = 0;
pub const PRIMARY: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Drum (vacuum-gap) capacitance per site, F.
    pub drum_capacitance: f64,
    /// Stray capacitance per site, F.
    pub stray_capacitance: f64,
    /// Self inductance per site, H.
    pub self_inductance: f64,
    /// Nearest, next-nearest and opposite-site mutual inductances, H.
    pub mutual: [f64; 3],
    /// Feedline coupling rates of sites 1..4, rad/s. Sites 5 and 6 mirror 3 and 2.
    pub site_rates: [f64; 4],
}

impl CircuitParams {
    pub fn total_capacitance(&self) -> f64 {
        self.drum_capacitance + self.stray_capacitance
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.drum_capacitance > 0.0 && self.stray_capacitance >= 0.0, || {
            "capacitances must be positive".into()
        })?;
        ensure(self.self_inductance > 0.0, || "self inductance must be positive".into())?;
        ensure(self.mutual.iter().all(|m| m.is_finite()), || "mutual inductances must be finite".into())?;
        ensure(self.site_rates.iter().all(|k| *k >= 0.0 && k.is_finite()), || {
            "site rates must be non-negative".into()
        })?;
        for (n, l) in MODE_ORDERS.iter().zip(self.eigen_inductances()) {
            if !(l > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "inductance matrix not positive definite (ring mode {n}: {l:.4e} H)"
                )));
            }
        }
        Ok(())
    }

    /// Circulant inductance matrix (self on the diagonal, `-M_k` off it).
    pub fn inductance_matrix(&self) -> DMatrix<f64> {
        let row = [
            self.self_inductance,
            -self.mutual[0],
            -self.mutual[1],
            -self.mutual[2],
            -self.mutual[1],
            -self.mutual[0],
        ];
        DMatrix::from_fn(SITES, SITES, |i, j| row[(j + SITES - i) % SITES])
    }

    /// Eigenvalues of the inductance matrix in mode order.
    pub fn eigen_inductances(&self) -> [f64; SITES] {
        let l = self.self_inductance;
        let [m1, m2, m3] = self.mutual;
        let sym = l - 2.0 * m1 - 2.0 * m2 - m3;
        let one = l - m1 + m2 + m3;
        let two = l + m1 + m2 - m3;
        let alt = l + 2.0 * m1 - 2.0 * m2 + m3;
        [sym, one, one, two, two, alt]
    }

    pub fn site_rates6(&self) -> [f64; SITES] {
        let k = self.site_rates;
        [k[0], k[1], k[2], k[3], k[2], k[1]]
    }
}

/// Normal modes of the ring with their feedline decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrowaveModeSet {
    /// Angular frequencies, descending.
    pub frequencies: Vec<f64>,
    /// Site amplitudes, one unit-norm column per mode.
    pub modeshapes: CMat,
    /// Energy decay rates into the feedline, rad/s.
    pub rates: Vec<f64>,
}

/// Ideal circulant modeshapes `e^{i n 2π (m-1)/6}/√6`, columns in mode order.
/// The phase is fixed so that site 1 carries a real positive amplitude.
pub fn ideal_modeshapes() -> CMat {
    let norm = 1.0 / (SITES as f64).sqrt();
    CMat::from_fn(SITES, SITES, |site, mode| {
        let n = MODE_ORDERS[mode] as f64;
        Complex64::from_polar(norm, n * 2.0 * PI * site as f64 / SITES as f64)
    })
}

pub fn circuit_eigenmodes(p: &CircuitParams) -> Result<MicrowaveModeSet> {
    p.validate()?;
    let ct = p.total_capacitance();
    let frequencies: Vec<f64> = p.eigen_inductances().iter().map(|l| 1.0 / (ct * l).sqrt()).collect();
    let modeshapes = ideal_modeshapes();
    let rates = nonhermitian_dressing(&modeshapes, &p.site_rates)?;
    Ok(MicrowaveModeSet { frequencies, modeshapes, rates })
}

/// Rank-one dissipative coupling `-(i/2) √(κ_a κ_b)` through the common feedline.
pub fn dissipative_matrix(site_rates: &[f64; 4]) -> CMat {
    let k = [site_rates[0], site_rates[1], site_rates[2], site_rates[3], site_rates[2], site_rates[1]];
    CMat::from_fn(SITES, SITES, |a, b| -0.5 * I * (k[a] * k[b]).sqrt())
}

/// Projection of the dissipative coupling on each modeshape. The returned
/// rate is `-2 Im ⟨u|H_nH|u⟩`, i.e. the energy decay rate of the mode.
pub fn nonhermitian_dressing(modeshapes: &CMat, site_rates: &[f64; 4]) -> Result<Vec<f64>> {
    ensure(modeshapes.nrows() == SITES, || format!("modeshapes must have {SITES} rows"))?;
    ensure(site_rates.iter().all(|k| *k >= 0.0 && k.is_finite()), || "site rates must be non-negative".into())?;
    for (j, col) in modeshapes.column_iter().enumerate() {
        let n = col.norm();
        ensure((n - 1.0).abs() < 1e-9, || format!("modeshape {j} has norm {n}"))?;
    }
    let projected = modeshapes.adjoint() * dissipative_matrix(site_rates) * modeshapes;
    Ok((0..modeshapes.ncols()).map(|k| -2.0 * projected[(k, k)].im).collect())
}

/// Circulant tight-binding parameters: on-site frequency and couplings to
/// the first, second and opposite neighbours (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightBinding {
    pub omega0: f64,
    pub j: [f64; 3],
}

impl TightBinding {
    /// Leading-order expansion in `m_k = M_k / 2L`.
    pub fn first_order(p: &CircuitParams) -> Self {
        let l = p.self_inductance;
        let [m1, m2, m3] = p.mutual.map(|m| m / (2.0 * l));
        let w0 = (1.0 + 30.0 * m1 * m2 * m3) / (l * p.total_capacitance()).sqrt();
        Self {
            omega0: w0,
            j: [
                w0 * (m1 + 3.0 * m1 * m2 + 3.0 * m2 * m3),
                w0 * (m2 + 3.0 * m1 * m3 + 15.0 * m1 * m2 * m3),
                w0 * (m3 + 6.0 * m1 * m2),
            ],
        }
    }

    /// The circulant whose spectrum reproduces the exact normal-mode
    /// frequencies (inverse discrete Fourier transform of the mode ladder).
    pub fn exact(p: &CircuitParams) -> Result<Self> {
        let modes = circuit_eigenmodes(p)?;
        let w = &modes.frequencies;
        // ring index k = 0..5 maps to mode slots 0, 1, 3, 5, 4, 2
        let ladder = [w[0], w[1], w[3], w[5], w[4], w[2]];
        let h = |j: usize| {
            ladder
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * (2.0 * PI * (k * j) as f64 / SITES as f64).cos())
                .sum::<f64>()
                / SITES as f64
        };
        Ok(Self { omega0: h(0), j: [h(1), h(2), h(3)] })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let row = [self.omega0, self.j[0], self.j[1], self.j[2], self.j[1], self.j[0]];
        DMatrix::from_fn(SITES, SITES, |i, k| row[(k + SITES - i) % SITES])
    }

    /// Closed-form mode ladder `ω0 + 2J1 cos(nπ/3) + 2J2 cos(2nπ/3) + J3 cos(nπ)` in mode order.
    pub fn frequencies(&self) -> [f64; SITES] {
        MODE_ORDERS.map(|n| {
            let t = n as f64 * PI / 3.0;
            self.omega0 + 2.0 * self.j[0] * t.cos() + 2.0 * self.j[1] * (2.0 * t).cos() + self.j[2] * (3.0 * t).cos()
        })
    }
}

/// Complex amplitude helper used by serialization.
pub fn split_complex(m: &CMat) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
    let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
    (re, im)
}

pub fn join_complex(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMat> {
    let rows = re.len();
    let cols = re.first().map_or(0, |r| r.len());
    if im.len() != rows || re.iter().chain(im.iter()).any(|r| r.len() != cols) {
        return Err(Error::Dimension("real and imaginary parts differ in shape".into()));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| c(re[i][j], im[i][j])))
}
