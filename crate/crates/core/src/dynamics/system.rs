use crate::error::ensure;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One mechanical drum mode (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub frequency: f64,
    /// Intrinsic energy damping rate Γ_m.
    pub damping: f64,
    /// Single-photon coupling to the primary cavity.
    pub g0: f64,
    /// Thermal bath occupation.
    pub n_th: f64,
}

/// A microwave cavity mode with its external and internal loss rates (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cavity {
    pub frequency: f64,
    pub kappa_ex: f64,
    pub kappa_0: f64,
}

impl Cavity {
    pub fn kappa(&self) -> f64 {
        self.kappa_ex + self.kappa_0
    }
}

/// Full device description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub primary: Cavity,
    pub auxiliary: Cavity,
    pub mechanics: Vec<Oscillator>,
    /// Thermal occupation of the primary cavity's internal bath.
    pub cavity_bath: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("primary", &self.primary), ("auxiliary", &self.auxiliary)] {
            ensure(c.frequency > 0.0 && c.kappa_ex >= 0.0 && c.kappa_0 >= 0.0 && c.kappa() > 0.0, || {
                format!("{name} cavity needs positive frequency and linewidth")
            })?;
        }
        ensure(!self.mechanics.is_empty(), || "at least one mechanical oscillator required".into())?;
        for (i, m) in self.mechanics.iter().enumerate() {
            ensure(m.frequency > 0.0 && m.damping > 0.0 && m.g0 >= 0.0 && m.n_th >= 0.0, || {
                format!("oscillator {i}: frequency and damping must be positive, g0 and n_th non-negative")
            })?;
        }
        ensure(self.cavity_bath >= 0.0, || "cavity bath occupation must be non-negative".into())?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.mechanics.len()
    }

    pub fn mean_frequency(&self) -> f64 {
        self.mechanics.iter().map(|m| m.frequency).sum::<f64>() / self.n() as f64
    }

    /// Population standard deviation of the mechanical frequencies.
    pub fn frequency_spread(&self) -> f64 {
        let mean = self.mean_frequency();
        (self.mechanics.iter().map(|m| (m.frequency - mean).powi(2)).sum::<f64>() / self.n() as f64).sqrt()
    }

    /// Mean of g0².
    pub fn mean_g0_sq(&self) -> f64 {
        self.mechanics.iter().map(|m| m.g0 * m.g0).sum::<f64>() / self.n() as f64
    }

    /// Pump photon number that yields mean cooperativity `c_bar` for cavity linewidth `kappa`.
    pub fn photons_for_cooperativity(&self, c_bar: f64, kappa: f64) -> f64 {
        let per_photon = self
            .mechanics
            .iter()
            .map(|m| 4.0 * m.g0 * m.g0 / (kappa * m.damping))
            .sum::<f64>()
            / self.n() as f64;
        c_bar / per_photon
    }

    /// Linearized system for a pump at `detuning` (Δ = ω_c - ω_p) with `photons`
    /// intracavity photons. `kappa_override` replaces the primary cavity
    /// linewidth (keeping κ_ex fixed) for runs at a different operating point.
    pub fn system(&self, detuning: f64, photons: f64, kappa_override: Option<f64>) -> Result<System> {
        self.validate()?;
        ensure(photons >= 0.0, || "photon number must be non-negative".into())?;
        let kappa_ex = self.primary.kappa_ex;
        let kappa_0 = match kappa_override {
            Some(k) => {
                ensure(k >= kappa_ex, || format!("kappa override {k} below kappa_ex {kappa_ex}"))?;
                k - kappa_ex
            }
            None => self.primary.kappa_0,
        };
        let root = photons.sqrt();
        Ok(System {
            detuning,
            kappa_ex,
            kappa_0,
            omega: self.mechanics.iter().map(|m| m.frequency).collect(),
            gamma: self.mechanics.iter().map(|m| m.damping).collect(),
            g: self.mechanics.iter().map(|m| m.g0 * root).collect(),
        })
    }

    pub fn baths(&self) -> Baths {
        Baths { cavity: self.cavity_bath, mechanics: self.mechanics.iter().map(|m| m.n_th).collect() }
    }
}

/// Linearized cavity + N oscillators in the frame rotating at the pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct System {
    /// Cavity detuning Δ = ω_c - ω_p.
    pub detuning: f64,
    pub kappa_ex: f64,
    pub kappa_0: f64,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Pump-enhanced couplings g_i = g0_i √n_p.
    pub g: Vec<f64>,
}

impl System {
    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_ex + self.kappa_0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.gamma.len() != n || self.g.len() != n {
            return Err(Error::Dimension(format!(
                "{} frequencies, {} damping rates, {} couplings",
                n,
                self.gamma.len(),
                self.g.len()
            )));
        }
        ensure(n > 0, || "at least one oscillator required".into())?;
        ensure(self.kappa_ex >= 0.0 && self.kappa_0 >= 0.0 && self.kappa() > 0.0, || {
            "cavity rates must be non-negative with κ > 0".into()
        })?;
        ensure(self.gamma.iter().all(|g| *g > 0.0), || "mechanical damping must be positive".into())?;
        ensure(
            self.omega.iter().chain(&self.g).chain(std::iter::once(&self.detuning)).all(|v| v.is_finite()),
            || "non-finite system parameter".into(),
        )?;
        Ok(())
    }

    /// Individual optical damping rates 4 g_i² / κ.
    pub fn optical_damping(&self) -> Vec<f64> {
        self.g.iter().map(|g| 4.0 * g * g / self.kappa()).collect()
    }

    /// Mean cooperativity C̄ = ⟨4 g_i² / (κ Γ_i)⟩.
    pub fn mean_cooperativity(&self) -> f64 {
        self.optical_damping().iter().zip(&self.gamma).map(|(o, g)| o / g).sum::<f64>() / self.n() as f64
    }

    /// Frequency around which the matrix is shifted before diagonalization.
    pub fn reference_frequency(&self) -> f64 {
        (self.omega.iter().sum::<f64>() + self.detuning) / (self.n() + 1) as f64
    }
}

/// Bath occupations: the cavity's internal bath and each mechanical bath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baths {
    pub cavity: f64,
    pub mechanics: Vec<f64>,
}

impl Baths {
    pub fn zero(n: usize) -> Self {
        Self { cavity: 0.0, mechanics: vec![0.0; n] }
    }
}
