use super::Psd;
use crate::error::ensure;
use crate::quad::trapezoid;
use crate::units::{db_to_power, HBAR, KB};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Bose–Einstein occupation at angular frequency `omega` and temperature `t` (K).
pub fn thermal_occupation(omega: f64, t: f64) -> Result<f64> {
    ensure(omega > 0.0, || "frequency must be positive".into())?;
    ensure(t >= 0.0, || format!("negative temperature {t}"))?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (KB * t);
    Ok(1.0 / x.exp_m1())
}

/// Gain and added noise of the detection chain, referred to the device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementChain {
    pub gain: f64,
    pub n_add: f64,
}

impl MeasurementChain {
    pub fn new(gain: f64, n_add: f64) -> Result<Self> {
        ensure(gain > 0.0, || "gain must be positive".into())?;
        ensure(n_add >= 0.0, || "added noise must be non-negative".into())?;
        Ok(Self { gain, n_add })
    }

    /// Refer the amplifier's added noise through a lossy line of
    /// `loss_db`: `1 + n_add = (1 + n_add_amp) / η`.
    pub fn from_amplifier(gain: f64, n_add_amp: f64, loss_db: f64) -> Result<Self> {
        ensure(loss_db >= 0.0, || "loss must be non-negative".into())?;
        let eta = db_to_power(-loss_db);
        Self::new(gain, (1.0 + n_add_amp) / eta - 1.0)
    }

    /// Detected spectrum `G (S̄ + 1/2 + n_add)`.
    pub fn detected_psd(&self, psd: &Psd) -> Psd {
        Psd {
            omega: psd.omega.clone(),
            values: psd.values.iter().map(|s| self.gain * (s + 0.5 + self.n_add)).collect(),
        }
    }

    /// Inverse of [`detected_psd`](Self::detected_psd).
    pub fn calibrate(&self, detected: &Psd) -> Psd {
        Psd {
            omega: detected.omega.clone(),
            values: detected.values.iter().map(|s| s / self.gain - 0.5 - self.n_add).collect(),
        }
    }
}

/// Auxiliary cavity occupation from its background-subtracted output
/// spectrum: `n = ∫ S_c dω / (2π κ_ex)`.
pub fn aux_cavity_heating(excess: &Psd, kappa_ex: f64) -> Result<f64> {
    ensure(kappa_ex > 0.0, || "external coupling must be positive".into())?;
    if excess.omega.len() < 2 || excess.omega.len() != excess.values.len() {
        return Err(Error::Dimension("spectrum needs at least two matching samples".into()));
    }
    Ok(trapezoid(&excess.omega, &excess.values) / (2.0 * PI * kappa_ex))
}
