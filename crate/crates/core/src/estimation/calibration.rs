use crate::error::ensure;
use crate::spectra::thermal_occupation;
use crate::units::{db_to_power, HBAR, KB};
use crate::{Error, Result};

/// Ordinary least squares `y = slope·x + intercept` with one-sigma errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    ensure(x.len() == y.len() && x.len() >= 2, || "need at least two points".into())?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 1e-24 * mx.abs().max(1.0).powi(2) * n) {
        return Err(Error::DegenerateFit("abscissa has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let s2 = if x.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept,
        slope_err: (s2 / sxx).sqrt(),
        intercept_err: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        residual: rss.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloorFit {
    pub gain: f64,
    /// Added noise of the amplifier referred to its own input.
    pub n_add_amplifier: f64,
    pub gain_err: f64,
    pub n_add_err: f64,
}

/// Fit `P = G (n_th(ω, T) + n_add^H + 1)` to the average noise power of one
/// frequency section measured at several bath temperatures.
pub fn calibrate_noise_floor(omega: f64, temperatures: &[f64], powers: &[f64]) -> Result<NoiseFloorFit> {
    ensure(temperatures.len() == powers.len(), || "one power per temperature required".into())?;
    if temperatures.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} temperatures; at least 4 required", temperatures.len())));
    }
    let n: Vec<f64> = temperatures.iter().map(|&t| thermal_occupation(omega, t)).collect::<Result<_>>()?;
    let spread = n.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - n.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < 1e-3 {
        return Err(Error::DegenerateFit("bath occupation does not vary across the temperature sweep".into()));
    }
    if n.iter().all(|v| *v < 0.5) {
        log::warn!("no temperature above the knee of the Bose curve; gain and noise are poorly separated");
    }
    let line = fit_line(&n, powers)?;
    if !(line.slope > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted gain {:.4e} is not positive", line.slope)));
    }
    let g = line.slope;
    let n_add = line.intercept / g - 1.0;
    // first-order propagation through intercept/slope
    let n_add_err = ((line.intercept_err / g).powi(2) + (line.intercept * line.slope_err / (g * g)).powi(2)).sqrt();
    Ok(NoiseFloorFit { gain: g, n_add_amplifier: n_add, gain_err: line.slope_err, n_add_err })
}

/// `1 + n_add = (1 + n_add^H)/η` for a loss of `loss_db` between device and
/// amplifier, with the range spanned by `±loss_uncertainty_db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferredNoise {
    /// `1 + n_add` referred to the device.
    pub total: f64,
    pub low: f64,
    pub high: f64,
}

pub fn refer_added_noise(n_add_amplifier: f64, loss_db: f64, loss_uncertainty_db: f64) -> Result<ReferredNoise> {
    ensure(n_add_amplifier >= 0.0 && loss_db >= 0.0 && loss_uncertainty_db >= 0.0, || {
        "noise and loss must be non-negative".into()
    })?;
    let at = |db: f64| (1.0 + n_add_amplifier) / db_to_power(-db.max(0.0));
    Ok(ReferredNoise {
        total: at(loss_db),
        low: at(loss_db - loss_uncertainty_db),
        high: at(loss_db + loss_uncertainty_db),
    })
}

/// Cavity and pump quantities entering the thermal sideband calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G0Calibration {
    pub kappa_ex: f64,
    pub kappa_0: f64,
    pub omega_c: f64,
    pub omega_m: f64,
}

impl G0Calibration {
    /// Transduction factor multiplying `4 g0² n_m`.
    pub fn transduction(&self) -> f64 {
        let k = self.kappa_ex + self.kappa_0;
        let d = (self.kappa_ex - self.kappa_0) / 2.0;
        (self.kappa_ex / k).powi(2) / (self.omega_m * self.omega_m + d * d) * self.omega_c / (self.omega_c + self.omega_m)
    }

    /// Normalized sideband power `(P_SB/P_MW)(P_cal^src/P_cal^meas)` at
    /// temperature `t` in the high-temperature limit `n_m = k_B T/ħΩ`.
    pub fn normalized_power(&self, g0: f64, t: f64) -> f64 {
        4.0 * g0 * g0 * KB * t / (HBAR * self.omega_m) * self.transduction()
    }
}

/// One temperature point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandPoint {
    pub temperature: f64,
    pub sideband_power: f64,
    pub pump_source_power: f64,
    pub cal_source_power: f64,
    pub cal_measured_power: f64,
}

impl SidebandPoint {
    pub fn normalized(&self) -> f64 {
        self.sideband_power / self.pump_source_power * self.cal_source_power / self.cal_measured_power
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G0Fit {
    pub g0: f64,
    pub g0_err: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
}

/// `g0` from the slope of the normalized sideband power against
/// temperature, using points with `T ≥ t_min`.
pub fn g0_from_thermal_sweep(points: &[SidebandPoint], cal: &G0Calibration, t_min: f64) -> Result<G0Fit> {
    let used: Vec<&SidebandPoint> = points.iter().filter(|p| p.temperature >= t_min).collect();
    ensure(used.len() >= 2, || format!("fewer than two points above {t_min} K"))?;
    ensure(used.iter().all(|p| p.pump_source_power > 0.0 && p.cal_measured_power > 0.0), || {
        "powers must be positive".into()
    })?;
    let t: Vec<f64> = used.iter().map(|p| p.temperature).collect();
    let y: Vec<f64> = used.iter().map(|p| p.normalized()).collect();
    let line = fit_line(&t, &y)?;
    if !(line.slope > 0.0) {
        return Err(Error::Inadmissible(format!(
            "sideband power decreases with temperature (slope {:.3e}); data inconsistent",
            line.slope
        )));
    }
    let per_g0_sq = 4.0 * KB / (HBAR * cal.omega_m) * cal.transduction();
    let g0 = (line.slope / per_g0_sq).sqrt();
    Ok(G0Fit { g0, g0_err: g0 * line.slope_err / (2.0 * line.slope), slope: line.slope, intercept: line.intercept, points_used: used.len() })
}
