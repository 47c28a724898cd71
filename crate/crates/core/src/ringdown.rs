//! Time-domain ringdown records and collective modeshape extraction.
//!
//! A record is the complex (I/Q) cavity output after the excitation is
//! switched off, `z(t) = Σ_j c_j e^{-iΩ_j t - Γ_j t/2} + noise`, where the
//! frequencies are offsets in the demodulation frame. Each oscillator's
//! complex amplitude is obtained from a local fit of the record's discrete
//! Fourier transform `Z(ω) = Σ_n z_n e^{iω t_n} Δt` around its known
//! frequency.

use crate::dynamics::{collective_eigenmodes, ModeShape, System};
use crate::error::ensure;
use crate::linalg::{self, c, CVec, I};
use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::units::TWO_PI;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;

#[derive(Debug, Clone, PartialEq)]
pub struct RingdownParams {
    /// Complex initial amplitudes `A_j e^{iφ_j}`.
    pub amplitudes: Vec<Complex64>,
    /// Angular frequency offsets in the record frame.
    pub frequencies: Vec<f64>,
    /// Total energy decay rates.
    pub rates: Vec<f64>,
    /// Samples per second.
    pub sample_rate: f64,
    /// Record length, s.
    pub duration: f64,
    /// Standard deviation of the complex white noise per sample (`E|n|² = σ²`).
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingdownRecord {
    pub dt: f64,
    pub samples: Vec<Complex64>,
}

impl RingdownRecord {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 * self.dt)
    }
}

/// Noise level giving a per-sample peak signal-to-noise ratio `snr_db`
/// relative to the strongest initial amplitude.
pub fn noise_for_snr(amplitudes: &[Complex64], snr_db: f64) -> f64 {
    let peak = amplitudes.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
    (peak / 10f64.powf(snr_db / 10.0)).sqrt()
}

impl RingdownParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.amplitudes.len();
        if self.frequencies.len() != n || self.rates.len() != n {
            return Err(Error::Dimension("amplitudes, frequencies and rates must have equal length".into()));
        }
        ensure(n > 0, || "at least one oscillator required".into())?;
        ensure(self.rates.iter().all(|g| *g > 0.0), || "decay rates must be positive".into())?;
        ensure(self.sample_rate > 0.0 && self.noise_std >= 0.0, || "invalid sampling or noise level".into())?;
        let fmax = self.frequencies.iter().map(|w| w.abs() / TWO_PI).fold(0.0, f64::max);
        ensure(self.sample_rate > 2.0 * fmax, || {
            format!("sample rate {} Hz below twice the largest offset {fmax} Hz", self.sample_rate)
        })?;
        let gmin = self.rates.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(self.duration * gmin >= 5.0, || format!("record shorter than 5/Γ_min ({} s)", 5.0 / gmin))?;
        Ok(())
    }
}

pub fn synthesize_ringdown<R: Rng>(p: &RingdownParams, rng: &mut R) -> Result<RingdownRecord> {
    p.validate()?;
    let dt = 1.0 / p.sample_rate;
    let len = (p.duration * p.sample_rate).round() as usize;
    let sigma = p.noise_std / std::f64::consts::SQRT_2;
    let samples = (0..len)
        .map(|k| {
            let t = k as f64 * dt;
            let mut z: Complex64 = (0..p.amplitudes.len())
                .map(|j| p.amplitudes[j] * Complex64::from_polar((-p.rates[j] * t / 2.0).exp(), -p.frequencies[j] * t))
                .sum();
            if sigma > 0.0 {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                z += c(a, b) * sigma;
            }
            z
        })
        .collect();
    Ok(RingdownRecord { dt, samples })
}

/// Discrete transform `Z(ω_k) = Σ_n z_n e^{iω_k t_n} Δt` on the FFT bins,
/// returned with frequencies in ascending order.
pub fn dft(record: &RingdownRecord) -> (Vec<f64>, Vec<Complex64>) {
    let n = record.samples.len();
    let mut buf = record.samples.clone();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let df = TWO_PI / (n as f64 * record.dt);
    let mut pairs: Vec<(f64, Complex64)> = buf
        .into_iter()
        .enumerate()
        .map(|(k, z)| {
            let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
            (kk * df, z * record.dt)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Exact transform of one sampled, truncated exponential `c e^{-iΩt - Γt/2}`.
fn line_shape(omega: f64, center: f64, rate: f64, dt: f64, len: usize) -> Complex64 {
    let q = (c(-rate / 2.0, omega - center) * dt).exp();
    let qn = (c(-rate / 2.0, omega - center) * (dt * len as f64)).exp();
    let one = Complex64::from(1.0);
    if (one - q).norm() < 1e-14 {
        return Complex64::from(dt * len as f64);
    }
    dt * (one - qn) / (one - q)
}

#[derive(Debug, Clone)]
pub struct PeakFit {
    pub amplitude: Complex64,
    pub frequency: f64,
    pub rate: f64,
    pub background: Complex64,
    pub amplitude_stderr: f64,
    /// False when the free-line fit failed and the amplitude comes from the
    /// linear fit at the nominal frequency and rate.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ModeShapeFit {
    pub shape: ModeShape,
    pub peaks: Vec<PeakFit>,
}

/// Window half-width in nominal linewidths.
pub const FIT_WINDOW: f64 = 10.0;

fn fit_peak(omega: &[f64], z: &[Complex64], center: f64, rate: f64, dt: f64, len: usize) -> Result<PeakFit> {
    let idx: Vec<usize> = (0..omega.len()).filter(|&k| (omega[k] - center).abs() <= FIT_WINDOW * rate).collect();
    if idx.len() < 6 {
        return Err(Error::InvalidParameter(format!(
            "only {} DFT bins within ±{FIT_WINDOW} linewidths of {center:.4e} rad/s; record too short",
            idx.len()
        )));
    }
    // linear start for (amplitude, background) at the nominal line
    let m = idx.len();
    let mut a = DMatrix::<Complex64>::zeros(m, 2);
    let mut y = DVector::<Complex64>::zeros(m);
    for (r, &k) in idx.iter().enumerate() {
        a[(r, 0)] = line_shape(omega[k], center, rate, dt, len);
        a[(r, 1)] = Complex64::from(1.0);
        y[r] = z[k];
    }
    let sol = a.clone().svd(true, true).solve(&y, 1e-14).map_err(|e| Error::Numerical(e.to_string()))?;
    let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        let (amp, bg) = (c(p[0], p[1]), c(p[2], p[3]));
        let mut out = Vec::with_capacity(2 * m);
        for &k in &idx {
            let d = (amp * line_shape(omega[k], p[5], p[4], dt, len) + bg - z[k]) / scale;
            out.push(d.re);
            out.push(d.im);
        }
        Ok(out)
    };
    let amp_scale = sol[0].norm().max(1e-300);
    let opts = LmOptions {
        typical: Some(vec![amp_scale, amp_scale, amp_scale * dt, amp_scale * dt, rate, rate]),
        ..LmOptions::default()
    };
    let x0 = [sol[0].re, sol[0].im, sol[1].re, sol[1].im, rate, center];
    match levenberg_marquardt(resid, &x0, &opts) {
        Ok(fit) if fit.params[4] > 0.0 && (fit.params[5] - center).abs() < FIT_WINDOW * rate => {
            let p = &fit.params;
            let stderr = ((fit.stderr[0].powi(2) + fit.stderr[1].powi(2)) / 2.0).sqrt() * scale;
            Ok(PeakFit {
                amplitude: c(p[0], p[1]),
                background: c(p[2], p[3]),
                rate: p[4],
                frequency: p[5],
                amplitude_stderr: stderr,
                converged: true,
            })
        }
        other => {
            let why = match other {
                Err(e) => e.to_string(),
                Ok(f) => format!("line left the window (rate {:.3e}, center {:.3e})", f.params[4], f.params[5]),
            };
            log::warn!("peak at {center:.4e} rad/s: {why}; keeping the fixed-line amplitude");
            let r = &a * &sol - &y;
            let dof = (2 * m).saturating_sub(4).max(1) as f64;
            let s2 = r.norm_squared() / dof;
            let col = a.column(0).norm_squared();
            Ok(PeakFit {
                amplitude: sol[0],
                background: sol[1],
                rate,
                frequency: center,
                amplitude_stderr: (s2 / col / 2.0).sqrt(),
                converged: false,
            })
        }
    }
}

/// Fit each known oscillator frequency independently and normalize the
/// complex amplitudes into a [`ModeShape`].
pub fn extract_modeshape(record: &RingdownRecord, frequencies: &[f64], nominal_rates: &[f64]) -> Result<ModeShapeFit> {
    if frequencies.len() != nominal_rates.len() || frequencies.is_empty() {
        return Err(Error::Dimension("one nominal rate per known frequency required".into()));
    }
    ensure(record.samples.len() >= 16, || "record too short".into())?;
    let (omega, z) = dft(record);
    let len = record.samples.len();
    let peaks: Vec<PeakFit> = frequencies
        .par_iter()
        .zip(nominal_rates.par_iter())
        .map(|(&w, &g)| fit_peak(&omega, &z, w, g, record.dt, len))
        .collect::<Result<_>>()?;
    let amps: Vec<Complex64> = peaks.iter().map(|p| p.amplitude).collect();
    Ok(ModeShapeFit { shape: ModeShape::from_amplitudes(&amps)?, peaks })
}

/// Mechanical amplitudes after driving the cavity at `drive_frequency`
/// (pump frame) for `drive_time` from rest, i.e. the initial condition of a
/// ringdown that selectively excites one collective mode.
pub fn selective_excitation(sys: &System, drive_frequency: f64, drive_time: f64) -> Result<Vec<Complex64>> {
    ensure(drive_time > 0.0, || "drive time must be positive".into())?;
    let modes = collective_eigenmodes(sys)?;
    let (s, _) = modes.basis();
    let sinv = linalg::inverse(&s)?;
    let n = s.nrows();
    let x = drive_frequency - modes.shift;
    let drive = -I * x;
    let mut state = CVec::zeros(n);
    for j in 0..n {
        let lam = modes.modes[j].shifted;
        let coeff = sinv[(j, 0)] * ((drive * drive_time).exp() - (lam * drive_time).exp()) / (lam - drive);
        state += s.column(j) * coeff;
    }
    Ok(state.iter().skip(1).cloned().collect())
}

/// Settings of the simulated modeshape measurement: selective excitation at
/// the operating point, then a ringdown at reduced power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSettings {
    /// Γ_opt/Γ_m of each oscillator during the ringdown.
    pub readout_ratio: f64,
    /// Drive duration in units of 1/min(Γ_opt) at the operating point.
    pub drive_time: f64,
    pub sample_rate: f64,
    /// Record length in units of 1/min(Γ_total) of the ringdown.
    pub record_length: f64,
    pub snr_db: Option<f64>,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self { readout_ratio: 10.0, drive_time: 10.0, sample_rate: 50e3, record_length: 20.0, snr_db: Some(40.0) }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub params: RingdownParams,
    pub record: RingdownRecord,
    pub fit: ModeShapeFit,
    /// Mechanical part of the excited eigenvector.
    pub theory: ModeShape,
}

/// Excite collective mode `mode` of `sys`, record the ringdown in the frame
/// of a weak pump at the mean mechanical frequency and extract the shape.
/// Every oscillator is read out with equal gain.
pub fn simulate_modeshape_measurement<R: Rng>(
    sys: &System,
    mode: usize,
    settings: &ProtocolSettings,
    rng: &mut R,
) -> Result<ProtocolOutcome> {
    sys.validate()?;
    let modes = collective_eigenmodes(sys)?;
    let target = modes.modes.get(mode).ok_or_else(|| {
        Error::InvalidParameter(format!("mode index {mode} out of range 0..{}", modes.modes.len()))
    })?;
    let gmin = sys.optical_damping().into_iter().fold(f64::INFINITY, f64::min);
    ensure(gmin > 0.0, || "selective excitation needs a pumped system".into())?;
    let amps = selective_excitation(sys, target.frequency, settings.drive_time / gmin)?;
    let mean = sys.omega.iter().sum::<f64>() / sys.n() as f64;
    let rates: Vec<f64> = sys.gamma.iter().map(|g| g * (1.0 + settings.readout_ratio)).collect();
    let rmin = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let params = RingdownParams {
        noise_std: settings.snr_db.map_or(0.0, |snr| noise_for_snr(&amps, snr)),
        amplitudes: amps,
        frequencies: sys.omega.iter().map(|w| w - mean).collect(),
        rates,
        sample_rate: settings.sample_rate,
        duration: settings.record_length / rmin,
    };
    let record = synthesize_ringdown(&params, rng)?;
    let fit = extract_modeshape(&record, &params.frequencies, &params.rates)?;
    let mech: Vec<Complex64> = target.vector.iter().skip(1).cloned().collect();
    Ok(ProtocolOutcome { theory: ModeShape::from_amplitudes(&mech)?, params, record, fit })
}
