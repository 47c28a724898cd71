//! Device configuration files. All rates and frequencies are ω/2π in Hz at
//! this boundary and are converted to rad/s on ingestion.

use crate::circuit::CircuitParams;
use crate::dynamics::{Cavity, DeviceParams, Oscillator};
use crate::error::ensure;
use crate::spectra::MeasurementChain;
use crate::units::hz_to_rad;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

const PAPER_DEVICE: &str = include_str!("../data/hexamer_paper.json");

/// Relative tolerance for redundant entries (κ vs κ_ex + κ_0, Q vs Γ);
/// tabulated values are rounded to about three digits.
const CONSISTENCY_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub circuit: CircuitSection,
    pub cavities: CavitySection,
    pub mechanics: MechanicsSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub drum_capacitance_f: f64,
    pub stray_capacitance_f: f64,
    pub self_inductance_h: f64,
    pub mutual_inductance_h: [f64; 3],
    pub site_rates_hz: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySpec {
    pub frequency_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_hz: Option<f64>,
    pub kappa_ex_hz: f64,
    pub kappa_0_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub primary: CavitySpec,
    pub auxiliary: CavitySpec,
    /// Thermal occupation of the primary cavity's internal bath.
    #[serde(default)]
    pub bath_occupation: f64,
    /// Primary linewidth at the operating point, if different from the table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_kappa_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_hz: Option<f64>,
    pub g0_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_decoherence_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_frequency_hz: Option<f64>,
    /// Default `n_th Γ_m / 2π` for oscillators without their own bath entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_decoherence_hz: Option<f64>,
    pub oscillators: Vec<OscillatorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub gain: f64,
    /// Added noise of the first amplifier referred to its input.
    pub amplifier_noise: f64,
    /// Loss between device and amplifier, dB.
    pub loss_db: f64,
    #[serde(default)]
    pub loss_uncertainty_db: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self { gain: 1.0, amplifier_noise: 0.0, loss_db: 0.0, loss_uncertainty_db: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub cooperativity_grid: Option<String>,
    /// Pump detuning from the primary cavity, Hz; defaults to the red sideband at Ω̄.
    pub detuning_hz: Option<f64>,
    /// `(C̄, n_c)` points of the pump-induced cavity occupation.
    pub cavity_heating: Vec<[f64; 2]>,
    pub snr_db: f64,
    pub n_rep: usize,
    pub disorder_samples: usize,
    pub disorder_sigma: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            cooperativity_grid: None,
            detuning_hz: None,
            cavity_heating: Vec::new(),
            snr_db: 40.0,
            n_rep: 200,
            disorder_samples: 1000,
            disorder_sigma: Vec::new(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond { Ok(()) } else { Err(config_err(msg())) }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs())
}

impl CavitySpec {
    fn validate(&self, name: &str) -> Result<()> {
        check(self.frequency_hz > 0.0, || format!("{name}: frequency must be positive"))?;
        check(self.kappa_ex_hz >= 0.0 && self.kappa_0_hz >= 0.0, || format!("{name}: rates must be non-negative"))?;
        check(self.kappa_ex_hz + self.kappa_0_hz > 0.0, || format!("{name}: linewidth must be positive"))?;
        if let Some(k) = self.kappa_hz {
            check(close(k, self.kappa_ex_hz + self.kappa_0_hz), || {
                format!("{name}: kappa {k} Hz differs from kappa_ex + kappa_0 = {} Hz", self.kappa_ex_hz + self.kappa_0_hz)
            })?;
        }
        Ok(())
    }

    fn cavity(&self) -> Cavity {
        Cavity {
            frequency: hz_to_rad(self.frequency_hz),
            kappa_ex: hz_to_rad(self.kappa_ex_hz),
            kappa_0: hz_to_rad(self.kappa_0_hz),
        }
    }
}

impl DeviceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Names accepted by [`builtin`](Self::builtin).
    pub const BUILTINS: [&'static str; 1] = ["hexamer_paper"];

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "hexamer_paper" => Self::from_json(PAPER_DEVICE),
            _ => Err(config_err(format!("unknown builtin config '{name}'"))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// A path if one exists, otherwise a builtin name.
    pub fn resolve(spec: &str) -> Result<Self> {
        if Path::new(spec).exists() { Self::load(spec) } else { Self::builtin(spec) }
    }

    pub fn validate(&self) -> Result<()> {
        self.circuit_params().validate().map_err(|e| config_err(format!("circuit: {e}")))?;
        self.cavities.primary.validate("primary cavity")?;
        self.cavities.auxiliary.validate("auxiliary cavity")?;
        check(self.cavities.bath_occupation >= 0.0, || "cavity bath occupation must be >= 0".into())?;
        if let Some(k) = self.cavities.operating_kappa_hz {
            check(k >= self.cavities.primary.kappa_ex_hz, || "operating kappa below kappa_ex".into())?;
        }
        let m = &self.mechanics;
        check(!m.oscillators.is_empty(), || "at least one oscillator required".into())?;
        for (i, o) in m.oscillators.iter().enumerate() {
            check(o.frequency_hz.is_some() != o.offset_hz.is_some(), || {
                format!("oscillator {i}: give exactly one of frequency_hz or offset_hz")
            })?;
            check(o.offset_hz.is_none() || m.mean_frequency_hz.is_some(), || {
                format!("oscillator {i}: offset_hz requires mechanics.mean_frequency_hz")
            })?;
            check(o.quality_factor.is_some() || o.damping_hz.is_some(), || {
                format!("oscillator {i}: give quality_factor or damping_hz")
            })?;
            check(o.g0_hz >= 0.0, || format!("oscillator {i}: g0 must be >= 0"))?;
            let f = self.oscillator_frequency_hz(i);
            check(f > 0.0, || format!("oscillator {i}: frequency must be positive"))?;
            if let (Some(q), Some(d)) = (o.quality_factor, o.damping_hz) {
                check(close(q, f / d), || format!("oscillator {i}: Q = {q} inconsistent with Ω/Γ = {}", f / d))?;
            }
            check(o.quality_factor.is_none_or(|q| q > 0.0) && o.damping_hz.is_none_or(|d| d > 0.0), || {
                format!("oscillator {i}: damping must be positive")
            })?;
            check(o.n_th.is_none() || o.thermal_decoherence_hz.is_none(), || {
                format!("oscillator {i}: give n_th or thermal_decoherence_hz, not both")
            })?;
        }
        let ch = &self.chain;
        check(ch.gain > 0.0 && ch.amplifier_noise >= 0.0 && ch.loss_db >= 0.0, || "invalid chain section".into())?;
        if let Some(g) = &self.run.cooperativity_grid {
            g.parse::<Grid>()?;
        }
        for w in self.run.cavity_heating.windows(2) {
            check(w[1][0] > w[0][0], || "cavity_heating cooperativities must increase".into())?;
        }
        check(self.run.cavity_heating.iter().all(|p| p[0] > 0.0 && p[1] >= 0.0), || {
            "cavity_heating needs positive cooperativity and non-negative occupation".into()
        })?;
        check(self.run.n_rep > 0 && self.run.disorder_samples > 0, || "sample counts must be positive".into())?;
        check(self.run.disorder_sigma.iter().all(|s| *s >= 0.0), || "disorder sigma must be >= 0".into())?;
        Ok(())
    }

    fn oscillator_frequency_hz(&self, i: usize) -> f64 {
        let o = &self.mechanics.oscillators[i];
        o.frequency_hz.unwrap_or_else(|| self.mechanics.mean_frequency_hz.unwrap_or(0.0) + o.offset_hz.unwrap_or(0.0))
    }

    pub fn circuit_params(&self) -> CircuitParams {
        let c = &self.circuit;
        CircuitParams {
            drum_capacitance: c.drum_capacitance_f,
            stray_capacitance: c.stray_capacitance_f,
            self_inductance: c.self_inductance_h,
            mutual: c.mutual_inductance_h,
            site_rates: c.site_rates_hz.map(hz_to_rad),
        }
    }

    pub fn device(&self) -> Result<DeviceParams> {
        let mechanics = (0..self.mechanics.oscillators.len())
            .map(|i| {
                let o = &self.mechanics.oscillators[i];
                let f = self.oscillator_frequency_hz(i);
                let damping_hz = o.damping_hz.unwrap_or_else(|| f / o.quality_factor.unwrap_or(f64::NAN));
                let n_th = match (o.n_th, o.thermal_decoherence_hz.or(self.mechanics.thermal_decoherence_hz)) {
                    (Some(n), _) => n,
                    (None, Some(d)) => d / damping_hz,
                    (None, None) => 0.0,
                };
                Oscillator { frequency: hz_to_rad(f), damping: hz_to_rad(damping_hz), g0: hz_to_rad(o.g0_hz), n_th }
            })
            .collect();
        let dev = DeviceParams {
            primary: self.cavities.primary.cavity(),
            auxiliary: self.cavities.auxiliary.cavity(),
            mechanics,
            cavity_bath: self.cavities.bath_occupation,
        };
        dev.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(dev)
    }

    /// Primary-cavity linewidth used for dynamics (rad/s).
    pub fn operating_kappa(&self) -> f64 {
        let p = &self.cavities.primary;
        hz_to_rad(self.cavities.operating_kappa_hz.unwrap_or(p.kappa_ex_hz + p.kappa_0_hz))
    }

    /// Pump detuning Δ = ω_c − ω_p (rad/s).
    pub fn detuning(&self) -> Result<f64> {
        Ok(match self.run.detuning_hz {
            Some(d) => hz_to_rad(d),
            None => self.device()?.mean_frequency(),
        })
    }

    pub fn chain(&self) -> Result<MeasurementChain> {
        MeasurementChain::from_amplifier(self.chain.gain, self.chain.amplifier_noise, self.chain.loss_db)
    }

    /// Ratio Ω̄/κ at the operating point; ≫ 1 means resolved sidebands.
    pub fn sideband_resolution(&self) -> Result<f64> {
        Ok(self.device()?.mean_frequency() / self.operating_kappa())
    }

    pub fn resolved_sideband(&self) -> Result<bool> {
        Ok(self.sideband_resolution()? > 10.0)
    }

    /// Cavity occupation at mean cooperativity `c_bar`, log-linear
    /// interpolation of `run.cavity_heating` (flat beyond the ends, zero if empty).
    pub fn cavity_heating(&self, c_bar: f64) -> f64 {
        let pts = &self.run.cavity_heating;
        match pts.len() {
            0 => 0.0,
            _ if c_bar <= pts[0][0] => pts[0][1],
            _ if c_bar >= pts[pts.len() - 1][0] => pts[pts.len() - 1][1],
            _ => {
                let k = pts.partition_point(|p| p[0] <= c_bar);
                let (a, b) = (pts[k - 1], pts[k]);
                let t = (c_bar.ln() - a[0].ln()) / (b[0].ln() - a[0].ln());
                a[1] + t * (b[1] - a[1])
            }
        }
    }
}

/// `start:stop:count[:log]` grid specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || config_err(format!("grid '{s}' is not start:stop:count[:log]"));
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let log = match parts.get(3).map(|p| p.trim()) {
            None | Some("lin") => false,
            Some("log") => true,
            _ => return Err(bad()),
        };
        let g = Grid { start, stop, count, log };
        ensure(count >= 1 && start.is_finite() && stop.is_finite(), || format!("grid '{s}' is empty"))
            .map_err(|_| bad())?;
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(config_err(format!("log grid '{s}' needs positive bounds")));
        }
        Ok(g)
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = |k: usize| k as f64 / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| match self.log {
                true => (self.start.ln() + step(k) * (self.stop.ln() - self.start.ln())).exp(),
                false => self.start + step(k) * (self.stop - self.start),
            })
            .collect()
    }
}
