use super::{draw_rng, DisorderSpec, Summary};
use crate::dynamics::{collective_eigenmodes, DeviceParams, System};
use crate::error::ensure;
use crate::linalg::{inner, CVec};
use crate::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Linewidth and frequency trajectories of the collective modes over a
/// cooperativity grid, for mechanical frequencies `Ω̄ (1 + σ x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechDisorderSweep {
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
    pub cooperativity: Vec<f64>,
    /// `[c][k]`: k-th broadest mode linewidth (rad/s) at grid point c.
    pub linewidths: Vec<Vec<Summary>>,
    /// Linewidth and frequency offset from Ω̄ of the bright mode, followed
    /// along the grid by eigenvector continuity.
    pub bright_linewidth: Vec<Summary>,
    pub bright_offset: Vec<Summary>,
    /// `N · mean(4 g_i²/κ)` without disorder.
    pub reference: Vec<f64>,
    /// Per-draw first grid point where the bright mode exceeds `√N Γ̄_opt`
    /// (NaN if never).
    pub transitions: Vec<f64>,
}

impl MechDisorderSweep {
    /// Median of the finite transition cooperativities.
    pub fn median_transition(&self) -> Option<f64> {
        let mut t: Vec<f64> = self.transitions.iter().cloned().filter(|v| v.is_finite()).collect();
        if t.is_empty() {
            return None;
        }
        t.sort_by(f64::total_cmp);
        Some(super::percentile(&t, 50.0))
    }
}

/// Pumped system at mean cooperativity `c_bar` with the given frequencies.
fn system_at(device: &DeviceParams, omega: &[f64], kappa: f64, c_bar: f64) -> Result<System> {
    let detuning = device.mean_frequency();
    let mut sys = device.system(detuning, device.photons_for_cooperativity(c_bar, kappa), Some(kappa))?;
    sys.omega = omega.to_vec();
    Ok(sys)
}

struct Trajectory {
    widths: Vec<Vec<f64>>,
    bright_width: Vec<f64>,
    bright_offset: Vec<f64>,
    transition: f64,
}

/// Collective eigenmodes along the grid for every disorder draw. The
/// primary cavity linewidth is `kappa`; the pump sits at the mean
/// mechanical frequency.
pub fn mech_disorder_sweep(
    device: &DeviceParams,
    kappa: f64,
    spec: &DisorderSpec,
    grid: &[f64],
) -> Result<MechDisorderSweep> {
    spec.validate()?;
    ensure(!grid.is_empty() && grid[0] > 0.0, || "cooperativity grid must be positive".into())?;
    ensure(grid.windows(2).all(|w| w[1] > w[0]), || "cooperativity grid must be increasing".into())?;
    let n = device.n();
    let mean = device.mean_frequency();
    let reference: Vec<f64> = grid
        .iter()
        .map(|&c| {
            let np = device.photons_for_cooperativity(c, kappa);
            n as f64 * 4.0 * np * device.mean_g0_sq() / kappa
        })
        .collect();
    let threshold: Vec<f64> = reference.iter().map(|r| r / (n as f64).sqrt()).collect();
    let runs: Vec<Result<Trajectory>> = (0..spec.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = draw_rng(spec.seed, k);
            let omega: Vec<f64> = (0..n)
                .map(|_| {
                    let x: f64 = rng.sample(StandardNormal);
                    mean * (1.0 + spec.sigma * x)
                })
                .collect();
            let mut prev: Option<CVec> = None;
            let mut t = Trajectory { widths: vec![], bright_width: vec![], bright_offset: vec![], transition: f64::NAN };
            for (ci, &c_bar) in grid.iter().enumerate() {
                let sys = system_at(device, &omega, kappa, c_bar)?;
                let modes = collective_eigenmodes(&sys)?;
                let idx = match &prev {
                    None => modes.bright(&sys.g),
                    Some(p) => {
                        let mut best = (0, -1.0);
                        for (j, m) in modes.modes.iter().enumerate() {
                            let o = inner(p, &m.vector).norm();
                            if o > best.1 {
                                best = (j, o);
                            }
                        }
                        best.0
                    }
                };
                let m = &modes.modes[idx];
                prev = Some(m.vector.clone());
                t.widths.push(modes.modes.iter().map(|m| m.linewidth).collect());
                t.bright_width.push(m.linewidth);
                t.bright_offset.push(m.frequency - mean);
                if t.transition.is_nan() && m.linewidth >= threshold[ci] && m.cavity_weight < 0.5 {
                    t.transition = c_bar;
                }
            }
            Ok(t)
        })
        .collect();
    let runs: Vec<Trajectory> = runs.into_iter().collect::<Result<_>>()?;
    let per_point = |f: &dyn Fn(&Trajectory, usize) -> f64| -> Vec<Summary> {
        (0..grid.len()).map(|c| Summary::from_samples(&runs.iter().map(|r| f(r, c)).collect::<Vec<_>>())).collect()
    };
    let linewidths = (0..grid.len())
        .map(|c| {
            (0..=n)
                .map(|k| Summary::from_samples(&runs.iter().map(|r| r.widths[c][k]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    Ok(MechDisorderSweep {
        sigma: spec.sigma,
        samples: spec.samples,
        seed: spec.seed,
        cooperativity: grid.to_vec(),
        linewidths,
        bright_linewidth: per_point(&|r, c| r.bright_width[c]),
        bright_offset: per_point(&|r, c| r.bright_offset[c]),
        reference,
        transitions: runs.iter().map(|r| r.transition).collect(),
    })
}
