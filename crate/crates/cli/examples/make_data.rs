//! Regenerates the synthetic example inputs in `crates/cli/data/`.
//!
//!     cargo run -p hexamer-cli --example make_data [-- OUT_DIR]
//!
//! Every file records the parameters it was generated from as `truth_*`
//! metadata so fits can be checked against them.

use hexamer::config::DeviceConfig;
use hexamer::dynamics::omit_reflection;
use hexamer::estimation::{gamma_pm, kerr_response, lorentzian, G0Calibration, KerrParams, Resonance};
use hexamer::io::{write_complex_trace, write_csv, write_psd, Cell, Metadata};
use hexamer::spectra::{output_psd, thermal_occupation, ComplexTrace, Psd};
use hexamer::units::{db_to_power, hz_to_rad, rad_to_hz, HBAR};
use hexamer::{Complex64, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::{Path, PathBuf};

const SEED: u64 = 20240601;

fn linspace(center: f64, half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| center - half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

fn hz_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{:.9e}", rad_to_hz(*x))).collect::<Vec<_>>().join(";")
}

/// Uniform sweep over ±span plus dense clusters of ±half around each center.
fn clustered(center: f64, span: f64, points: usize, centers: &[f64], half: f64) -> Vec<f64> {
    let mut w = linspace(center, span, points);
    for c in centers {
        w.extend(linspace(*c, half, 201));
    }
    w.sort_by(f64::total_cmp);
    w.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    w
}

fn base_meta(what: &str) -> Metadata {
    Metadata::new().with("generator", "make_data").with("dataset", what).with("seed", SEED)
}

fn omit(dir: &Path, cfg: &DeviceConfig, rng: &mut ChaCha8Rng) -> Result<()> {
    let dev = cfg.device()?;
    let kappa = cfg.operating_kappa();
    let c_bar = 100.0;
    let sys = dev.system(cfg.detuning()?, dev.photons_for_cooperativity(c_bar, kappa), Some(kappa))?;
    let gopt = sys.optical_damping().into_iter().fold(0.0, f64::max);
    let gmax = sys.gamma.iter().cloned().fold(0.0, f64::max);
    let w = clustered(dev.mean_frequency(), 3.0 * kappa, 2001, &sys.omega, 10.0 * (gopt + gmax));
    let noise = 1e-4;
    let values = omit_reflection(&sys, &w)?
        .into_iter()
        .map(|s| s + noise * Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let meta = base_meta("omit")
        .with("cooperativity", c_bar)
        .with("noise_std", noise)
        .with("truth_g_hz", hz_list(&sys.g))
        .with("truth_kappa_hz", rad_to_hz(sys.kappa()))
        .with("truth_detuning_hz", rad_to_hz(sys.detuning));
    write_complex_trace(dir.join("omit_trace.csv"), &meta, &ComplexTrace { omega: w, values })
}

fn psd(dir: &Path, cfg: &DeviceConfig) -> Result<()> {
    let dev = cfg.device()?;
    let kappa = cfg.operating_kappa();
    let c_bar = 1000.0;
    let sys = dev.system(cfg.detuning()?, dev.photons_for_cooperativity(c_bar, kappa), Some(kappa))?;
    let baths = dev.baths();
    let gopt = sys.optical_damping().into_iter().fold(0.0, f64::max);
    let w = clustered(dev.mean_frequency(), 2.0 * kappa, 1501, &sys.omega, 10.0 * gopt);
    let detected = cfg.chain()?.detected_psd(&output_psd(&sys, &baths, &w)?);
    let meta = base_meta("psd")
        .with("cooperativity", c_bar)
        .with("truth_g_hz", hz_list(&sys.g))
        .with("truth_kappa_hz", rad_to_hz(sys.kappa()))
        .with("truth_n_th", baths.mechanics.iter().map(|n| format!("{n:.9e}")).collect::<Vec<_>>().join(";"));
    write_psd(dir.join("psd_spectrum.csv"), &meta, &detected)
}

fn resonance(dir: &Path, cfg: &DeviceConfig, rng: &mut ChaCha8Rng) -> Result<()> {
    let p = cfg.device()?.primary;
    let reference = p.frequency;
    let r = Resonance {
        kappa_ex: p.kappa_ex,
        kappa_0: p.kappa_0,
        omega_0: reference + hz_to_rad(1.2e3),
        tau: 40e-9,
        alpha: 0.3,
        phi: 0.05,
        reference,
    };
    let level = 0.3;
    let w = linspace(reference, 10.0 * p.kappa(), 801);
    let noise = 1e-5;
    let values = w
        .iter()
        .map(|x| level * r.s11(*x) + noise * Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let meta = base_meta("resonance")
        .with("background_level", level)
        .with("truth_kappa_ex_hz", rad_to_hz(r.kappa_ex))
        .with("truth_kappa_0_hz", rad_to_hz(r.kappa_0))
        .with("truth_omega_0_hz", rad_to_hz(r.omega_0));
    write_complex_trace(dir.join("resonance_trace.csv"), &meta, &ComplexTrace { omega: w, values })
}

fn kerr(dir: &Path, cfg: &DeviceConfig) -> Result<()> {
    let c = cfg.device()?.primary;
    let p = KerrParams { kappa_ex: c.kappa_ex, kappa_0: c.kappa_0, omega_c: c.frequency, kerr: hz_to_rad(1.5), attenuation_db: 70.0 };
    let k = p.kappa();
    // source power giving `photons` on resonance in the linear regime
    let power = |photons: f64| photons * k * k / 4.0 / p.kappa_ex * HBAR * p.omega_c / db_to_power(-p.attenuation_db);
    let powers: Vec<f64> = [0.01, 0.1, 0.3].iter().map(|f| power(f * k / p.kerr)).collect();
    let w = linspace(p.omega_c, 3.0 * k, 301);
    let sweep = kerr_response(&p, &w, &powers)?;
    for (i, (t, pw)) in sweep.traces.iter().zip(&powers).enumerate() {
        let meta = base_meta("kerr")
            .with("power_w", format!("{pw:.12e}"))
            .with("attenuation_db", p.attenuation_db)
            .with("kerr_guess_hz", 1.2)
            .with("truth_kerr_hz", rad_to_hz(p.kerr))
            .with("truth_kappa_ex_hz", rad_to_hz(p.kappa_ex))
            .with("truth_kappa_0_hz", rad_to_hz(p.kappa_0));
        write_complex_trace(dir.join(format!("kerr_p{}.csv", i + 1)), &meta, t)?;
    }
    Ok(())
}

fn noise_floor(dir: &Path) -> Result<()> {
    let f = 4.814e9;
    let (gain, n_add) = (3.7e-15, 5.83);
    let temps = [0.02, 0.05, 0.1, 0.2, 0.4, 0.8];
    let rows: Vec<Vec<Cell>> = temps
        .iter()
        .map(|&t| Ok(vec![t.into(), (gain * (thermal_occupation(hz_to_rad(f), t)? + n_add + 1.0)).into()]))
        .collect::<Result<_>>()?;
    let meta = base_meta("noise_floor").with("freq_hz", f).with("truth_gain", gain).with("truth_n_add_amplifier", n_add);
    write_csv(dir.join("noise_floor.csv"), &meta, &["temperature_k", "power_w"], &rows)
}

fn g0(dir: &Path, cfg: &DeviceConfig) -> Result<()> {
    let dev = cfg.device()?;
    let p = dev.primary;
    let cal = G0Calibration { kappa_ex: p.kappa_ex, kappa_0: p.kappa_0, omega_c: p.frequency, omega_m: dev.mean_frequency() };
    let g0 = hz_to_rad(1.3);
    let (pump, cal_src, cal_meas) = (1e-6, 1e-9, 3e-3);
    let rows: Vec<Vec<Cell>> = (1..=10)
        .map(|k| {
            let t = 0.02 * k as f64;
            let sb = cal.normalized_power(g0, t) * pump * cal_meas / cal_src;
            vec![t.into(), sb.into(), pump.into(), cal_src.into(), cal_meas.into()]
        })
        .collect();
    let meta = base_meta("g0").with("mechanical_freq_hz", rad_to_hz(cal.omega_m)).with("truth_g0_hz", 1.3);
    write_csv(dir.join("g0_sweep.csv"), &meta, &["temperature_k", "sideband_w", "pump_w", "cal_source_w", "cal_measured_w"], &rows)
}

fn asymmetry(dir: &Path, cfg: &DeviceConfig, rng: &mut ChaCha8Rng) -> Result<()> {
    let dev = cfg.device()?;
    let kappa = dev.auxiliary.kappa();
    let om = dev.mean_frequency();
    let det_hz = -100e3;
    let g = hz_to_rad(2e3);
    let (gp, gm) = gamma_pm(g, kappa, om, hz_to_rad(det_hz));
    let (n_m, n_aux) = (3.0, 0.05);
    let width = hz_to_rad(40.0);
    let w = linspace(0.0, 30.0 * width, 1201);
    let a_as = 1e-3 * gp * (n_m - 2.0 * n_aux);
    let a_s = 1e-3 * gm * (n_m + 1.0 + 2.0 * n_aux);
    let bg = 2.0 * a_s * lorentzian(0.0, width);
    for (name, area) in [("asym_anti_stokes.csv", a_as), ("asym_stokes.csv", a_s)] {
        let clean: Vec<f64> = w.iter().map(|x| bg + area * lorentzian(*x, width)).collect();
        let level = clean.iter().cloned().fold(0.0, f64::max);
        let values = clean.into_iter().map(|v| v + level / 300.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let meta = base_meta("asymmetry")
            .with("n_aux", n_aux)
            .with("aux_detuning_hz", det_hz)
            .with("mechanical_freq_hz", rad_to_hz(om))
            .with("truth_n_m", n_m)
            .with("truth_width_hz", rad_to_hz(width));
        write_psd(dir.join(name), &meta, &Psd { omega: w.clone(), values })?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data"));
    std::fs::create_dir_all(&dir)?;
    let cfg = DeviceConfig::builtin("hexamer_paper")?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    omit(&dir, &cfg, &mut rng)?;
    psd(&dir, &cfg)?;
    resonance(&dir, &cfg, &mut rng)?;
    kerr(&dir, &cfg)?;
    noise_floor(&dir)?;
    g0(&dir, &cfg)?;
    asymmetry(&dir, &cfg, &mut rng)?;
    println!("wrote example data to {}", dir.display());
    Ok(())
}
