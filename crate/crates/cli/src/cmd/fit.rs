use crate::ctx::Ctx;
use hexamer::estimation::{
    calibrate_noise_floor, fit_kerr, fit_omit, fit_psd_montecarlo, g0_from_thermal_sweep, refer_added_noise,
    remove_background_narrow, AmplitudeBackground, FitResult, G0Calibration, KerrParams, MonteCarloOptions, OmitFixed,
    OmitGuess, PsdFixed, PsdGuess, PsdPriors, SidebandPoint,
};
use hexamer::io::{read_complex_trace, read_csv, read_psd, write_json, Metadata};
use hexamer::units::{hz_to_rad, rad_to_hz};
use hexamer::{Error, Result};
use serde_json::json;
use clap::ValueEnum;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Input file(s). Kerr fits take one reflection trace per drive power.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Mean cooperativity of the PSD starting point (default: the file's `cooperativity` metadata).
    #[arg(long)]
    pub cooperativity: Option<f64>,
    /// One-sigma relative uncertainty of κ_ex for the PSD Monte Carlo.
    #[arg(long, default_value_t = 0.1)]
    pub kappa_ex_rel: f64,
    /// Monte Carlo repetitions (default from the configuration).
    #[arg(long)]
    pub n_rep: Option<usize>,
    /// Kerr starting value, Hz per photon (default: the file's `kerr_guess_hz` metadata, else -1).
    #[arg(long, allow_hyphen_values = true)]
    pub kerr_guess_hz: Option<f64>,
    /// Source-to-device attenuation in dB for Kerr fits (default: `attenuation_db` metadata).
    #[arg(long)]
    pub attenuation_db: Option<f64>,
    /// Lowest temperature used in the g0 slope, K.
    #[arg(long, default_value_t = 0.0)]
    pub t_min: f64,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Model {
    Omit,
    Psd,
    Resonance,
    Kerr,
    NoiseFloor,
    G0,
}

fn meta_f64(meta: &Metadata, key: &str) -> Result<Option<f64>> {
    meta.get(key)
        .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("metadata '{key}' is not a number: {v}"))))
        .transpose()
}

fn require(meta: &Metadata, key: &str, flag: Option<f64>) -> Result<f64> {
    match flag {
        Some(v) => Ok(v),
        None => meta_f64(meta, key)?.ok_or_else(|| Error::Config(format!("input lacks '{key}' metadata; pass it as a flag"))),
    }
}

fn single(args: &Args) -> Result<&PathBuf> {
    match args.input.as_slice() {
        [p] => Ok(p),
        _ => Err(Error::Config("this model takes exactly one input file".into())),
    }
}

fn print_fit(f: &FitResult) {
    for ((n, v), (e, u)) in f.names.iter().zip(&f.values).zip(f.errors.iter().zip(&f.units)) {
        println!("  {n:<12} {v:>16.8e} ± {e:.2e} {u}");
    }
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let dev = ctx.config.device()?;
    let fixed_omega: Vec<f64> = dev.mechanics.iter().map(|m| m.frequency).collect();
    let fixed_gamma: Vec<f64> = dev.mechanics.iter().map(|m| m.damping).collect();
    let kappa_ex = dev.primary.kappa_ex;
    let model = args.model.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let mut meta = ctx.meta().with("model", &model);
    for p in &args.input {
        meta.set("input", p.display());
    }

    let report = match args.model {
        Model::Omit => {
            let (_, trace) = read_complex_trace(single(args)?)?;
            let fixed = OmitFixed { omega: fixed_omega, gamma: fixed_gamma, kappa_ex };
            let fit = fit_omit(&trace, &fixed, &OmitGuess::default())?.in_hz();
            print_fit(&fit);
            json!({ "fit": fit })
        }
        Model::Psd => {
            let (m, psd) = read_psd(single(args)?)?;
            let c_bar = require(&m, "cooperativity", args.cooperativity)?;
            let kappa = ctx.config.operating_kappa();
            let sys = dev.system(ctx.config.detuning()?, dev.photons_for_cooperativity(c_bar, kappa), Some(kappa))?;
            let chain = ctx.config.chain()?;
            let loss = &ctx.config.chain;
            let referred = refer_added_noise(loss.amplifier_noise, loss.loss_db, loss.loss_uncertainty_db)?;
            let priors = PsdPriors {
                kappa_ex_rel: args.kappa_ex_rel,
                n_add: chain.n_add,
                n_add_std: (referred.high - referred.low) / 2.0,
            };
            let opts = MonteCarloOptions {
                n_rep: args.n_rep.unwrap_or(ctx.config.run.n_rep),
                seed: ctx.seed,
                occupations: true,
                background: Some(chain.gain * (1.0 + chain.n_add)),
            };
            let fixed = PsdFixed { omega: fixed_omega, gamma: fixed_gamma, kappa_ex };
            let guess = PsdGuess { g: sys.g.clone(), kappa, detuning: sys.detuning, decoherence: None, cavity_bath: None };
            let mc = fit_psd_montecarlo(&psd, &fixed, &guess, &priors, &opts)?;
            let fit = mc.fit.in_hz();
            print_fit(&fit);
            println!("  bright-mode occupation {:.4} ± {:.4} quanta", mc.occupation_mean[0], mc.occupation_std[0]);
            json!({
                "fit": fit,
                "sem": mc.sem.iter().zip(&mc.fit.units).map(|(s, u)| if u == "rad/s" { rad_to_hz(*s) } else { *s }).collect::<Vec<_>>(),
                "occupation_mean": mc.occupation_mean,
                "occupation_std": mc.occupation_std,
                "failures": mc.failures,
            })
        }
        Model::Resonance => {
            let (_, trace) = read_complex_trace(single(args)?)?;
            let m = trace.values.len();
            let k = (m / 20).max(1);
            let level = trace.values[..k].iter().chain(&trace.values[m - k..]).map(|z| z.norm()).sum::<f64>() / (2 * k) as f64;
            let reference = trace.omega.iter().sum::<f64>() / m as f64;
            let removal = remove_background_narrow(&trace, &AmplitudeBackground::flat(level, reference), None)?;
            let fit = removal.fit.in_hz();
            print_fit(&fit);
            println!("  coupling regime: {:?}", removal.regime);
            json!({ "fit": fit, "regime": format!("{:?}", removal.regime) })
        }
        Model::Kerr => {
            let mut traces = Vec::new();
            let mut powers = Vec::new();
            let mut first = None;
            for p in &args.input {
                let (m, t) = read_complex_trace(p)?;
                powers.push(require(&m, "power_w", None)?);
                traces.push(t);
                first.get_or_insert(m);
            }
            let m0 = first.unwrap_or_default();
            let p = dev.primary;
            let guess = KerrParams {
                kappa_ex: p.kappa_ex,
                kappa_0: p.kappa_0,
                omega_c: p.frequency,
                kerr: hz_to_rad(args.kerr_guess_hz.or(meta_f64(&m0, "kerr_guess_hz")?).unwrap_or(-1.0)),
                attenuation_db: require(&m0, "attenuation_db", args.attenuation_db)?,
            };
            let fit = fit_kerr(&traces, &powers, &guess)?.in_hz();
            print_fit(&fit);
            json!({ "fit": fit, "powers_w": powers })
        }
        Model::NoiseFloor => {
            let t = read_csv(single(args)?)?;
            let omega = hz_to_rad(require(&t.meta, "freq_hz", None)?);
            let nf = calibrate_noise_floor(omega, &t.column("temperature_k")?, &t.column("power_w")?)?;
            let c = &ctx.config.chain;
            let r = refer_added_noise(nf.n_add_amplifier.max(0.0), c.loss_db, c.loss_uncertainty_db)?;
            println!("  gain {:.6e} ± {:.2e}, n_add^H {:.4} ± {:.4}", nf.gain, nf.gain_err, nf.n_add_amplifier, nf.n_add_err);
            println!("  1 + n_add referred to the device: {:.3} ({:.3} .. {:.3})", r.total, r.low, r.high);
            json!({
                "gain": nf.gain, "gain_err": nf.gain_err,
                "n_add_amplifier": nf.n_add_amplifier, "n_add_err": nf.n_add_err,
                "referred_total": r.total, "referred_low": r.low, "referred_high": r.high,
            })
        }
        Model::G0 => {
            let t = read_csv(single(args)?)?;
            let cols = ["temperature_k", "sideband_w", "pump_w", "cal_source_w", "cal_measured_w"]
                .map(|c| t.column(c))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let points: Vec<SidebandPoint> = (0..cols[0].len())
                .map(|i| SidebandPoint {
                    temperature: cols[0][i],
                    sideband_power: cols[1][i],
                    pump_source_power: cols[2][i],
                    cal_source_power: cols[3][i],
                    cal_measured_power: cols[4][i],
                })
                .collect();
            let p = dev.primary;
            let cal = G0Calibration {
                kappa_ex: p.kappa_ex,
                kappa_0: p.kappa_0,
                omega_c: p.frequency,
                omega_m: match meta_f64(&t.meta, "mechanical_freq_hz")? {
                    Some(f) => hz_to_rad(f),
                    None => dev.mean_frequency(),
                },
            };
            let g = g0_from_thermal_sweep(&points, &cal, args.t_min)?;
            println!("  g0 = {:.4} ± {:.4} Hz from {} points", rad_to_hz(g.g0), rad_to_hz(g.g0_err), g.points_used);
            json!({
                "g0_hz": rad_to_hz(g.g0), "g0_err_hz": rad_to_hz(g.g0_err),
                "slope": g.slope, "intercept": g.intercept, "points_used": g.points_used,
            })
        }
    };
    let path = ctx.path(&format!("fit_{}.json", model.replace('-', "_")));
    write_json(&path, &meta, &report)?;
    ctx.announce(&path);
    Ok(())
}
