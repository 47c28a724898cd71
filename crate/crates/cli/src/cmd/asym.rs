use super::cool::operating_point;
use crate::ctx::Ctx;
use hexamer::estimation::{
    sideband_asymmetry_individual, sideband_asymmetry_strong, AsymmetryInputs, AsymmetryResult, Lineshape,
    SidebandRates, StrongGuess,
};
use hexamer::io::{read_psd, write_csv, write_json, Cell, Metadata};
use hexamer::spectra::{collective_occupations, covariance_matrix, readout_spectra, Psd};
use hexamer::units::{hz_to_rad, rad_to_hz};
use hexamer::{Error, Result};
use serde_json::json;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Anti-Stokes PSD (freq_hz = offset from the sideband center).
    #[arg(long, requires = "stokes")]
    pub anti_stokes: Option<PathBuf>,
    /// Stokes PSD on the same offset axis.
    #[arg(long, requires = "anti_stokes")]
    pub stokes: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "individual")]
    pub regime: Regime,
    /// Lineshape of individual-regime sidebands.
    #[arg(long, value_enum, default_value = "lorentzian")]
    pub lineshape: Shape,
    /// Gaussian width (Hz, standard deviation) for Voigt sidebands.
    #[arg(long, default_value_t = 0.0)]
    pub voigt_sigma_hz: f64,
    /// Readout-cavity occupation (default: `n_aux` metadata, else 0).
    #[arg(long)]
    pub n_aux: Option<f64>,
    /// Calibrated Γ+/Γ− (default: nominal rates from the auxiliary cavity).
    #[arg(long)]
    pub rate_ratio: Option<f64>,
    /// Readout pump detuning from the auxiliary cavity, Hz (default: `aux_detuning_hz` metadata, else 0).
    #[arg(long, allow_hyphen_values = true)]
    pub aux_detuning_hz: Option<f64>,
    /// Without input files: mean cooperativity of the synthesized strong-coupling spectra.
    #[arg(long, default_value_t = 8e4)]
    pub cooperativity: f64,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Regime {
    Individual,
    Strong,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Shape {
    Lorentzian,
    Voigt,
}

fn meta_f64(meta: &Metadata, key: &str) -> Result<Option<f64>> {
    meta.get(key)
        .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("metadata '{key}' is not a number: {v}"))))
        .transpose()
}

/// Half the distance between the two highest local maxima.
fn doublet_half_splitting(p: &Psd) -> Option<f64> {
    let mut peaks: Vec<(f64, f64)> = p
        .values
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] && w[1] >= w[2])
        .map(|(k, w)| (p.omega[k + 1], w[1]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    match peaks.as_slice() {
        [a, b, ..] => Some((a.0 - b.0).abs() / 2.0),
        _ => None,
    }
}

fn result_json(r: &AsymmetryResult) -> serde_json::Value {
    json!({ "n_m": r.n_m, "anti_stokes_area": r.anti_area, "stokes_area": r.stokes_area, "rate_ratio": r.rate_ratio })
}

fn analyse(inputs: &AsymmetryInputs, args: &Args, kappa: f64) -> Result<(AsymmetryResult, serde_json::Value)> {
    Ok(match args.regime {
        Regime::Individual => {
            let shape = match args.lineshape {
                Shape::Lorentzian => Lineshape::Lorentzian,
                Shape::Voigt => Lineshape::Voigt { sigma: hz_to_rad(args.voigt_sigma_hz) },
            };
            let r = sideband_asymmetry_individual(inputs, shape)?;
            (r, json!({}))
        }
        Regime::Strong => {
            let g = doublet_half_splitting(&inputs.stokes)
                .ok_or_else(|| Error::Unidentifiable("no doublet found in the Stokes spectrum".into()))?;
            let fit = sideband_asymmetry_strong(inputs, &StrongGuess { g, kappa, detuning: 0.0 })?;
            let extra = json!({
                "g_hz": rad_to_hz(fit.g), "kappa_hz": rad_to_hz(fit.kappa), "detuning_hz": rad_to_hz(fit.detuning),
                "fit": fit.fit.in_hz(),
            });
            (fit.result, extra)
        }
    })
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let dev = ctx.config.device()?;
    let kappa = ctx.config.operating_kappa();
    let meta = ctx.meta().with("regime", format!("{:?}", args.regime).to_lowercase());
    let doc = match (&args.anti_stokes, &args.stokes) {
        (Some(a), Some(s)) => {
            let (ma, anti) = read_psd(a)?;
            let (_, stokes) = read_psd(s)?;
            let n_aux = match args.n_aux {
                Some(v) => v,
                None => meta_f64(&ma, "n_aux")?.unwrap_or(0.0),
            };
            let rates = match args.rate_ratio {
                Some(ratio) => SidebandRates::Calibrated { ratio },
                None => {
                    let det = args.aux_detuning_hz.or(meta_f64(&ma, "aux_detuning_hz")?).unwrap_or(0.0);
                    let omega_m = meta_f64(&ma, "mechanical_freq_hz")?.map(hz_to_rad).unwrap_or(dev.mean_frequency());
                    // the ratio does not depend on the readout coupling
                    SidebandRates::Nominal { g: 1.0, kappa: dev.auxiliary.kappa(), omega_m, detuning: hz_to_rad(det) }
                }
            };
            let inputs = AsymmetryInputs { stokes, anti_stokes: anti, rates, n_aux };
            let (r, extra) = analyse(&inputs, args, kappa)?;
            println!("n_m = {:.4} quanta (Γ+/Γ− = {:.6}, n_aux = {n_aux})", r.n_m, r.rate_ratio);
            json!({ "result": result_json(&r), "n_aux": n_aux, "details": extra })
        }
        _ => {
            if !(args.cooperativity > 0.0) {
                return Err(Error::Config("cooperativity must be positive".into()));
            }
            let detuning = ctx.config.detuning()?;
            let n_c = ctx.config.cavity_heating(args.cooperativity);
            let (sys, baths) = operating_point(&dev, kappa, detuning, args.cooperativity, n_c)?;
            let occ = collective_occupations(&covariance_matrix(&sys, &baths)?)?;
            let mean = dev.mean_frequency();
            let g_col = sys.g.iter().map(|g| g * g).sum::<f64>().sqrt();
            let half = 6.0 * g_col.max(kappa);
            let omegas: Vec<f64> = (0..6001).map(|k| mean - half + 2.0 * half * k as f64 / 6000.0).collect();
            let (normal, anti) = readout_spectra(&sys, &baths, &vec![1.0; sys.n()], &omegas)?;
            let shift = |p: Psd| Psd { omega: p.omega.iter().map(|w| w - mean).collect(), values: p.values };
            let inputs = AsymmetryInputs {
                anti_stokes: shift(normal),
                stokes: shift(anti),
                rates: SidebandRates::Calibrated { ratio: 1.0 },
                n_aux: 0.0,
            };
            let rows: Vec<Vec<Cell>> = (0..omegas.len())
                .map(|k| {
                    vec![
                        rad_to_hz(inputs.anti_stokes.omega[k]).into(),
                        inputs.anti_stokes.values[k].into(),
                        inputs.stokes.values[k].into(),
                    ]
                })
                .collect();
            let m = meta.clone().with("cooperativity", args.cooperativity);
            let path = ctx.path("asym_spectra.csv");
            write_csv(&path, &m, &["offset_hz", "anti_stokes", "stokes"], &rows)?;
            ctx.announce(&path);
            let (r, extra) = analyse(&inputs, args, kappa)?;
            let reference = occ.bright();
            println!(
                "n_m = {:.4} from the sideband ratio, {:.4} from the covariance ({:+.2}%)",
                r.n_m,
                reference,
                100.0 * (r.n_m / reference - 1.0)
            );
            json!({
                "cooperativity": args.cooperativity,
                "result": result_json(&r),
                "covariance_occupation": reference,
                "relative_difference": r.n_m / reference - 1.0,
                "details": extra,
            })
        }
    };
    let path = ctx.path("asym.json");
    write_json(&path, &meta, &doc)?;
    ctx.announce(&path);
    Ok(())
}
