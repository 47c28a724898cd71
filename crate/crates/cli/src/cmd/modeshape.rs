use crate::ctx::Ctx;
use hexamer::disorder::draw_rng;
use hexamer::dynamics::{collective_eigenmodes, ModeShape};
use hexamer::io::{write_json, write_ringdown};
use hexamer::ringdown::{simulate_modeshape_measurement, ProtocolSettings};
use hexamer::units::rad_to_hz;
use hexamer::{Complex64, Error, Result};
use serde_json::json;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Mean cooperativity during the selective drive.
    #[arg(long, default_value_t = 100.0)]
    pub cooperativity: f64,
    /// Collective mode index (modes sorted by linewidth, broadest first); default: the bright mode.
    #[arg(long)]
    pub mode: Option<usize>,
    /// Ringdown signal-to-noise ratio in dB; default from the configuration.
    #[arg(long)]
    pub snr: Option<f64>,
    /// Synthesize without detector noise.
    #[arg(long, conflicts_with = "snr")]
    pub zero_noise: bool,
    /// Ringdown sample rate in Hz.
    #[arg(long, default_value_t = 50e3)]
    pub sample_rate: f64,
}

fn shape_json(s: &ModeShape) -> serde_json::Value {
    json!({ "eta": s.eta, "phi_rad": s.phi, "reference_index": s.reference })
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    if !(args.cooperativity > 0.0) {
        return Err(Error::Config("modeshape measurement needs a positive cooperativity".into()));
    }
    let dev = ctx.config.device()?;
    let kappa = ctx.config.operating_kappa();
    let sys = dev.system(ctx.config.detuning()?, dev.photons_for_cooperativity(args.cooperativity, kappa), Some(kappa))?;
    let modes = collective_eigenmodes(&sys)?;
    let bright = modes.bright(&sys.g);
    let mode = args.mode.unwrap_or(bright);
    if mode >= modes.modes.len() {
        return Err(Error::Config(format!("mode index {mode} out of range 0..{}", modes.modes.len())));
    }
    let snr = if args.zero_noise { None } else { Some(args.snr.unwrap_or(ctx.config.run.snr_db)) };
    let settings = ProtocolSettings { snr_db: snr, sample_rate: args.sample_rate, ..ProtocolSettings::default() };
    let out = simulate_modeshape_measurement(&sys, mode, &settings, &mut draw_rng(ctx.seed, 0))?;

    let n = sys.n();
    let uniform = ModeShape::from_amplitudes(&vec![Complex64::new(1.0, 0.0); n])?;
    let fidelity_theory = out.fit.shape.fidelity(&out.theory);
    let fidelity_uniform = out.fit.shape.fidelity(&uniform);
    let peaks: Vec<_> = out
        .fit
        .peaks
        .iter()
        .map(|p| {
            json!({
                "amplitude_re": p.amplitude.re,
                "amplitude_im": p.amplitude.im,
                "amplitude_stderr": p.amplitude_stderr,
                "frequency_hz": rad_to_hz(p.frequency),
                "rate_hz": rad_to_hz(p.rate),
                "converged": p.converged,
            })
        })
        .collect();
    let report = json!({
        "cooperativity": args.cooperativity,
        "mode_index": mode,
        "is_bright": mode == bright,
        "cavity_weight": modes.modes[mode].cavity_weight,
        "snr_db": snr,
        "extracted": shape_json(&out.fit.shape),
        "theory": shape_json(&out.theory),
        "fidelity_theory": fidelity_theory,
        "fidelity_uniform": fidelity_uniform,
        "peaks": peaks,
    });
    let meta = ctx.meta().with("mode_index", mode).with("cooperativity", args.cooperativity);
    let path = ctx.path("modeshape.json");
    write_json(&path, &meta, &report)?;
    ctx.announce(&path);
    let path = ctx.path("ringdown.csv");
    write_ringdown(&path, &meta, &out.record)?;
    ctx.announce(&path);
    println!(
        "mode {mode}{}: fidelity {:.6} vs eigenvector, {:.6} vs uniform shape",
        if mode == bright { " (bright)" } else { "" },
        fidelity_theory,
        fidelity_uniform
    );
    Ok(())
}
