use crate::ctx::{parse_list, Ctx};
use hexamer::dynamics::{collective_coupling, collective_eigenmodes, omit_reflection, regime_thresholds, DeviceParams};
use hexamer::io::{write_complex_trace, write_csv, Cell};
use hexamer::spectra::ComplexTrace;
use hexamer::units::rad_to_hz;
use hexamer::{Error, Result};
use rayon::prelude::*;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Mean cooperativities at which reflection traces are written (0 = bare cavity).
    #[arg(long, default_value = "0,100")]
    pub trace: String,
    /// Base points per trace; dense clusters are added around each oscillator.
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
}

/// Probe grid: a uniform sweep over ±3κ around the mean mechanical
/// frequency plus a dense cluster of ±10 linewidths at every oscillator.
pub fn probe_grid(dev: &DeviceParams, kappa: f64, extra_width: f64, points: usize) -> Vec<f64> {
    let mean = dev.mean_frequency();
    let span = 3.0 * kappa;
    let mut w: Vec<f64> = (0..points).map(|k| mean - span + 2.0 * span * k as f64 / (points - 1).max(1) as f64).collect();
    for m in &dev.mechanics {
        let half = 10.0 * (m.damping + extra_width);
        w.extend((0..201).map(|k| m.frequency - half + 2.0 * half * k as f64 / 200.0));
    }
    w.sort_by(f64::total_cmp);
    w.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    w
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let dev = ctx.config.device()?;
    let kappa = ctx.config.operating_kappa();
    let detuning = ctx.config.detuning()?;
    let grid = ctx.grid()?;
    let mean = dev.mean_frequency();
    let g0: Vec<f64> = dev.mechanics.iter().map(|m| m.g0).collect();

    let sweeps: Vec<(f64, Vec<Vec<Cell>>, Vec<Cell>)> = grid
        .par_iter()
        .map(|&c_bar| -> Result<_> {
            let photons = dev.photons_for_cooperativity(c_bar, kappa);
            let sys = dev.system(detuning, photons, Some(kappa))?;
            let modes = collective_eigenmodes(&sys)?;
            let bright = modes.bright(&sys.g);
            let cav = modes.cavity_like();
            let rows = modes
                .modes
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let kind = if k == cav { "cavity" } else if k == bright { "bright" } else { "mechanical" };
                    vec![
                        c_bar.into(),
                        k.into(),
                        kind.into(),
                        rad_to_hz(m.linewidth).into(),
                        rad_to_hz(m.frequency - mean).into(),
                        m.cavity_weight.into(),
                    ]
                })
                .collect();
            let psi = modes.modes[bright]
                .mechanical()
                .ok_or_else(|| Error::Numerical("bright mode has no mechanical part".into()))?;
            let cm = collective_coupling(&psi, &g0)?;
            let xi = vec![c_bar.into(), photons.into(), rad_to_hz(cm.g_col * photons.sqrt()).into(), cm.xi.into()];
            Ok((c_bar, rows, xi))
        })
        .collect::<Result<_>>()?;

    let meta = ctx.meta().with("kappa_hz", rad_to_hz(kappa)).with("detuning_hz", rad_to_hz(detuning));
    let rows: Vec<Vec<Cell>> = sweeps.iter().flat_map(|s| s.1.clone()).collect();
    let path = ctx.path("eigen_sweep.csv");
    write_csv(
        &path,
        &meta,
        &["cooperativity", "mode_index", "kind", "linewidth_hz", "freq_offset_hz", "cavity_weight"],
        &rows,
    )?;
    ctx.announce(&path);
    let rows: Vec<Vec<Cell>> = sweeps.iter().map(|s| s.2.clone()).collect();
    let path = ctx.path("xi.csv");
    write_csv(&path, &meta, &["cooperativity", "photons", "g_col_hz", "xi"], &rows)?;
    ctx.announce(&path);

    let th = regime_thresholds(kappa, dev.frequency_spread(), dev.mean_g0_sq(), dev.n())?;
    println!("collective regime at n_p = {:.4e}, strong coupling at n_p = {:.4e}", th.collective, th.strong);

    for c_bar in parse_list(&args.trace)? {
        if c_bar < 0.0 {
            return Err(Error::Config("trace cooperativity must be non-negative".into()));
        }
        let photons = dev.photons_for_cooperativity(c_bar, kappa);
        let sys = dev.system(detuning, photons, Some(kappa))?;
        let gopt = sys.optical_damping().into_iter().fold(0.0, f64::max);
        let omega = probe_grid(&dev, kappa, gopt, args.points.max(2));
        let values = omit_reflection(&sys, &omega)?;
        let mut m = meta.clone().with("cooperativity", c_bar).with("photons", photons);
        m.set("g_hz", sys.g.iter().map(|g| format!("{:.9e}", rad_to_hz(*g))).collect::<Vec<_>>().join(";"));
        let path = ctx.path(&format!("omit_trace_C{c_bar}.csv"));
        write_complex_trace(&path, &m, &ComplexTrace { omega, values })?;
        ctx.announce(&path);
    }
    Ok(())
}
