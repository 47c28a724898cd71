use crate::ctx::Ctx;
use hexamer::dynamics::{DeviceParams, System};
use hexamer::io::{write_csv, Cell};
use hexamer::linalg::CVec;
use hexamer::spectra::{collective_occupations, covariance_matrix, rate_equation_occupation};
use hexamer::units::rad_to_hz;
use hexamer::{Complex64, Result};
use rayon::prelude::*;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Ignore the configured cavity-heating curve (n_c = 0).
    #[arg(long)]
    pub no_heating: bool,
}

/// System and baths at mean cooperativity `c_bar`. The heating curve gives
/// the cavity occupation `n_c`; the internal bath that produces it through
/// `κ_0` is `n_c κ/κ_0`.
pub fn operating_point(dev: &DeviceParams, kappa: f64, detuning: f64, c_bar: f64, n_c: f64) -> Result<(System, hexamer::dynamics::Baths)> {
    let sys = dev.system(detuning, dev.photons_for_cooperativity(c_bar, kappa), Some(kappa))?;
    let mut baths = dev.baths();
    baths.cavity = if sys.kappa_0 > 0.0 { n_c * sys.kappa() / sys.kappa_0 } else { 0.0 };
    Ok((sys, baths))
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let dev = ctx.config.device()?;
    let kappa = ctx.config.operating_kappa();
    let detuning = ctx.config.detuning()?;
    let grid = ctx.grid()?;
    let n = dev.n();
    let uniform = CVec::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));

    let results: Vec<(Vec<Vec<Cell>>, Vec<Cell>, (f64, f64))> = grid
        .par_iter()
        .map(|&c_bar| -> Result<_> {
            let n_c = if args.no_heating { 0.0 } else { ctx.config.cavity_heating(c_bar) };
            let (sys, baths) = operating_point(&dev, kappa, detuning, c_bar, n_c)?;
            let occ = collective_occupations(&covariance_matrix(&sys, &baths)?)?;
            let rows = (0..n)
                .map(|k| {
                    let f = hexamer::linalg::inner(&uniform, &occ.vector(k)).norm_sqr();
                    vec![c_bar.into(), k.into(), occ.values[k].into(), f.into()]
                })
                .collect();
            let rate = rate_equation_occupation(&sys, &baths)?;
            let bright = vec![
                c_bar.into(),
                n_c.into(),
                rad_to_hz(sys.optical_damping().iter().sum::<f64>()).into(),
                occ.bright().into(),
                rate.into(),
                ((occ.bright() - rate) / rate).into(),
            ];
            Ok((rows, bright, (c_bar, occ.bright())))
        })
        .collect::<Result<_>>()?;

    let meta = ctx.meta().with("kappa_hz", rad_to_hz(kappa)).with("detuning_hz", rad_to_hz(detuning));
    let rows: Vec<Vec<Cell>> = results.iter().flat_map(|r| r.0.clone()).collect();
    let path = ctx.path("occupations.csv");
    write_csv(&path, &meta, &["cooperativity", "rank", "occupation_quanta", "fidelity_uniform"], &rows)?;
    ctx.announce(&path);
    let rows: Vec<Vec<Cell>> = results.iter().map(|r| r.1.clone()).collect();
    let path = ctx.path("bright.csv");
    write_csv(
        &path,
        &meta,
        &["cooperativity", "cavity_occupation", "collective_damping_hz", "covariance_quanta", "rate_equation_quanta", "relative_difference"],
        &rows,
    )?;
    ctx.announce(&path);

    let best = results.iter().map(|r| r.2).fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    println!("minimum bright-mode occupation {:.4} quanta at C = {:.4e}", best.1, best.0);
    Ok(())
}
