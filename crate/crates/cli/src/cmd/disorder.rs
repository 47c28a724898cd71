use crate::ctx::{parse_list, Ctx};
use hexamer::disorder::{
    infer_sigma, mech_disorder_sweep, mw_disorder_statistics, DisorderSpec, DisorderTarget, Histogram, Summary,
};
use hexamer::io::{write_csv, write_json, Cell};
use hexamer::units::{hz_to_rad, rad_to_hz};
use hexamer::{Error, Result};
use serde_json::json;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_enum, default_value = "microwave")]
    pub target: Target,
    /// Relative disorder strengths (comma separated); default from the configuration.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Draws per strength; default from the configuration.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Infer σ from measured pair splittings `upper_hz,lower_hz` (microwave only).
    #[arg(long)]
    pub infer: Option<String>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Target {
    Microwave,
    Mechanical,
}

fn row(sigma: f64, c: Option<f64>, name: &str, s: &Summary, scale: f64) -> Vec<Cell> {
    let mut r = vec![sigma.into()];
    if let Some(c) = c {
        r.push(c.into());
    }
    r.push(name.into());
    r.extend([s.mean * scale, s.std * scale, s.p5 * scale, s.p95 * scale].map(Cell::from));
    r
}

fn histogram_json(h: &Histogram) -> serde_json::Value {
    json!({ "edges": h.edges, "counts": h.counts })
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let sigmas = match &args.sigma {
        Some(s) => parse_list(s)?,
        None => ctx.config.run.disorder_sigma.clone(),
    };
    if sigmas.is_empty() {
        return Err(Error::Config("no disorder strengths given".into()));
    }
    let samples = args.samples.unwrap_or(ctx.config.run.disorder_samples);
    let hz = rad_to_hz(1.0);
    match args.target {
        Target::Microwave => {
            let circuit = ctx.config.circuit_params();
            let mut rows = Vec::new();
            let mut hists = Vec::new();
            for &sigma in &sigmas {
                let spec = DisorderSpec { target: DisorderTarget::Microwave, sigma, samples, seed: ctx.seed };
                let st = mw_disorder_statistics(&circuit, &spec)?;
                for (k, s) in st.frequencies.iter().enumerate() {
                    rows.push(row(sigma, None, &format!("frequency_{k}_hz"), s, hz));
                }
                rows.push(row(sigma, None, "splitting_upper_hz", &st.splitting_upper, hz));
                rows.push(row(sigma, None, "splitting_lower_hz", &st.splitting_lower, hz));
                rows.push(row(sigma, None, "pair_mean_upper_hz", &st.pair_mean_upper, hz));
                rows.push(row(sigma, None, "pair_mean_lower_hz", &st.pair_mean_lower, hz));
                rows.push(row(sigma, None, "fidelity_primary", &st.fidelity_primary, 1.0));
                rows.push(row(sigma, None, "fidelity_auxiliary", &st.fidelity_auxiliary, 1.0));
                println!(
                    "sigma {sigma:.1e}: primary fidelity {:.6}, auxiliary {:.6}, splittings {:.3} / {:.3} MHz",
                    st.fidelity_primary.mean,
                    st.fidelity_auxiliary.mean,
                    st.splitting_upper.mean * hz / 1e6,
                    st.splitting_lower.mean * hz / 1e6
                );
                hists.push(json!({
                    "sigma": sigma,
                    "nominal_hz": st.nominal.iter().map(|w| w * hz).collect::<Vec<_>>(),
                    "amplitudes_primary": histogram_json(&st.amplitudes_primary),
                    "amplitudes_auxiliary": histogram_json(&st.amplitudes_auxiliary),
                }));
            }
            let meta = ctx.meta().with("target", "microwave").with("samples", samples);
            let path = ctx.path("disorder_microwave.csv");
            write_csv(&path, &meta, &["sigma", "statistic", "mean", "std", "p5", "p95"], &rows)?;
            ctx.announce(&path);
            let mut doc = json!({ "histograms": hists });
            if let Some(spl) = &args.infer {
                let v = parse_list(spl)?;
                let [up, low] = v[..] else {
                    return Err(Error::Config("--infer expects two splittings: upper_hz,lower_hz".into()));
                };
                let est = infer_sigma(&circuit, hz_to_rad(up), hz_to_rad(low), samples, ctx.seed)?;
                println!("inferred sigma {:.3e} (upper {:.3e}, lower {:.3e})", est.combined, est.from_upper, est.from_lower);
                doc["inferred_sigma"] =
                    json!({ "from_upper": est.from_upper, "from_lower": est.from_lower, "combined": est.combined });
            }
            let path = ctx.path("disorder_microwave.json");
            write_json(&path, &meta, &doc)?;
            ctx.announce(&path);
        }
        Target::Mechanical => {
            if args.infer.is_some() {
                return Err(Error::Config("--infer applies to microwave disorder only".into()));
            }
            let dev = ctx.config.device()?;
            let kappa = ctx.config.operating_kappa();
            let grid = ctx.grid()?;
            let mut rows = Vec::new();
            let mut transitions = Vec::new();
            for &sigma in &sigmas {
                let spec = DisorderSpec { target: DisorderTarget::Mechanical, sigma, samples, seed: ctx.seed };
                let sw = mech_disorder_sweep(&dev, kappa, &spec, &grid)?;
                for (i, &c) in sw.cooperativity.iter().enumerate() {
                    for (k, s) in sw.linewidths[i].iter().enumerate() {
                        rows.push(row(sigma, Some(c), &format!("linewidth_{k}_hz"), s, hz));
                    }
                    rows.push(row(sigma, Some(c), "bright_linewidth_hz", &sw.bright_linewidth[i], hz));
                    rows.push(row(sigma, Some(c), "bright_offset_hz", &sw.bright_offset[i], hz));
                    rows.push(row(sigma, Some(c), "reference_linewidth_hz", &Summary::from_samples(&[sw.reference[i]]), hz));
                }
                let median = sw.median_transition();
                match median {
                    Some(c) => println!("sigma {sigma:.1e}: median collective transition at C = {c:.4e}"),
                    None => println!("sigma {sigma:.1e}: no collective transition inside the grid"),
                }
                transitions.push(json!({ "sigma": sigma, "median": median, "draws": sw.transitions }));
            }
            let meta = ctx.meta().with("target", "mechanical").with("samples", samples);
            let path = ctx.path("disorder_mechanical.csv");
            write_csv(&path, &meta, &["sigma", "cooperativity", "statistic", "mean", "std", "p5", "p95"], &rows)?;
            ctx.announce(&path);
            let path = ctx.path("disorder_mechanical.json");
            write_json(&path, &meta, &json!({ "transitions": transitions }))?;
            ctx.announce(&path);
        }
    }
    Ok(())
}
