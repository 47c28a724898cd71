use crate::ctx::Ctx;
use hexamer::circuit::{circuit_eigenmodes, TightBinding, AUXILIARY, MODE_ORDERS, PRIMARY};
use hexamer::io::{modeset_json, write_csv, write_json, Cell};
use hexamer::units::rad_to_hz;
use hexamer::Result;
use serde_json::json;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Also write the resolved configuration as JSON (re-ingestible with --config).
    #[arg(long)]
    pub emit_config: Option<PathBuf>,
}

fn label(k: usize) -> &'static str {
    match k {
        PRIMARY => "primary",
        AUXILIARY => "auxiliary",
        _ => "dark",
    }
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let p = ctx.config.circuit_params();
    let modes = circuit_eigenmodes(&p)?;
    let exact = TightBinding::exact(&p)?;
    let approx = TightBinding::first_order(&p);
    let tb = |t: &TightBinding| json!({ "omega0_hz": rad_to_hz(t.omega0), "j_hz": t.j.map(rad_to_hz) });

    let mut report = modeset_json(&modes);
    report["mode_order"] = json!(MODE_ORDERS);
    report["labels"] = json!((0..modes.frequencies.len()).map(label).collect::<Vec<_>>());
    report["tight_binding_exact"] = tb(&exact);
    report["tight_binding_first_order"] = tb(&approx);
    let path = ctx.path("modes.json");
    write_json(&path, &ctx.meta(), &report)?;
    ctx.announce(&path);

    let rows: Vec<Vec<Cell>> = (0..modes.frequencies.len())
        .map(|k| {
            vec![
                k.into(),
                Cell::Int(MODE_ORDERS[k] as i64),
                label(k).into(),
                rad_to_hz(modes.frequencies[k]).into(),
                rad_to_hz(modes.rates[k]).into(),
            ]
        })
        .collect();
    let path = ctx.path("modes.csv");
    write_csv(&path, &ctx.meta(), &["mode_index", "order", "label", "frequency_hz", "rate_hz"], &rows)?;
    ctx.announce(&path);

    if let Some(cfg) = &args.emit_config {
        std::fs::write(cfg, ctx.config.to_json())?;
        ctx.announce(cfg);
    }
    println!(
        "primary {:.6} GHz (rate {:.3} MHz), auxiliary {:.6} GHz (rate {:.3} MHz)",
        rad_to_hz(modes.frequencies[PRIMARY]) / 1e9,
        rad_to_hz(modes.rates[PRIMARY]) / 1e6,
        rad_to_hz(modes.frequencies[AUXILIARY]) / 1e9,
        rad_to_hz(modes.rates[AUXILIARY]) / 1e6,
    );
    Ok(())
}
