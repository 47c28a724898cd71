use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn hexamer(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hexamer"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = hexamer(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(out: &Path, args: &[&str]) -> i32 {
    hexamer(out, args).status.code().expect("exit code")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &serde_json::Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("{v} is not a number"))
}

/// `name=value` metadata line of a CSV header.
fn meta(path: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let prefix = format!("# {key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("{key} missing")).to_string()
}

fn fit_value(doc: &serde_json::Value, name: &str) -> f64 {
    let fit = &doc["data"]["fit"];
    let k = fit["names"].as_array().unwrap().iter().position(|n| n == name).unwrap();
    num(&fit["values"][k])
}

#[test]
fn circuit_report_and_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("emitted.json");
    let stdout = ok(&dir.path().join("a"), &["circuit", "--emit-config", cfg.to_str().unwrap()]);
    assert!(stdout.contains("primary 4.814"), "{stdout}");
    let report = read_json(&dir.path().join("a/modes.json"));
    let f: Vec<f64> = report["data"]["frequencies_hz"].as_array().unwrap().iter().map(num).collect();
    assert!((f[5] - 4.814e9).abs() < 1e6, "primary {}", f[5]);
    assert!((f[0] - 6.40e9).abs() < 10e6, "auxiliary {}", f[0]);

    ok(&dir.path().join("b"), &["--config", cfg.to_str().unwrap(), "circuit"]);
    let again = read_json(&dir.path().join("b/modes.json"));
    assert_eq!(report["data"], again["data"]);
    assert_eq!(report["metadata"]["config_sha256"], again["metadata"]["config_sha256"]);
}

#[test]
fn uncoupled_ring_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(include_str!("../../core/data/hexamer_paper.json")).unwrap();
    cfg["circuit"]["mutual_inductance_h"] = serde_json::json!([0.0, 0.0, 0.0]);
    let path = dir.path().join("flat.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    ok(dir.path(), &["--config", path.to_str().unwrap(), "circuit"]);
    let report = read_json(&dir.path().join("modes.json"));
    let f: Vec<f64> = report["data"]["frequencies_hz"].as_array().unwrap().iter().map(num).collect();
    for x in &f {
        assert!((x / f[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    // configuration
    assert_eq!(code(out, &["--config", "no_such_device", "circuit"]), 2);
    assert_eq!(code(out, &["frobnicate"]), 2);
    let bad = out.join("bad.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(include_str!("../../core/data/hexamer_paper.json")).unwrap();
    cfg["cavities"]["primary"]["kappa_hz"] = serde_json::json!(50e3);
    std::fs::write(&bad, cfg.to_string()).unwrap();
    assert_eq!(code(out, &["--config", bad.to_str().unwrap(), "circuit"]), 2);
    // io
    assert_eq!(code(out, &["fit", "--model", "omit", "--input", "/nonexistent/trace.csv"]), 1);
    // numerical: sideband power falling with temperature
    let g0 = out.join("falling.csv");
    std::fs::write(
        &g0,
        "temperature_k,sideband_w,pump_w,cal_source_w,cal_measured_w\n0.1,3e-12,1e-6,1e-9,3e-3\n0.2,2e-12,1e-6,1e-9,3e-3\n0.3,1e-12,1e-6,1e-9,3e-3\n",
    )
    .unwrap();
    assert_eq!(code(out, &["fit", "--model", "g0", "--input", g0.to_str().unwrap()]), 3);
    // fit: single Lorentzian sidebands offer no resolved doublet
    let a = data("asym_anti_stokes.csv");
    let s = data("asym_stokes.csv");
    let args = ["asym", "--regime", "strong", "--anti-stokes", a.to_str().unwrap(), "--stokes", s.to_str().unwrap()];
    assert_eq!(code(out, &args), 4);
    assert_eq!(code(out, &["--help"]), 0);
}

#[test]
fn disorder_run_is_reproducible_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        ok(&out, &["--seed", seed, "disorder", "--sigma", "1e-3", "--samples", "300"]);
        std::fs::read_to_string(out.join("disorder_microwave.csv")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
    assert!(a.contains("# seed=7\n") && a.contains("# config_sha256="));
}

#[test]
fn omit_fit_recovers_the_shipped_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = data("omit_trace.csv");
    ok(dir.path(), &["fit", "--model", "omit", "--input", trace.to_str().unwrap()]);
    let doc = read_json(&dir.path().join("fit_omit.json"));
    let truth: Vec<f64> = meta(&trace, "truth_g_hz").split(';').map(|v| v.parse().unwrap()).collect();
    for (i, g) in truth.iter().enumerate() {
        let fitted = fit_value(&doc, &format!("g_{}", i + 1));
        assert!((fitted / g - 1.0).abs() < 1e-3, "g_{}: {fitted} vs {g}", i + 1);
    }
    let kappa: f64 = meta(&trace, "truth_kappa_hz").parse().unwrap();
    assert!((fit_value(&doc, "kappa") / kappa - 1.0).abs() < 1e-4);
}

#[test]
fn calibration_fits_recover_the_shipped_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fit", "--model", "noise-floor", "--input", data("noise_floor.csv").to_str().unwrap()]);
    let nf = read_json(&dir.path().join("fit_noise_floor.json"));
    assert!((num(&nf["data"]["n_add_amplifier"]) - 5.83).abs() < 1e-8);
    assert!((num(&nf["data"]["referred_total"]) - 9.0).abs() < 0.01);
    ok(dir.path(), &["fit", "--model", "g0", "--input", data("g0_sweep.csv").to_str().unwrap()]);
    let g0 = read_json(&dir.path().join("fit_g0.json"));
    assert!((num(&g0["data"]["g0_hz"]) - 1.3).abs() < 1e-9);
    let kerr: Vec<String> = (1..=3).map(|k| data(&format!("kerr_p{k}.csv")).to_str().unwrap().to_string()).collect();
    let mut args = vec!["fit", "--model", "kerr", "--input"];
    args.extend(kerr.iter().map(String::as_str));
    ok(dir.path(), &args);
    let doc = read_json(&dir.path().join("fit_kerr.json"));
    assert!((fit_value(&doc, "kerr") / 1.5 - 1.0).abs() < 1e-6);
}

#[test]
fn asymmetry_of_the_shipped_pair() {
    let dir = tempfile::tempdir().unwrap();
    let a = data("asym_anti_stokes.csv");
    let s = data("asym_stokes.csv");
    ok(dir.path(), &["asym", "--anti-stokes", a.to_str().unwrap(), "--stokes", s.to_str().unwrap()]);
    let doc = read_json(&dir.path().join("asym.json"));
    let truth: f64 = meta(&a, "truth_n_m").parse().unwrap();
    let n = num(&doc["data"]["result"]["n_m"]);
    assert!((n / truth - 1.0).abs() < 0.03, "n_m = {n}");
}

#[test]
fn bare_cavity_trace_at_zero_power() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--grid", "10:100:2:log", "omit", "--trace", "0"]);
    let text = std::fs::read_to_string(dir.path().join("omit_trace_C0.csv")).unwrap();
    let (kex, k) = (25e3, 28e3);
    let det: f64 = meta(&dir.path().join("omit_trace_C0.csv"), "detuning_hz").parse().unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        // 1 − κ_ex/(κ/2 − i(f − Δ)) in Hz units
        let (a, b) = (k / 2.0, -(v[0] - det));
        let d = a * a + b * b;
        let (re, im) = (1.0 - kex * a / d, kex * b / d);
        assert!((v[1] - re).abs() < 1e-9 && (v[2] - im).abs() < 1e-9);
    }
}

#[test]
fn cooling_curve_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let col = |file: &Path, name: &str| -> Vec<f64> {
        let text = std::fs::read_to_string(file).unwrap();
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
        lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
    };
    ok(&dir.path().join("cold"), &["--grid", "1e3:1e5:9:log", "cool", "--no-heating"]);
    let n = col(&dir.path().join("cold/bright.csv"), "covariance_quanta");
    assert!(n.windows(2).all(|w| w[1] < w[0]), "{n:?}");
    ok(&dir.path().join("hot"), &["--grid", "10:1e5:21:log", "cool"]);
    let n = col(&dir.path().join("hot/bright.csv"), "covariance_quanta");
    let (k, min) = n.iter().cloned().enumerate().fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    assert!(min < 1.0 && k > 0 && k < n.len() - 1, "minimum {min} at {k}");
    assert!(n[0] > 1.0 && *n.last().unwrap() > 1.0);
    // weak coupling and collective: rate equation agrees
    let c = col(&dir.path().join("hot/bright.csv"), "cooperativity");
    let rel = col(&dir.path().join("hot/bright.csv"), "relative_difference");
    for (c, r) in c.iter().zip(&rel) {
        if (1e4..=3e4).contains(c) {
            assert!(r.abs() < 0.02, "C = {c}: {r}");
        }
    }
}

#[test]
fn modeshape_runs() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&dir.path().join("bright"), &["modeshape"]);
    assert!(stdout.contains("(bright)"));
    let doc = read_json(&dir.path().join("bright/modeshape.json"));
    assert!(num(&doc["data"]["fidelity_theory"]) > 0.999);
    let ring = std::fs::read_to_string(dir.path().join("bright/ringdown.csv")).unwrap();
    assert!(ring.contains("t_s,i,q\n"));

    // a weakly coupled mode stays on one drum
    ok(&dir.path().join("dark"), &["modeshape", "--mode", "4", "--zero-noise"]);
    let doc = read_json(&dir.path().join("dark/modeshape.json"));
    let eta: Vec<f64> = doc["data"]["extracted"]["eta"].as_array().unwrap().iter().map(num).collect();
    assert!(eta.iter().cloned().fold(0.0, f64::max) > 0.99, "{eta:?}");

    // deep in the collective regime the bright mode is nearly uniform
    ok(&dir.path().join("collective"), &["modeshape", "--cooperativity", "2e5"]);
    let doc = read_json(&dir.path().join("collective/modeshape.json"));
    assert!(num(&doc["data"]["fidelity_uniform"]) > 0.95);
}
