use super::*;
use crate::dynamics::{omit_reflection, Baths, System};
use crate::linalg::c;
use crate::spectra::{
    collective_occupations, covariance_matrix, output_psd, readout_spectra, ComplexTrace, MeasurementChain, Psd,
};
use crate::units::{hz_to_rad, HBAR, KB};
use crate::Error;
use approx::assert_relative_eq;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

const OFFSETS_HZ: [f64; 6] = [-5190.0, -1300.0, -680.0, 1630.0, 2180.0, 3370.0];

/// Six oscillators with broad (50 Hz) intrinsic lines so the transparency
/// windows are resolved on a few thousand points.
fn test_system(c_bar: f64) -> System {
    let kappa = hz_to_rad(28e3);
    let gamma = vec![hz_to_rad(50.0); 6];
    let g = (0..6).map(|i| (c_bar * (0.8 + 0.08 * i as f64) * kappa * gamma[i] / 4.0).sqrt()).collect();
    let omega: Vec<f64> = OFFSETS_HZ.iter().map(|o| hz_to_rad(1.991e6 + o)).collect();
    System {
        detuning: omega.iter().sum::<f64>() / 6.0 + hz_to_rad(700.0),
        kappa_ex: hz_to_rad(25e3),
        kappa_0: hz_to_rad(3e3),
        omega,
        gamma,
        g,
    }
}

fn grid(center: f64, half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| center - half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn omit_fixed(sys: &System) -> OmitFixed {
    OmitFixed { omega: sys.omega.clone(), gamma: sys.gamma.clone(), kappa_ex: sys.kappa_ex }
}

#[test]
fn omit_zero_noise_round_trip() {
    let sys = test_system(20.0);
    let w = grid(hz_to_rad(1.991e6), 3.0 * sys.kappa(), 4001);
    let trace = ComplexTrace { values: omit_reflection(&sys, &w).unwrap(), omega: w };
    let fit = fit_omit(&trace, &omit_fixed(&sys), &OmitGuess { g: None, kappa: None, detuning: None }).unwrap();
    for i in 0..6 {
        assert_relative_eq!(fit.values[i], sys.g[i], max_relative = 1e-6);
    }
    assert_relative_eq!(fit.get("kappa").unwrap(), sys.kappa(), max_relative = 1e-6);
    assert_relative_eq!(fit.get("detuning").unwrap(), sys.detuning, max_relative = 1e-6);
    let back = omit_system(&fit, &omit_fixed(&sys));
    assert_relative_eq!(back.kappa_0, sys.kappa_0, max_relative = 1e-5);
    assert!(fit.converged);
}

#[test]
fn omit_with_one_percent_noise() {
    let sys = test_system(20.0);
    let w = grid(hz_to_rad(1.991e6), 3.0 * sys.kappa(), 4001);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values = omit_reflection(&sys, &w)
        .unwrap()
        .into_iter()
        .map(|s| s + 0.01 * c(normal(&mut rng), normal(&mut rng)))
        .collect();
    let trace = ComplexTrace { omega: w, values };
    let fit = fit_omit(&trace, &omit_fixed(&sys), &OmitGuess { g: None, kappa: None, detuning: None }).unwrap();
    for i in 0..6 {
        let rel = (fit.values[i] - sys.g[i]).abs() / sys.g[i];
        assert!(rel < 0.02, "g_{}: {rel:.4}", i + 1);
        assert!(fit.errors[i] > 0.0 && fit.errors[i] < 0.02 * sys.g[i]);
    }
}

#[test]
fn fit_result_unit_conversion() {
    let fit = FitResult {
        names: vec!["g".into(), "ratio".into()],
        units: vec![RAD_S.into(), "".into()],
        values: vec![2.0 * PI * 10.0, 0.5],
        errors: vec![2.0 * PI, 0.1],
        covariance: vec![vec![4.0 * PI * PI, 0.0], vec![0.0, 0.01]],
        residual: 0.0,
        converged: true,
        samples: None,
        seed: None,
    };
    let hz = fit.in_hz();
    assert_relative_eq!(hz.values[0], 10.0, max_relative = 1e-12);
    assert_relative_eq!(hz.errors[0], 1.0, max_relative = 1e-12);
    assert_relative_eq!(hz.values[1], 0.5);
    assert_eq!(hz.units[0], "Hz");
    assert!(fit.get("missing").is_none());
}

fn psd_case() -> (System, Baths, Psd) {
    let sys = test_system(20.0);
    let baths = Baths { cavity: 0.3, mechanics: (0..6).map(|i| 200.0 + 30.0 * i as f64).collect() };
    let w = grid(hz_to_rad(1.991e6), 2.0 * sys.kappa(), 1501);
    let psd = output_psd(&sys, &baths, &w).unwrap();
    (sys, baths, psd)
}

fn psd_guess(sys: &System, scale: f64) -> PsdGuess {
    PsdGuess {
        g: sys.g.iter().map(|g| g * scale).collect(),
        kappa: sys.kappa() * scale,
        detuning: sys.detuning,
        decoherence: None,
        cavity_bath: None,
    }
}

#[test]
fn psd_zero_noise_round_trip() {
    let (sys, baths, psd) = psd_case();
    let fixed = PsdFixed { omega: sys.omega.clone(), gamma: sys.gamma.clone(), kappa_ex: sys.kappa_ex };
    let fit = fit_psd(&psd, &fixed, &psd_guess(&sys, 1.01)).unwrap();
    let (s, b) = psd_system(&fit, &fixed);
    for i in 0..6 {
        assert_relative_eq!(s.g[i], sys.g[i], max_relative = 1e-6);
        assert_relative_eq!(b.mechanics[i], baths.mechanics[i], max_relative = 1e-6);
    }
    assert_relative_eq!(s.kappa(), sys.kappa(), max_relative = 1e-6);
    assert_relative_eq!(b.cavity, baths.cavity, max_relative = 1e-6);
}

fn mc(detected: &Psd, sys: &System, priors: PsdPriors, n_rep: usize, floor: f64) -> MonteCarloFit {
    let fixed = PsdFixed { omega: sys.omega.clone(), gamma: sys.gamma.clone(), kappa_ex: sys.kappa_ex };
    let opts = MonteCarloOptions { n_rep, seed: 11, occupations: false, background: Some(floor) };
    fit_psd_montecarlo(detected, &fixed, &psd_guess(sys, 1.0), &priors, &opts).unwrap()
}

#[test]
fn monte_carlo_without_prior_width_is_deterministic() {
    let (sys, baths, psd) = psd_case();
    let chain = MeasurementChain::new(3.0, 8.0).unwrap();
    let detected = chain.detected_psd(&psd);
    let priors = PsdPriors { kappa_ex_rel: 0.0, n_add: 8.0, n_add_std: 0.0 };
    let mcf = mc(&detected, &sys, priors, 6, 3.0 * 9.0);
    assert_eq!(mcf.failures, 0);
    assert_eq!(mcf.fit.samples, Some(6));
    for i in 0..6 {
        let g = mcf.fit.get(&format!("g_{}", i + 1)).unwrap();
        assert_relative_eq!(g, sys.g[i], max_relative = 1e-5);
        assert!(mcf.fit.errors[6 + i] <= 1e-9 * g, "{}", mcf.fit.errors[6 + i]);
    }
    let gth = mcf.fit.values[0];
    assert_relative_eq!(gth, baths.mechanics[0] * sys.gamma[0], max_relative = 1e-4);
}

#[test]
fn monte_carlo_spread_scales_with_prior() {
    let (sys, _, psd) = psd_case();
    let chain = MeasurementChain::new(2.0, 8.0).unwrap();
    let detected = chain.detected_psd(&psd);
    let narrow = mc(&detected, &sys, PsdPriors { kappa_ex_rel: 0.002, n_add: 8.0, n_add_std: 0.0 }, 16, 2.0 * 9.0);
    let wide = mc(&detected, &sys, PsdPriors { kappa_ex_rel: 0.004, n_add: 8.0, n_add_std: 0.0 }, 16, 2.0 * 9.0);
    // the thermal decoherence rates carry the external coupling directly
    let k = 0;
    let ratio = wide.fit.errors[k] / narrow.fit.errors[k];
    assert!((ratio - 2.0).abs() < 0.1, "spread ratio {ratio}");
    // standard error of the mean is the spread over √N
    let ok = (16 - narrow.failures) as f64;
    for (s, e) in narrow.sem.iter().zip(&narrow.fit.errors) {
        assert_relative_eq!(*s, e / ok.sqrt(), max_relative = 1e-12);
    }
}

#[test]
fn monte_carlo_occupations() {
    let (sys, baths, psd) = psd_case();
    let chain = MeasurementChain::new(1.0, 5.0).unwrap();
    let detected = chain.detected_psd(&psd);
    let fixed = PsdFixed { omega: sys.omega.clone(), gamma: sys.gamma.clone(), kappa_ex: sys.kappa_ex };
    let priors = PsdPriors { kappa_ex_rel: 0.0, n_add: 5.0, n_add_std: 0.0 };
    let opts = MonteCarloOptions { n_rep: 2, seed: 3, occupations: true, background: Some(6.0) };
    let mcf = fit_psd_montecarlo(&detected, &fixed, &psd_guess(&sys, 1.0), &priors, &opts).unwrap();
    let truth = collective_occupations(&covariance_matrix(&sys, &baths).unwrap()).unwrap().values;
    for (a, b) in mcf.occupation_mean.iter().zip(&truth) {
        assert_relative_eq!(*a, *b, max_relative = 1e-4);
    }
}

fn kerr_params(kerr: f64) -> KerrParams {
    KerrParams {
        kappa_ex: hz_to_rad(25e3),
        kappa_0: hz_to_rad(7e3),
        omega_c: hz_to_rad(4.814e9),
        kerr,
        attenuation_db: 70.0,
    }
}

/// Drive power that puts `photons` in the resonantly driven linear cavity.
fn power_for(p: &KerrParams, photons: f64) -> f64 {
    let k = p.kappa();
    photons * k * k / 4.0 / p.kappa_ex * HBAR * p.omega_c / crate::units::db_to_power(-p.attenuation_db)
}

#[test]
fn kerr_linear_limit() {
    let p = kerr_params(0.0);
    let w = grid(p.omega_c, 4.0 * p.kappa(), 201);
    let sweep = kerr_response(&p, &w, &[power_for(&p, 1e4)]).unwrap();
    for (k, om) in w.iter().enumerate() {
        let lin = 1.0 - 2.0 * p.kappa_ex / c(p.kappa(), 2.0 * (om - p.omega_c));
        assert!((sweep.traces[0].values[k] - lin).norm() < 1e-12);
        assert_eq!(sweep.roots[0][k].len(), 1);
    }
    // on resonance the photon number is κ_ex Ṅ/(κ²/4)
    let n = sweep.photons[0][100];
    assert_relative_eq!(n, 1e4, max_relative = 1e-9);
}

#[test]
fn cubic_roots_against_expanded_polynomial() {
    let roots = real_cubic_roots([2.0, -2.0 * 6.0, 2.0 * 11.0, -2.0 * 6.0]);
    assert_eq!(roots.len(), 3);
    for (r, e) in roots.iter().zip([1.0, 2.0, 3.0]) {
        assert_relative_eq!(*r, e, epsilon = 1e-12);
    }
    assert_eq!(real_cubic_roots([1.0, 0.0, 1.0, 1.0]).len(), 1);
    assert_eq!(real_cubic_roots([0.0, 1.0, -3.0, 2.0]), vec![1.0, 2.0]);
}

#[test]
fn bistable_band_matches_root_count() {
    let p = kerr_params(-hz_to_rad(2.0));
    let k = p.kappa();
    // drive well above the bistability threshold (K n ~ κ)
    let power = power_for(&p, 8.0 * k / p.kerr.abs());
    let (lo, hi) = bistable_band(&p, power, p.omega_c - 2.0 * k, p.omega_c + 40.0 * k).expect("bistable");
    let positive = |w: f64| photon_roots(&p, power, w).unwrap().len();
    assert_eq!(positive(0.5 * (lo + hi)), 3);
    assert_eq!(positive(lo - 0.05 * (hi - lo)), 1);
    assert_eq!(positive(hi + 0.05 * (hi - lo)), 1);
    // below threshold there is no band at all
    let weak = power_for(&p, 0.1 * k / p.kerr.abs());
    assert!(bistable_band(&p, weak, p.omega_c - 2.0 * k, p.omega_c + 40.0 * k).is_none());
}

#[test]
fn kerr_dip_follows_the_pull() {
    let p = kerr_params(hz_to_rad(1.0));
    let k = p.kappa();
    let w = grid(p.omega_c, 3.0 * k, 3001);
    let dip = |n: f64| {
        let sweep = kerr_response(&p, &w, &[power_for(&p, n)]).unwrap();
        let v = &sweep.traces[0].values;
        w[(0..w.len()).min_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap()]
    };
    let low = dip(10.0);
    let high = dip(0.3 * k / p.kerr);
    assert!((low - p.omega_c).abs() < 0.01 * k);
    assert!(high < low - 0.1 * k, "positive Kerr pulls the dip down: {low} → {high}");
}

#[test]
fn kerr_fit_round_trip() {
    let p = kerr_params(hz_to_rad(1.5));
    let k = p.kappa();
    let w = grid(p.omega_c, 3.0 * k, 301);
    let powers: Vec<f64> = [0.01, 0.1, 0.3].iter().map(|f| power_for(&p, f * k / p.kerr)).collect();
    let sweep = kerr_response(&p, &w, &powers).unwrap();
    let guess = KerrParams {
        kappa_ex: p.kappa_ex * 1.05,
        kappa_0: p.kappa_0 * 0.9,
        omega_c: p.omega_c + 0.05 * k,
        kerr: p.kerr * 1.2,
        ..p
    };
    let fit = fit_kerr(&sweep.traces, &powers, &guess).unwrap();
    assert_relative_eq!(fit.get("kappa_ex").unwrap(), p.kappa_ex, max_relative = 1e-6);
    assert_relative_eq!(fit.get("kappa_0").unwrap(), p.kappa_0, max_relative = 1e-6);
    assert_relative_eq!(fit.get("kerr").unwrap(), p.kerr, max_relative = 1e-6);
    assert!((fit.get("omega_c").unwrap() - p.omega_c).abs() < 1e-6 * k);
}

fn occupation(omega: f64, t: f64) -> f64 {
    1.0 / ((HBAR * omega / (KB * t)).exp() - 1.0)
}

#[test]
fn noise_floor_exact_recovery() {
    let w = hz_to_rad(4.814e9);
    let temps = [0.02, 0.05, 0.1, 0.2, 0.4, 0.8];
    let (g, n_add) = (3.7e-15, 5.83);
    let powers: Vec<f64> = temps.iter().map(|t| g * (occupation(w, *t) + n_add + 1.0)).collect();
    let fit = calibrate_noise_floor(w, &temps, &powers).unwrap();
    assert_relative_eq!(fit.gain, g, max_relative = 1e-10);
    assert_relative_eq!(fit.n_add_amplifier, n_add, max_relative = 1e-9);
    assert!(fit.n_add_err < 1e-8);
}

#[test]
fn noise_floor_degenerate_inputs() {
    let w = hz_to_rad(4.814e9);
    let err = calibrate_noise_floor(w, &[0.1, 0.2, 0.3], &[1.0, 2.0, 3.0]).unwrap_err();
    assert!(matches!(err, Error::DegenerateFit(_)));
    // all temperatures deep in the quantum regime: n_th ≈ 0 everywhere
    let err = calibrate_noise_floor(w, &[0.005, 0.006, 0.007, 0.008], &[1.0; 4]).unwrap_err();
    assert!(matches!(err, Error::DegenerateFit(_)));
    let err = calibrate_noise_floor(w, &[0.1, 0.2, 0.4, 0.8], &[4.0, 3.0, 2.0, 1.0]).unwrap_err();
    assert!(matches!(err, Error::DegenerateFit(_)));
}

#[test]
fn added_noise_referred_through_the_line() {
    let r = refer_added_noise(5.83, 1.2, 0.5).unwrap();
    // (1 + 5.83) · 10^{0.12}
    assert_relative_eq!(r.total, 6.83 * 10f64.powf(0.12), max_relative = 1e-12);
    assert!((r.total - 9.0).abs() < 0.01);
    assert!(r.low < r.total && r.total < r.high);
    assert_relative_eq!(refer_added_noise(2.0, 0.0, 0.0).unwrap().total, 3.0);
}

fn g0_cal() -> G0Calibration {
    G0Calibration {
        kappa_ex: hz_to_rad(25e3),
        kappa_0: hz_to_rad(7e3),
        omega_c: hz_to_rad(4.814e9),
        omega_m: hz_to_rad(1.991e6),
    }
}

fn sweep_points(g0: f64, temps: &[f64], noise: impl Fn(usize) -> f64) -> Vec<SidebandPoint> {
    let cal = g0_cal();
    temps
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (pump, cal_src, cal_meas) = (1e-6, 1e-9, 3e-3);
            SidebandPoint {
                temperature: t,
                sideband_power: cal.normalized_power(g0, t) * pump * cal_meas / cal_src * noise(k),
                pump_source_power: pump,
                cal_source_power: cal_src,
                cal_measured_power: cal_meas,
            }
        })
        .collect()
}

#[test]
fn g0_from_noiseless_sweep() {
    let g0 = hz_to_rad(1.3);
    let temps: Vec<f64> = (1..=10).map(|k| 0.02 * k as f64).collect();
    let fit = g0_from_thermal_sweep(&sweep_points(g0, &temps, |_| 1.0), &g0_cal(), 0.05).unwrap();
    assert_relative_eq!(fit.g0, g0, max_relative = 1e-10);
    assert_eq!(fit.points_used, 8);
    assert!(fit.intercept.abs() < 1e-9 * fit.slope);
}

#[test]
fn g0_with_five_percent_noise() {
    let g0 = hz_to_rad(1.3);
    let temps: Vec<f64> = (1..=12).map(|k| 0.02 * k as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise: Vec<f64> = (0..temps.len()).map(|_| 1.0 + 0.05 * normal(&mut rng)).collect();
    let fit = g0_from_thermal_sweep(&sweep_points(g0, &temps, |k| noise[k]), &g0_cal(), 0.0).unwrap();
    assert!((fit.g0 - g0).abs() < hz_to_rad(0.1), "{} Hz", fit.g0 / (2.0 * PI));
    assert!(fit.g0_err > 0.0 && fit.g0_err < hz_to_rad(0.1));
}

#[test]
fn g0_scales_as_root_of_power() {
    let temps = [0.05, 0.1, 0.15];
    let a = g0_from_thermal_sweep(&sweep_points(1.0, &temps, |_| 1.0), &g0_cal(), 0.0).unwrap();
    let b = g0_from_thermal_sweep(&sweep_points(1.0, &temps, |_| 2.0), &g0_cal(), 0.0).unwrap();
    assert_relative_eq!(b.g0 / a.g0, 2f64.sqrt(), max_relative = 1e-12);
    // two points: slope is the finite difference
    let two = sweep_points(1.0, &[0.05, 0.15], |_| 1.0);
    let fit = g0_from_thermal_sweep(&two, &g0_cal(), 0.0).unwrap();
    let slope = (two[1].normalized() - two[0].normalized()) / 0.1;
    assert_relative_eq!(fit.slope, slope, max_relative = 1e-12);
    let falling = sweep_points(1.0, &[0.05, 0.15], |k| if k == 0 { 4.0 } else { 1.0 });
    assert!(matches!(g0_from_thermal_sweep(&falling, &g0_cal(), 0.0), Err(Error::Inadmissible(_))));
}

#[test]
fn faddeeva_reference_value() {
    let w = faddeeva(c(1.0, 1.0));
    assert!((w - c(0.30474420525691, 0.20821893820283)).norm() < 1e-12, "{w}");
    // w(iy) = e^{y²} erfc(y); erfc(1) = 0.157299207050285
    let w = faddeeva(c(0.0, 1.0));
    assert!((w.re - std::f64::consts::E * 0.157299207050285).abs() < 1e-12);
    // on the real axis Re w = e^{−x²}
    for x in [0.0, 0.5, 2.0, 4.0] {
        assert!((faddeeva(c(x, 0.0)).re - (-x * x as f64).exp()).abs() < 1e-12);
    }
}

#[test]
fn voigt_limits_and_normalization() {
    let gamma = 10.0;
    for x in [-30.0, -3.0, 0.0, 7.0] {
        assert_relative_eq!(voigt(x, gamma, 1e-4), lorentzian(x, gamma), max_relative = 1e-6);
        let s = 2.0;
        let gauss = (-x * x / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        assert!((voigt(x, 1e-9, s) - gauss).abs() < 1e-9, "x={x}");
    }
    let xs = grid(0.0, 4000.0, 400_001);
    let ys: Vec<f64> = xs.iter().map(|x| voigt(*x, gamma, 3.0)).collect();
    let area = crate::quad::trapezoid(&xs, &ys);
    // the Lorentzian tails beyond ±4000 hold γ/(π·4000) of the area
    assert_relative_eq!(area, 1.0 - gamma / (PI * 4000.0), max_relative = 1e-6);
}

#[test]
fn asymmetry_ratio_at_half_quantum() {
    // n = 1/2 with no pump heating: A_AS/A_S = n/(n+1) = 1/3
    let n = occupation_from_areas(1.0, 3.0, 1.0, 0.0).unwrap();
    assert_relative_eq!(n, 0.5, max_relative = 1e-14);
    for scale in [1e-20, 1.0, 1e15] {
        assert_relative_eq!(occupation_from_areas(scale, 3.0 * scale, 1.0, 0.0).unwrap(), 0.5, max_relative = 1e-12);
    }
    // heating and rate imbalance
    let (n_m, n_aux, ratio) = (2.0f64, 0.1, 0.8);
    let anti = ratio * (n_m - 2.0 * n_aux);
    let stokes = n_m + 1.0 + 2.0 * n_aux;
    assert_relative_eq!(occupation_from_areas(anti, stokes, ratio, n_aux).unwrap(), n_m, max_relative = 1e-12);
    assert!(matches!(occupation_from_areas(0.0, 1.0, 1.0, 0.0), Err(Error::Inadmissible(_))));
    assert!(matches!(occupation_from_areas(-0.1, 1.0, 1.0, 0.0), Err(Error::Inadmissible(_))));
}

#[test]
fn sideband_rates_and_calibration() {
    let (g, kappa, om) = (1e3, 1e5, 1e7);
    let (p, m) = gamma_pm(g, kappa, om, 0.0);
    assert_relative_eq!(p, m);
    // red-detuned pump (Δ = ω_c − ω_p > 0 on the lower sideband): anti-Stokes favoured
    let (p, m) = gamma_pm(g, kappa, om, -om);
    assert_relative_eq!(p, 4.0 * g * g / kappa, max_relative = 1e-12);
    assert!(p > m);
    let ratio = SidebandRates::Nominal { g, kappa, omega_m: om, detuning: -om }.ratio();
    assert_relative_eq!(ratio, p / m);
    // hot reference with known occupation recovers the ratio exactly
    let (n_hot, n_aux, r) = (300.0, 0.05, 1.3);
    let anti = r * (n_hot - 2.0 * n_aux);
    let stokes = n_hot + 1.0 + 2.0 * n_aux;
    assert_relative_eq!(rate_ratio_from_hot_reference(anti, stokes, Some(n_hot), n_aux).unwrap(), r, max_relative = 1e-12);
    let approx = rate_ratio_from_hot_reference(anti, stokes, None, n_aux).unwrap();
    assert!((approx / r - 1.0).abs() < 0.01);
    // backaction with an ideal pump and no heating: Γ−/(Γ_m + Γ_opt + Γ+ − Γ−)
    let ba = backaction_occupation(2.0, 1.0, 0.0, 0.5, 10.0);
    assert_relative_eq!(ba, 1.0 / 11.5);
}

fn lorentz_sideband(w: &[f64], center: f64, width: f64, area: f64, bg: f64) -> Vec<f64> {
    w.iter().map(|x| bg + area * lorentzian(x - center, width)).collect()
}

#[test]
fn sideband_peak_fit_round_trip() {
    let w = grid(0.0, 2e4, 801);
    let psd = Psd { values: lorentz_sideband(&w, 310.0, 900.0, 5.0, 1e-3), omega: w.clone() };
    let fit = fit_sideband(&psd, Lineshape::Lorentzian).unwrap();
    assert_relative_eq!(fit.area, 5.0, max_relative = 1e-6);
    assert_relative_eq!(fit.width, 900.0, max_relative = 1e-6);
    assert_relative_eq!(fit.center, 310.0, max_relative = 1e-6);
    assert_relative_eq!(fit.background, 1e-3, max_relative = 1e-5);
    let sigma = 400.0;
    let values = w.iter().map(|x| 2e-3 + 5.0 * voigt(x - 310.0, 900.0, sigma)).collect();
    let fit = fit_sideband(&Psd { omega: w, values }, Lineshape::Voigt { sigma }).unwrap();
    assert_relative_eq!(fit.area, 5.0, max_relative = 1e-6);
    assert_relative_eq!(fit.width, 900.0, max_relative = 1e-6);
}

#[test]
fn individual_asymmetry_end_to_end() {
    let kappa = hz_to_rad(14.7e6);
    let om = hz_to_rad(1.991e6);
    let delta = hz_to_rad(-100e3);
    let g = hz_to_rad(2e3);
    let (gp, gm) = gamma_pm(g, kappa, om, delta);
    let (n_m, n_aux) = (3.0, 0.05);
    let width = hz_to_rad(40.0);
    let w = grid(0.0, 30.0 * width, 1201);
    let scale = 1e-3;
    let a_as = scale * gp * (n_m - 2.0 * n_aux);
    let a_s = scale * gm * (n_m + 1.0 + 2.0 * n_aux);
    let bg = 2.0 * a_s * lorentzian(0.0, width);
    let mut rng = ChaCha8Rng::seed_from_u64(90000);
    let mut noisy = |v: Vec<f64>| {
        let level = v.iter().cloned().fold(0.0, f64::max);
        v.into_iter().map(|x| x + level / 300.0 * normal(&mut rng)).collect::<Vec<f64>>()
    };
    let inputs = AsymmetryInputs {
        anti_stokes: Psd { values: noisy(lorentz_sideband(&w, 0.0, width, a_as, bg)), omega: w.clone() },
        stokes: Psd { values: noisy(lorentz_sideband(&w, 0.0, width, a_s, bg)), omega: w.clone() },
        rates: SidebandRates::Nominal { g, kappa, omega_m: om, detuning: delta },
        n_aux,
    };
    let res = sideband_asymmetry_individual(&inputs, Lineshape::Lorentzian).unwrap();
    assert!((res.n_m / n_m - 1.0).abs() < 0.03, "n = {}", res.n_m);
    assert_relative_eq!(res.rate_ratio, gp / gm);
}

#[test]
fn strong_model_peaks_at_plus_minus_g() {
    let (g, kappa) = (5.0, 1.0);
    let f = |d: f64| strong_sideband_shape(d, g, kappa, 0.0, 0.0, 1.0);
    for d in [g, -g] {
        assert!(f(d) > f(d + 0.05) && f(d) > f(d - 0.05));
    }
    // B/(4g²)² against B/(2gκ)²
    assert_relative_eq!(f(0.0) / f(g), (kappa / (2.0 * g)).powi(2), max_relative = 1e-12);
}

/// Degenerate array hybridized with the cavity: the quadrature spectra of
/// the bright mode give the occupation through the sideband ratio, checked
/// against the smallest eigenvalue of the covariance matrix.
#[test]
fn strong_asymmetry_matches_covariance() {
    let n = 6;
    let om = hz_to_rad(2e6);
    let kappa = hz_to_rad(28e3);
    let g_col = hz_to_rad(25e3);
    let sys = System {
        detuning: om,
        kappa_ex: 0.8 * kappa,
        kappa_0: 0.2 * kappa,
        omega: vec![om; n],
        gamma: vec![hz_to_rad(20.0); n],
        g: vec![g_col / (n as f64).sqrt(); n],
    };
    let baths = Baths { cavity: 0.0, mechanics: vec![2000.0; n] };
    let w = grid(om, 6.0 * g_col, 6001);
    let (normal_o, anti_o) = readout_spectra(&sys, &baths, &vec![1.0; n], &w).unwrap();
    let shift = |p: Psd| Psd { omega: p.omega.iter().map(|x| x - om).collect(), values: p.values };
    let inputs = AsymmetryInputs {
        anti_stokes: shift(normal_o),
        stokes: shift(anti_o),
        rates: SidebandRates::Calibrated { ratio: 1.0 },
        n_aux: 0.0,
    };
    let fit = sideband_asymmetry_strong(&inputs, &StrongGuess { g: g_col * 1.05, kappa: kappa * 0.95, detuning: 0.0 })
        .unwrap();
    let occ = collective_occupations(&covariance_matrix(&sys, &baths).unwrap()).unwrap().values;
    let n_min = occ.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((fit.result.n_m / n_min - 1.0).abs() < 0.05, "{} vs {}", fit.result.n_m, n_min);
    assert!((fit.g / g_col - 1.0).abs() < 0.05);
}

#[test]
fn unresolved_doublet_is_rejected() {
    let (g, kappa) = (0.1, 1.0);
    let w = grid(0.0, 5.0, 801);
    let make = |a: f64, b: f64| Psd {
        omega: w.clone(),
        values: w.iter().map(|d| 1e-3 + strong_sideband_shape(*d, g, kappa, 0.0, a, b)).collect(),
    };
    let inputs = AsymmetryInputs {
        anti_stokes: make(0.5, 0.01),
        stokes: make(1.0, 0.02),
        rates: SidebandRates::Calibrated { ratio: 1.0 },
        n_aux: 0.0,
    };
    let err = sideband_asymmetry_strong(&inputs, &StrongGuess { g, kappa, detuning: 0.0 }).unwrap_err();
    assert!(matches!(err, Error::Unidentifiable(_)), "{err}");
}

fn resonance_truth() -> Resonance {
    let w0 = hz_to_rad(4.814e9);
    Resonance {
        kappa_ex: hz_to_rad(25e3),
        kappa_0: hz_to_rad(7e3),
        omega_0: w0 + hz_to_rad(1.2e3),
        tau: 40e-9,
        alpha: 0.3,
        phi: 0.08,
        reference: w0,
    }
}

#[test]
fn coupling_regimes() {
    let r = resonance_truth();
    assert_eq!(r.regime(), CouplingRegime::Overcoupled);
    assert_eq!(Resonance { kappa_0: r.kappa_ex, ..r }.regime(), CouplingRegime::Critical);
    assert_eq!(Resonance { kappa_0: 2.0 * r.kappa_ex, ..r }.regime(), CouplingRegime::Undercoupled);
    // overcoupled resonances wind once around the origin
    let d = r.s11(r.omega_0) * (Complex64::i() * r.alpha).exp();
    assert!(d.re < 0.0);
}

#[test]
fn resonance_fit_round_trip() {
    let r = resonance_truth();
    let k = r.kappa_ex + r.kappa_0;
    let w = grid(r.reference, 10.0 * k, 801);
    let trace = ComplexTrace { values: w.iter().map(|x| r.s11(*x)).collect(), omega: w };
    let seed = seed_resonance(&trace, &|_| 1.0).unwrap();
    let (fit, lm) = fit_resonance(&trace, &Resonance { reference: r.reference, ..seed }).unwrap();
    assert!(lm.rss < 1e-20);
    assert_relative_eq!(fit.kappa_ex, r.kappa_ex, max_relative = 1e-6);
    assert_relative_eq!(fit.kappa_0, r.kappa_0, max_relative = 1e-6);
    assert!((fit.omega_0 - r.omega_0).abs() < 1e-6 * k);
}

#[test]
fn narrow_background_removal_round_trip() {
    let r = resonance_truth();
    let k = r.kappa_ex + r.kappa_0;
    let bg = AmplitudeBackground {
        a: 0.3 * PI * 40.0 * k,
        gamma: 40.0 * k,
        omega_bg: r.reference + 15.0 * k,
        b: 0.02,
        c: 0.1 / k,
        phi0: 0.4,
        d: 0.5,
        reference: r.reference,
    };
    let w = grid(r.reference, 20.0 * k, 1601);
    let raw = ComplexTrace { values: w.iter().map(|x| bg.eval(*x) * r.s11(*x)).collect(), omega: w };
    let guess = AmplitudeBackground { a: bg.a * 1.02, d: 0.51, b: 0.018, c: bg.c * 1.01, ..bg };
    let out = remove_background_narrow(&raw, &guess, None).unwrap();
    assert_eq!(out.regime, CouplingRegime::Overcoupled);
    assert_relative_eq!(out.resonance.kappa_ex, r.kappa_ex, max_relative = 1e-6);
    assert_relative_eq!(out.resonance.kappa_0, r.kappa_0, max_relative = 1e-6);
    assert!((out.resonance.omega_0 - r.omega_0).abs() < 1e-6 * k);
    assert_relative_eq!(out.fit.get("omega_0").unwrap(), r.omega_0, max_relative = 1e-12);
    for (x, s) in out.normalized.omega.iter().zip(&out.normalized.values) {
        assert!((s - r.s11(*x)).norm() < 1e-6);
    }
}

#[test]
fn broad_background_removal_round_trip() {
    let r = resonance_truth();
    let k = r.kappa_ex + r.kappa_0;
    let bg = ComplexBackground {
        a: 0.2 * 20.0 * k,
        alpha_bg: 0.7,
        kappa_t: 20.0 * k,
        omega_bg: r.reference - 8.0 * k,
        b: 0.03,
        c: 0.15 / k,
        phi0: -0.2,
        d: 0.8,
    };
    let w = grid(r.reference, 15.0 * k, 1501);
    let raw = ComplexTrace {
        values: w.iter().map(|x| bg.eval(*x, r.tau, r.reference) * r.s11(*x)).collect(),
        omega: w,
    };
    let bg_guess = ComplexBackground { a: bg.a * 1.03, d: 0.79, alpha_bg: 0.68, ..bg };
    let res_guess = Resonance { kappa_ex: r.kappa_ex * 1.05, kappa_0: r.kappa_0 * 0.9, omega_0: r.omega_0 + 0.02 * k, ..r };
    let out = remove_background_broad(&raw, &bg_guess, &res_guess).unwrap();
    assert_relative_eq!(out.resonance.kappa_ex, r.kappa_ex, max_relative = 1e-6);
    assert_relative_eq!(out.resonance.kappa_0, r.kappa_0, max_relative = 1e-6);
    assert!((out.resonance.omega_0 - r.omega_0).abs() < 1e-6 * k);
}

#[test]
fn fano_like_trace_is_rejected() {
    // a "resonance" with gain (κ_0 < 0) cannot come from a passive device
    let r = Resonance { kappa_0: -hz_to_rad(4e3), ..resonance_truth() };
    let k = r.kappa_ex;
    let w = grid(r.reference, 10.0 * k, 801);
    let trace = ComplexTrace { values: w.iter().map(|x| r.s11(*x)).collect(), omega: w };
    let guess = Resonance { kappa_0: hz_to_rad(1e3), ..resonance_truth() };
    let err = fit_resonance(&trace, &guess).unwrap_err();
    assert!(matches!(err, Error::Inadmissible(_)), "{err}");
}
