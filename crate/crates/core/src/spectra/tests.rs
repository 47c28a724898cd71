use super::*;
use crate::dynamics::{collective_eigenmodes, System};
use crate::linalg::CVec;
use crate::units::hz_to_rad;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_system(rng: &mut ChaCha8Rng, n: usize) -> System {
    let om = hz_to_rad(2.0e6);
    let kappa = hz_to_rad(rng.random_range(5e3..60e3));
    let kappa_ex = kappa * rng.random_range(0.2..0.9);
    System {
        detuning: om + hz_to_rad(rng.random_range(-5e3..5e3)),
        kappa_ex,
        kappa_0: kappa - kappa_ex,
        omega: (0..n).map(|_| om + hz_to_rad(rng.random_range(-6e3..6e3))).collect(),
        gamma: (0..n).map(|_| hz_to_rad(rng.random_range(0.5..50.0))).collect(),
        g: (0..n).map(|_| hz_to_rad(rng.random_range(10.0..8e3))).collect(),
    }
}

fn random_baths(rng: &mut ChaCha8Rng, n: usize) -> Baths {
    Baths { cavity: rng.random_range(0.0..2.0), mechanics: (0..n).map(|_| rng.random_range(0.0..500.0)).collect() }
}

fn degenerate(n: usize, g: f64, kappa: f64, gamma: f64) -> System {
    let om = hz_to_rad(1.991e6);
    System { detuning: om, kappa_ex: 0.8 * kappa, kappa_0: 0.2 * kappa, omega: vec![om; n], gamma: vec![gamma; n], g: vec![g; n] }
}

#[test]
fn vacuum_floor_is_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(1..=6);
        let sys = random_system(&mut rng, n);
        let grid: Vec<f64> = (0..300).map(|k| sys.detuning + hz_to_rad(-30e3 + 200.0 * k as f64)).collect();
        let psd = output_psd_by_ports(&sys, &Baths::zero(n), &grid).unwrap();
        for v in psd.values {
            assert!((v - 0.5).abs() < 1e-12, "{v}");
        }
    }
}

#[test]
fn closed_form_matches_port_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let n = rng.random_range(1..=6);
        let sys = random_system(&mut rng, n);
        let baths = random_baths(&mut rng, n);
        let grid: Vec<f64> = (0..300).map(|k| sys.detuning + hz_to_rad(-30e3 + 200.0 * k as f64)).collect();
        let a = output_psd(&sys, &baths, &grid).unwrap();
        let b = output_psd_by_ports(&sys, &baths, &grid).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(x, y, max_relative = 1e-9);
            assert!(*x >= 0.5 - 1e-12);
        }
    }
}

/// Explicit single-oscillator and cross spectra written out term by term.
fn explicit_correlator(sys: &System, baths: &Baths, w: f64, i: usize, j: usize) -> Complex64 {
    let r = response(sys, w);
    let (chi, d) = (&r.chi, r.d);
    let g = &sys.g;
    let n = sys.n();
    if i == j {
        let mut s = g[i] * g[i] * chi[i].norm_sqr() * sys.kappa_0 * baths.cavity / d.norm_sqr();
        s += chi[i].norm_sqr() * (1.0 - g[i] * g[i] * chi[i] / d).norm_sqr() * sys.gamma[i] * baths.mechanics[i];
        for k in (0..n).filter(|&k| k != i) {
            s += g[i] * g[i] * g[k] * g[k] * chi[i].norm_sqr() * chi[k].norm_sqr() * sys.gamma[k] * baths.mechanics[k]
                / d.norm_sqr();
        }
        Complex64::from(s)
    } else {
        let gij = g[i] * g[j];
        let mut s = gij * chi[i].conj() * chi[j] * sys.kappa_0 * baths.cavity / d.norm_sqr();
        s -= chi[i].norm_sqr() * (1.0 - g[i] * g[i] * chi[i].conj() / d.conj()) * (gij * chi[j] / d) * sys.gamma[i] * baths.mechanics[i];
        s -= chi[j].norm_sqr() * (1.0 - g[j] * g[j] * chi[j] / d) * (gij * chi[i].conj() / d.conj()) * sys.gamma[j] * baths.mechanics[j];
        for k in (0..n).filter(|&k| k != i && k != j) {
            s += gij * g[k] * g[k] * chi[i].conj() * chi[j] * chi[k].norm_sqr() * sys.gamma[k] * baths.mechanics[k] / d.norm_sqr();
        }
        s
    }
}

#[test]
fn correlators_match_explicit_expressions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sys = random_system(&mut rng, 4);
    let baths = random_baths(&mut rng, 4);
    let grid: Vec<f64> = (0..50).map(|k| sys.detuning + hz_to_rad(-10e3 + 400.0 * k as f64)).collect();
    let spec = mechanical_correlators(&sys, &baths, &grid).unwrap();
    for (w, m) in grid.iter().zip(&spec.values) {
        for i in 0..4 {
            for j in 0..4 {
                let e = explicit_correlator(&sys, &baths, *w, i, j);
                assert!((m[(i, j)] - e).norm() <= 1e-9 * e.norm().max(1e-30), "({i},{j}) {} vs {e}", m[(i, j)]);
            }
        }
    }
}

#[test]
fn uncoupled_oscillators_sit_at_their_baths() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut sys = random_system(&mut rng, 3);
    sys.g = vec![0.0; 3];
    let baths = random_baths(&mut rng, 3);
    let cov = covariance_matrix(&sys, &baths).unwrap();
    for i in 0..3 {
        assert_relative_eq!(cov[(i, i)].re, baths.mechanics[i], max_relative = 1e-7);
    }
}

#[test]
fn commutator_sum_rule() {
    // ∫ (S_{XX†} - S_{X†X}) dω/2π = 1 for any normalized readout
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let sys = random_system(&mut rng, 3);
    let baths = random_baths(&mut rng, 3);
    let res: Vec<(f64, f64)> = collective_eigenmodes(&sys).unwrap().modes.iter().map(|m| (m.frequency, m.linewidth)).collect();
    let mut breaks: Vec<f64> = res.iter().flat_map(|&(w, g)| [w - 20.0 * g, w, w + 20.0 * g]).collect();
    breaks.sort_by(|a, b| a.total_cmp(b));
    let weights = [1.0, 0.5, 2.0];
    let area = crate::quad::integrate(
        |w, out| {
            let (a, b) = readout_spectra(&sys, &baths, &weights, &[w]).unwrap();
            out[0] = b.values[0] - a.values[0];
        },
        1,
        &breaks,
        Some(sys.kappa()),
        crate::quad::QuadOptions::default(),
    )
    .unwrap()[0]
        / (2.0 * PI);
    assert_relative_eq!(area, 1.0, max_relative = 1e-7);
}

#[test]
fn degenerate_cooling_limit() {
    let n = 6;
    let kappa = hz_to_rad(30e3);
    let gamma = hz_to_rad(0.2);
    // Γ_m ≪ N 4g²/κ ≈ 2π·290 Hz ≪ κ
    let g = hz_to_rad(600.0);
    let sys = degenerate(n, g, kappa, gamma);
    let baths = Baths { cavity: 1.5, mechanics: vec![300.0; n] };
    let cov = covariance_matrix(&sys, &baths).unwrap();
    let n_c = sys.kappa_0 * baths.cavity / kappa;
    let limit = n_c / n as f64 + (1.0 - 1.0 / n as f64) * 300.0;
    for i in 0..n {
        assert_relative_eq!(cov[(i, i)].re, limit, max_relative = 0.01);
    }
    let occ = collective_occupations(&cov).unwrap();
    let g_opt = n as f64 * 4.0 * g * g / kappa;
    let rate_eq = (gamma * 300.0 + g_opt * n_c) / (gamma + g_opt);
    assert_relative_eq!(occ.bright(), rate_eq, max_relative = 0.02);
    assert_relative_eq!(rate_equation_occupation(&sys, &baths).unwrap(), occ.bright(), max_relative = 0.02);
    for v in &occ.values[1..] {
        assert_relative_eq!(*v, 300.0, max_relative = 1e-6);
    }
    let uniform = CVec::from_element(n, Complex64::from(1.0 / (n as f64).sqrt()));
    assert!(occ.fidelities(&[uniform])[0] > 0.999999);
}

#[test]
fn grid_covariance_converges_and_matches_adaptive() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let sys = random_system(&mut rng, 3);
    let baths = random_baths(&mut rng, 3);
    let res: Vec<(f64, f64)> = collective_eigenmodes(&sys).unwrap().modes.iter().map(|m| (m.frequency, m.linewidth)).collect();
    let cov = |per: usize| {
        let grid = default_grid(&sys, per).unwrap();
        covariance_from_spectra(&mechanical_correlators(&sys, &baths, &grid).unwrap(), &res).unwrap()
    };
    let (a, b) = (cov(2001), cov(4001));
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).norm() < 1e-4 * a.norm(), "{x} vs {y}");
    }
    let exact = covariance_matrix(&sys, &baths).unwrap();
    assert!((&b - &exact).norm() < 0.03 * exact.norm());
}

#[test]
fn grid_must_cover_resonances() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let sys = random_system(&mut rng, 2);
    let baths = random_baths(&mut rng, 2);
    let grid: Vec<f64> = (0..100).map(|k| sys.detuning + k as f64).collect();
    let spec = mechanical_correlators(&sys, &baths, &grid).unwrap();
    let res: Vec<(f64, f64)> = collective_eigenmodes(&sys).unwrap().modes.iter().map(|m| (m.frequency, m.linewidth)).collect();
    assert!(matches!(covariance_from_spectra(&spec, &res), Err(Error::IntegrationDomain(_))));
}

#[test]
fn thermal_occupation_values() {
    let w = hz_to_rad(4.8e9);
    let t = crate::units::HBAR * w / crate::units::KB;
    assert_relative_eq!(thermal_occupation(w, t).unwrap(), 1.0 / (std::f64::consts::E - 1.0), max_relative = 1e-12);
    assert_eq!(thermal_occupation(w, 0.0).unwrap(), 0.0);
    assert!(thermal_occupation(w, -1.0).is_err());
    let hot = thermal_occupation(hz_to_rad(2e6), 1.0).unwrap();
    assert_relative_eq!(hot, crate::units::KB / (crate::units::HBAR * hz_to_rad(2e6)) - 0.5, max_relative = 1e-6);
}

#[test]
fn referred_added_noise() {
    let eta = crate::units::db_to_power(-1.2);
    let n_amp = 9.0 * eta - 1.0;
    let chain = MeasurementChain::from_amplifier(1.0, n_amp, 1.2).unwrap();
    assert_relative_eq!(1.0 + chain.n_add, 9.0, max_relative = 1e-12);
    let flat = Psd { omega: vec![0.0, 1.0], values: vec![0.5, 0.5] };
    let det = MeasurementChain::new(3.0, 2.0).unwrap().detected_psd(&flat);
    assert_relative_eq!(det.values[0], 9.0);
    assert!(MeasurementChain::new(0.0, 1.0).is_err());
}

#[test]
fn aux_heating_from_lorentzian() {
    let kappa = hz_to_rad(14.7e6);
    let kappa_ex = hz_to_rad(11.94e6);
    let n_aux = 0.07;
    let omega: Vec<f64> = (0..40001).map(|k| (k as f64 - 20000.0) * kappa / 100.0).collect();
    let values = omega.iter().map(|w| kappa_ex * kappa * n_aux / (w * w + kappa * kappa / 4.0)).collect();
    let n = aux_cavity_heating(&Psd { omega, values }, kappa_ex).unwrap();
    assert_relative_eq!(n, n_aux, max_relative = 0.01);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
    #[test]
    fn covariance_is_hermitian_positive(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=4);
        let sys = random_system(&mut rng, n);
        let baths = random_baths(&mut rng, n);
        let cov = covariance_matrix(&sys, &baths).unwrap();
        proptest::prop_assert!((&cov - cov.adjoint()).norm() <= 1e-12 * cov.norm().max(1.0));
        let (vals, _) = crate::linalg::hermitian_eig(&cov);
        proptest::prop_assert!(vals.iter().all(|v| *v >= -1e-9 * cov.norm().max(1.0)));
    }
}
