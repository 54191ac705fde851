use std::f64::consts::PI;

use onet_core::grf::{sample_functions, GrfConfig};
use onet_core::oracles::{cole_hopf, naive_dft};
use onet_core::rng::seeded;
use onet_core::solvers::fft::{fft, ifft, Complex64};
use onet_core::solvers::{
    periodic_grid, rk4_antiderivative, solve_burgers, solve_diffusion_reaction, BurgersConfig,
    DiffusionConfig,
};
use rand::Rng;

fn max_abs_diff(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn rk4_error<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, exact: G, n: usize) -> f64 {
    let (xs, s) = rk4_antiderivative(f, 0.0, 1.0, n);
    max_abs_diff(s.iter().copied(), xs.iter().map(|&x| exact(x) - exact(0.0)))
}

#[test]
fn rk4_matches_analytic_antiderivative() {
    let err = rk4_error(
        |x| (2.0 * PI * x).cos(),
        |x| (2.0 * PI * x).sin() / (2.0 * PI),
        1000,
    );
    assert!(err <= 1e-9, "max error {err:e}");
}

#[test]
fn rk4_is_fourth_order() {
    let f = |x: f64| (3.0 * x).sin() * x.exp();
    let exact = |x: f64| x.exp() * ((3.0 * x).sin() - 3.0 * (3.0 * x).cos()) / 10.0;
    let errs: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| rk4_error(f, exact, n))
        .collect();
    for w in errs.windows(2) {
        let factor = w[0] / w[1];
        assert!((12.0..=20.0).contains(&factor), "errors {errs:?}");
    }
}

#[test]
fn diffusion_agrees_with_refined_grid() {
    let grf = sample_functions(&GrfConfig::unit_interval(), 3, 11).unwrap();
    let base = DiffusionConfig::default();
    let fine = DiffusionConfig {
        refinement: 4 * base.refinement,
        ..base.clone()
    };
    for i in 0..grf.len() {
        let a = solve_diffusion_reaction(grf.row(i), &grf.sensors, &base).unwrap();
        let b = solve_diffusion_reaction(grf.row(i), &grf.sensors, &fine).unwrap();
        let d = max_abs_diff(a.values.iter().copied(), b.values.iter().copied());
        assert!(d <= 1e-3, "function {i}: {d:e}");
    }
}

#[test]
fn burgers_matches_cole_hopf() {
    let cfg = BurgersConfig::default();
    let k = 2.0 * PI / cfg.length;
    let x = periodic_grid(0.0, cfg.length, cfg.nx_out);
    let u0: Vec<f64> = x.iter().map(|x| (k * x).sin()).collect();
    let g = solve_burgers(&u0, &cfg).unwrap().grid;
    let potential = |y: f64| -(k * y).cos() / k;
    let mut worst: f64 = 0.0;
    for (j, &t) in g.t.iter().enumerate().skip(1) {
        let h = (4.0 * cfg.viscosity * t).sqrt() / 40.0;
        for (i, &xi) in g.x.iter().enumerate() {
            let exact = cole_hopf(xi, t, cfg.viscosity, potential, 2.0 / k, h);
            worst = worst.max((g.values[[i, j]] - exact).abs());
        }
    }
    assert!(worst <= 1e-3, "max-abs deviation {worst:e}");
}

#[test]
fn fft_round_trip_and_direct_sum() {
    let mut rng = seeded(5);
    let v: Vec<Complex64> = (0..128)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let back = ifft(&fft(&v));
    let err = v
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err <= 1e-12, "round trip {err:e}");

    let small = &v[..8];
    let err = fft(small)
        .iter()
        .zip(naive_dft(small))
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err <= 1e-12, "direct sum {err:e}");
}

#[test]
fn burgers_conserves_momentum_and_dissipates_energy() {
    let grf = sample_functions(&GrfConfig::periodic_ten(), 3, 21).unwrap();
    let cfg = BurgersConfig::default();
    for i in 0..grf.len() {
        let sol = solve_burgers(grf.row(i), &cfg).unwrap();
        let m0 = sol.momentum[0];
        let scale = m0.abs().max(sol.energy[0].sqrt());
        for m in &sol.momentum {
            assert!(
                (m - m0).abs() <= 1e-8 * scale,
                "function {i}: momentum {m} vs {m0}"
            );
        }
        assert!(
            sol.energy.windows(2).all(|w| w[1] <= w[0]),
            "function {i}: energy increased"
        );
    }
}
