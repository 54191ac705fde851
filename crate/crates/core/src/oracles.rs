//! Independent reference computations used by the test suites.
//!
//! Nothing here is used by the library itself; every routine takes a
//! different route to the quantity it checks (brute force sums, closed
//! forms, finite differences).

use std::f64::consts::PI;

use crate::nn::Params;
use crate::solvers::fft::Complex64;

/// O(n^2) discrete Fourier transform, forward unscaled.
pub fn naive_dft(v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            v.iter()
                .enumerate()
                .map(|(j, x)| {
                    let ang = -2.0 * PI * (j * k % n) as f64 / n as f64;
                    x * Complex64::new(ang.cos(), ang.sin())
                })
                .sum()
        })
        .collect()
}

/// Viscous Burgers solution via the Cole-Hopf transformation:
///
/// `u(x, t) = int (x - y)/t w(y) dy / int w(y) dy` with
/// `w(y) = exp(-(x - y)^2 / (4 nu t) - potential(y) / (2 nu))` and
/// `potential' = u0`. The integrals run over the real line, so `potential`
/// must be defined everywhere (extend periodic data periodically).
/// Evaluated with the trapezoid rule at spacing `h` in log-sum-exp form.
pub fn cole_hopf<F: Fn(f64) -> f64>(
    x: f64,
    t: f64,
    nu: f64,
    potential: F,
    potential_range: f64,
    h: f64,
) -> f64 {
    assert!(t > 0.0);
    // Beyond this distance the Gaussian factor outweighs any potential swing
    // by more than e^-60.
    let half_width = (4.0 * nu * t * (potential_range / (2.0 * nu) + 60.0)).sqrt();
    let n = (2.0 * half_width / h).ceil() as usize + 1;
    let exponent = |y: f64| -(x - y).powi(2) / (4.0 * nu * t) - potential(y) / (2.0 * nu);
    let ys: Vec<f64> = (0..n).map(|i| x - half_width + i as f64 * h).collect();
    let e: Vec<f64> = ys.iter().map(|&y| exponent(y)).collect();
    let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (y, ei) in ys.iter().zip(&e) {
        let w = (ei - top).exp();
        num += (x - y) / t * w;
        den += w;
    }
    num / den
}

/// Central finite-difference gradient of `loss` with respect to every
/// parameter of `model`.
pub fn finite_difference_gradient<P, L>(model: &P, mut loss: L, h: f64) -> Vec<f64>
where
    P: Params + Clone,
    L: FnMut(&P) -> f64,
{
    let base = model.flatten();
    let mut probe = model.clone();
    let mut grad = Vec::with_capacity(base.len());
    let mut work = base.clone();
    for i in 0..base.len() {
        work[i] = base[i] + h;
        probe.assign(&work);
        let up = loss(&probe);
        work[i] = base[i] - h;
        probe.assign(&work);
        let down = loss(&probe);
        work[i] = base[i];
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Fraction of coordinates where analytic and numeric gradients agree to
/// relative error `tol` (absolute below `floor`).
pub fn gradient_agreement(analytic: &[f64], numeric: &[f64], tol: f64, floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let ok = analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| (*a - *n).abs() <= tol * a.abs().max(n.abs()).max(floor))
        .count();
    ok as f64 / analytic.len() as f64
}
