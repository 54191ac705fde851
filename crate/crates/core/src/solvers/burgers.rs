//! Viscous Burgers equation `s_t + s s_x = nu s_xx` on a periodic interval,
//! solved pseudo-spectrally: derivatives in Fourier space, the nonlinear
//! flux in physical space with 2/3-rule dealiasing, and RK4 in time with an
//! integrating factor that treats the viscous term exactly.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::fft::{signed_index, Complex64, FftPair};
use super::{linspace, periodic_grid, Grid2D, SolverError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersConfig {
    pub viscosity: f64,
    /// Period of the spatial domain `[0, length)`.
    pub length: f64,
    pub t_end: f64,
    pub nx_out: usize,
    pub nt_out: usize,
    /// Number of internal collocation points (a power of two).
    pub n_internal: usize,
    /// Advective Courant number used to pick the time step.
    pub cfl: f64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self {
            viscosity: 0.01,
            length: 10.0,
            t_end: 10.0,
            nx_out: 100,
            nt_out: 100,
            n_internal: 1024,
            cfl: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BurgersSolution {
    pub grid: Grid2D,
    /// `integral of s dx` at each output time, from the internal grid.
    pub momentum: Vec<f64>,
    /// `integral of s^2 dx` at each output time, from the internal grid.
    pub energy: Vec<f64>,
}

struct SpectralBurgers {
    fft: FftPair,
    /// `i k` for retained modes, zero for truncated ones.
    ik: Vec<Complex64>,
    /// `nu k^2` per mode.
    decay: Vec<f64>,
    /// 2/3-rule mask.
    keep: Vec<bool>,
    dx: f64,
    work: Vec<Complex64>,
}

impl SpectralBurgers {
    fn new(cfg: &BurgersConfig) -> Self {
        let n = cfg.n_internal;
        let cutoff = n as f64 / 3.0;
        let mut ik = Vec::with_capacity(n);
        let mut decay = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        for j in 0..n {
            let m = signed_index(j, n);
            let kept = (m.abs() as f64) < cutoff;
            let k = 2.0 * PI * m as f64 / cfg.length;
            keep.push(kept);
            ik.push(if kept {
                Complex64::new(0.0, k)
            } else {
                Complex64::new(0.0, 0.0)
            });
            decay.push(cfg.viscosity * k * k);
        }
        Self {
            fft: FftPair::new(n),
            ik,
            decay,
            keep,
            dx: cfg.length / n as f64,
            work: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Dealiased `-(u^2 / 2)_x` in Fourier space. Returns `max |u|` of the
    /// physical field it transformed.
    fn nonlinear(&mut self, u_hat: &[Complex64], out: &mut [Complex64]) -> f64 {
        self.work.copy_from_slice(u_hat);
        self.fft.inverse(&mut self.work);
        let mut peak = 0.0f64;
        for c in self.work.iter_mut() {
            let u = c.re;
            peak = peak.max(u.abs());
            *c = Complex64::new(0.5 * u * u, 0.0);
        }
        self.fft.forward(&mut self.work);
        for ((o, w), ik) in out.iter_mut().zip(&self.work).zip(&self.ik) {
            *o = -ik * w;
        }
        peak
    }

    fn physical(&mut self, u_hat: &[Complex64]) -> Vec<f64> {
        self.work.copy_from_slice(u_hat);
        self.fft.inverse(&mut self.work);
        self.work.iter().map(|c| c.re).collect()
    }
}

/// Trigonometric interpolation of samples on a uniform periodic grid onto
/// the spectrum of an `n`-point grid (unscaled forward convention).
fn upsample_spectrum(samples: &[f64], n: usize) -> Vec<Complex64> {
    let m = samples.len();
    let mut coarse: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPair::new(m).forward(&mut coarse);
    let scale = n as f64 / m as f64;
    let mut fine = vec![Complex64::new(0.0, 0.0); n];
    for (j, c) in coarse.iter().enumerate() {
        let k = signed_index(j, m);
        if m % 2 == 0 && k == (m / 2) as i64 {
            // Split the Nyquist coefficient symmetrically between +k and -k.
            let half = c * 0.5 * scale;
            fine[k as usize] += half;
            fine[n - k as usize] += half;
        } else {
            let idx = if k >= 0 {
                k as usize
            } else {
                (n as i64 + k) as usize
            };
            fine[idx] += c * scale;
        }
    }
    fine
}

/// Solve from an initial condition sampled on the uniform periodic grid
/// `x_j = j * length / m`. The result is sampled on an `nx_out x nt_out`
/// grid with `x` periodic over `[0, length)` and `t` spanning `[0, t_end]`.
pub fn solve_burgers(u0: &[f64], cfg: &BurgersConfig) -> Result<BurgersSolution, SolverError> {
    let n = cfg.n_internal;
    if !n.is_power_of_two() || n < 16 {
        return Err(SolverError::Input(
            "internal grid must be a power of two >= 16".into(),
        ));
    }
    if u0.len() < 2 || 3 * u0.len() > 2 * n {
        return Err(SolverError::Input(format!(
            "{} initial samples cannot be represented on {n} dealiased modes",
            u0.len()
        )));
    }
    if cfg.nt_out < 2 || cfg.nx_out == 0 {
        return Err(SolverError::Input("output grid too small".into()));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { time: 0.0 });
    }

    let mut sp = SpectralBurgers::new(cfg);
    let mut u_hat = upsample_spectrum(u0, n);
    for (c, &kept) in u_hat.iter_mut().zip(&sp.keep) {
        if !kept {
            *c = Complex64::new(0.0, 0.0);
        }
    }

    let x_out = periodic_grid(0.0, cfg.length, cfg.nx_out);
    let t_out = linspace(0.0, cfg.t_end, cfg.nt_out);
    let sampler = SeriesSampler::new(&x_out, cfg.length, n, &sp.keep);

    let mut values = Array2::zeros((cfg.nx_out, cfg.nt_out));
    let mut momentum = Vec::with_capacity(cfg.nt_out);
    let mut energy = Vec::with_capacity(cfg.nt_out);
    let mut record =
        |j: usize, u_hat: &[Complex64], sp: &mut SpectralBurgers, values: &mut Array2<f64>| {
            let u = sp.physical(u_hat);
            momentum.push(sp.dx * u.iter().sum::<f64>());
            energy.push(sp.dx * u.iter().map(|v| v * v).sum::<f64>());
            for (i, v) in sampler.eval(u_hat).into_iter().enumerate() {
                values[[i, j]] = v;
            }
            u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
    let mut peak = record(0, &u_hat, &mut sp, &mut values);

    let mut a = vec![Complex64::new(0.0, 0.0); n];
    let mut b = a.clone();
    let mut c = a.clone();
    let mut d = a.clone();
    let mut stage = a.clone();
    for j in 1..cfg.nt_out {
        let interval = t_out[j] - t_out[j - 1];
        let dt_cfl = if peak > 0.0 {
            cfg.cfl * sp.dx / peak
        } else {
            interval
        };
        let n_sub = (interval / dt_cfl).ceil().max(1.0) as usize;
        let dt = interval / n_sub as f64;
        let e_full: Vec<f64> = sp.decay.iter().map(|&g| (-g * dt).exp()).collect();
        let e_half: Vec<f64> = sp.decay.iter().map(|&g| (-g * dt * 0.5).exp()).collect();
        for step in 0..n_sub {
            // Lawson RK4 on v = exp(nu k^2 t) u_hat.
            let stage_peak = sp.nonlinear(&u_hat, &mut a);
            let courant = stage_peak * dt / sp.dx;
            if !courant.is_finite() {
                return Err(SolverError::NonFinite {
                    time: t_out[j - 1] + dt * step as f64,
                });
            }
            if courant > 1.0 {
                return Err(SolverError::Stability {
                    time: t_out[j - 1] + dt * step as f64,
                    courant,
                });
            }
            a.iter_mut().for_each(|v| *v *= dt);
            for k in 0..n {
                stage[k] = e_half[k] * (u_hat[k] + 0.5 * a[k]);
            }
            sp.nonlinear(&stage, &mut b);
            b.iter_mut().for_each(|v| *v *= dt);
            for k in 0..n {
                stage[k] = e_half[k] * u_hat[k] + 0.5 * b[k];
            }
            sp.nonlinear(&stage, &mut c);
            c.iter_mut().for_each(|v| *v *= dt);
            for k in 0..n {
                stage[k] = e_full[k] * u_hat[k] + e_half[k] * c[k];
            }
            sp.nonlinear(&stage, &mut d);
            for k in 0..n {
                u_hat[k] = e_full[k] * u_hat[k]
                    + (e_full[k] * a[k] + 2.0 * e_half[k] * (b[k] + c[k]) + dt * d[k]) / 6.0;
            }
        }
        if u_hat.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SolverError::NonFinite { time: t_out[j] });
        }
        peak = record(j, &u_hat, &mut sp, &mut values);
    }

    Ok(BurgersSolution {
        grid: Grid2D {
            x: x_out,
            t: t_out,
            values,
        },
        momentum,
        energy,
    })
}

/// Exact evaluation of the truncated Fourier series at arbitrary points.
struct SeriesSampler {
    /// Retained positive modes `1..=kmax`.
    kmax: usize,
    n: usize,
    /// `cos(k theta_i)`, `sin(k theta_i)` laid out `[i * kmax + (k - 1)]`.
    cos: Vec<f64>,
    sin: Vec<f64>,
    npoints: usize,
}

impl SeriesSampler {
    fn new(points: &[f64], length: f64, n: usize, keep: &[bool]) -> Self {
        let kmax = (1..n / 2).take_while(|&k| keep[k]).last().unwrap_or(0);
        let mut cos = Vec::with_capacity(points.len() * kmax);
        let mut sin = Vec::with_capacity(points.len() * kmax);
        for &x in points {
            let theta = 2.0 * PI * x / length;
            for k in 1..=kmax {
                let (s, c) = (k as f64 * theta).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Self {
            kmax,
            n,
            cos,
            sin,
            npoints: points.len(),
        }
    }

    fn eval(&self, u_hat: &[Complex64]) -> Vec<f64> {
        let inv_n = 1.0 / self.n as f64;
        (0..self.npoints)
            .map(|i| {
                let row_c = &self.cos[i * self.kmax..(i + 1) * self.kmax];
                let row_s = &self.sin[i * self.kmax..(i + 1) * self.kmax];
                let mut acc = 0.0;
                for k in 1..=self.kmax {
                    let z = u_hat[k];
                    acc += z.re * row_c[k - 1] - z.im * row_s[k - 1];
                }
                (u_hat[0].re + 2.0 * acc) * inv_n
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BurgersConfig {
        BurgersConfig {
            n_internal: 256,
            t_end: 2.0,
            nt_out: 21,
            ..BurgersConfig::default()
        }
    }

    #[test]
    fn constant_state_is_stationary() {
        let g = solve_burgers(&vec![0.8; 100], &small()).unwrap().grid;
        assert!(g.values.iter().all(|v| (v - 0.8).abs() < 1e-12));
    }

    #[test]
    fn initial_slice_reproduces_samples() {
        let x = periodic_grid(0.0, 10.0, 100);
        let u0: Vec<f64> = x
            .iter()
            .map(|x| (2.0 * PI * x / 10.0).sin() * 0.3 + 0.1)
            .collect();
        let g = solve_burgers(&u0, &small()).unwrap().grid;
        for i in 0..100 {
            assert!((g.values[[i, 0]] - u0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn upsampling_is_exact_on_nodes() {
        let samples: Vec<f64> = (0..10).map(|i| ((i * 7 % 10) as f64).sin()).collect();
        let mut spec = upsample_spectrum(&samples, 40);
        FftPair::new(40).inverse(&mut spec);
        for (i, s) in samples.iter().enumerate() {
            assert!((spec[4 * i].re - s).abs() < 1e-12);
            assert!(spec[4 * i].im.abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_conserved_energy_decays() {
        let x = periodic_grid(0.0, 10.0, 100);
        let u0: Vec<f64> = x
            .iter()
            .map(|x| (2.0 * PI * x / 10.0).sin() + 0.2)
            .collect();
        let sol = solve_burgers(&u0, &small()).unwrap();
        let m0 = sol.momentum[0];
        for m in &sol.momentum {
            assert!(((m - m0) / m0).abs() < 1e-8);
        }
        assert!(sol.energy.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_bad_grids() {
        let cfg = BurgersConfig {
            n_internal: 100,
            ..BurgersConfig::default()
        };
        assert!(matches!(
            solve_burgers(&[0.0; 10], &cfg),
            Err(SolverError::Input(_))
        ));
        let cfg = BurgersConfig {
            n_internal: 64,
            ..BurgersConfig::default()
        };
        assert!(solve_burgers(&[0.0; 100], &cfg).is_err());
    }
}
