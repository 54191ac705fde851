//! Gaussian random field input functions sampled at fixed sensors.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{child_seed, seeded};

#[derive(Debug, Error, PartialEq)]
pub enum GrfError {
    #[error("covariance matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("coordinate {x} outside the sensor domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// Squared-exponential kernel `exp(-d^2 / (2 l^2))`.
    Rbf,
    /// Squared-exponential kernel made periodic by summing over the images of
    /// the separation, normalised to 1 at zero distance.
    PeriodicRbf { period: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrfConfig {
    pub n_sensors: usize,
    pub domain: (f64, f64),
    pub length_scale: f64,
    pub kernel: Kernel,
    pub jitter: f64,
}

impl GrfConfig {
    /// RBF field on `[0, 1]` with 100 sensors and length scale 0.2.
    pub fn unit_interval() -> Self {
        Self {
            n_sensors: 100,
            domain: (0.0, 1.0),
            length_scale: 0.2,
            kernel: Kernel::Rbf,
            jitter: 1e-10,
        }
    }

    /// Periodic field on `[0, 10)` with 100 sensors and length scale 5.0.
    pub fn periodic_ten() -> Self {
        Self {
            n_sensors: 100,
            domain: (0.0, 10.0),
            length_scale: 5.0,
            kernel: Kernel::PeriodicRbf { period: 10.0 },
            jitter: 1e-10,
        }
    }

    /// Sensor locations. For the RBF kernel both endpoints are included; for
    /// the periodic kernel the right endpoint is the image of the left one
    /// and is omitted.
    pub fn sensors(&self) -> Vec<f64> {
        let (a, b) = self.domain;
        let m = self.n_sensors;
        match self.kernel {
            Kernel::Rbf if m == 1 => vec![a],
            Kernel::Rbf => (0..m)
                .map(|i| a + (b - a) * i as f64 / (m - 1) as f64)
                .collect(),
            Kernel::PeriodicRbf { .. } => {
                (0..m).map(|i| a + (b - a) * i as f64 / m as f64).collect()
            }
        }
    }

    fn validate(&self) -> Result<(), GrfError> {
        if self.n_sensors == 0 {
            return Err(GrfError::Config("need at least one sensor".into()));
        }
        if !(self.length_scale > 0.0) {
            return Err(GrfError::Config("length scale must be positive".into()));
        }
        if !(self.domain.1 > self.domain.0) {
            return Err(GrfError::Config("empty domain".into()));
        }
        if let Kernel::PeriodicRbf { period } = self.kernel {
            if !(period > 0.0) {
                return Err(GrfError::Config("period must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A batch of input functions: row `i` holds function `i` at the sensors.
#[derive(Clone, Debug, PartialEq)]
pub struct InputFunctionSet {
    pub values: Array2<f64>,
    pub sensors: Vec<f64>,
    pub config: GrfConfig,
    pub seed: u64,
}

impl InputFunctionSet {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values
            .row(i)
            .to_slice()
            .expect("function rows are contiguous")
    }

    /// Evaluate function `i` between sensors.
    pub fn evaluate(&self, i: usize, x: f64) -> Result<f64, GrfError> {
        match self.config.kernel {
            Kernel::Rbf => evaluate_function(self.row(i), &self.sensors, x),
            Kernel::PeriodicRbf { period } => Ok(evaluate_periodic(
                self.row(i),
                self.config.domain.0,
                period,
                x,
            )),
        }
    }
}

pub fn kernel_value(d: f64, length_scale: f64, kernel: Kernel) -> f64 {
    let rbf = |d: f64| (-(d * d) / (2.0 * length_scale * length_scale)).exp();
    match kernel {
        Kernel::Rbf => rbf(d),
        Kernel::PeriodicRbf { period } => {
            let images = periodic_image_count(length_scale, period);
            let sum = |d: f64| {
                (-images..=images)
                    .map(|n| rbf(d + n as f64 * period))
                    .sum::<f64>()
            };
            sum(d) / sum(0.0)
        }
    }
}

/// Enough images that the neglected terms are below f64 resolution.
fn periodic_image_count(length_scale: f64, period: f64) -> i64 {
    // exp(-x^2/2) < 1e-20 for x > 9.6
    ((9.6 * length_scale / period).ceil() as i64).max(1) + 1
}

/// Covariance matrix at the given sensors with `jitter` added to the diagonal.
pub fn kernel_matrix(
    sensors: &[f64],
    length_scale: f64,
    kernel: Kernel,
    jitter: f64,
) -> Array2<f64> {
    let n = sensors.len();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0 + jitter;
        for j in 0..i {
            let v = kernel_value(sensors[i] - sensors[j], length_scale, kernel);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>, GrfError> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) {
            return Err(GrfError::NotPositiveDefinite {
                index: j,
                pivot: diag,
            });
        }
        let d = diag.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Draw `n_functions` zero-mean fields. Row `i` is `L z_i` with `z_i` drawn
/// from its own stream derived from `(seed, i)`, so a row does not depend on
/// how many rows are requested.
pub fn sample_functions(
    config: &GrfConfig,
    n_functions: usize,
    seed: u64,
) -> Result<InputFunctionSet, GrfError> {
    config.validate()?;
    let sensors = config.sensors();
    let k = kernel_matrix(&sensors, config.length_scale, config.kernel, config.jitter);
    let l = cholesky(&k)?;
    let m = sensors.len();
    let mut values = Array2::zeros((n_functions, m));
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        let mut rng = seeded(child_seed(seed, i as u64));
        let z: Array1<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        row.assign(&l.dot(&z));
    }
    Ok(InputFunctionSet {
        values,
        sensors,
        config: config.clone(),
        seed,
    })
}

/// Piecewise-linear interpolation of sensor values; exact at the sensors.
pub fn evaluate_function(values: &[f64], sensors: &[f64], x: f64) -> Result<f64, GrfError> {
    let (lo, hi) = (sensors[0], sensors[sensors.len() - 1]);
    if !(x >= lo && x <= hi) {
        return Err(GrfError::OutOfDomain { x, lo, hi });
    }
    if sensors.len() == 1 {
        return Ok(values[0]);
    }
    // index of the first sensor strictly greater than x, clamped to a valid segment
    let right = sensors
        .partition_point(|&s| s <= x)
        .clamp(1, sensors.len() - 1);
    let left = right - 1;
    let (x0, x1) = (sensors[left], sensors[right]);
    if x == x0 {
        return Ok(values[left]);
    }
    let w = (x - x0) / (x1 - x0);
    Ok(values[left] + w * (values[right] - values[left]))
}

/// Piecewise-linear interpolation of values on the uniform periodic grid
/// `a + j * period / m`, wrapping between the last sensor and `a + period`.
pub fn evaluate_periodic(values: &[f64], a: f64, period: f64, x: f64) -> f64 {
    let m = values.len();
    let h = period / m as f64;
    let xi = (x - a).rem_euclid(period) / h;
    let j = (xi.floor() as usize).min(m - 1);
    let w = xi - j as f64;
    if w == 0.0 {
        return values[j];
    }
    values[j] + w * (values[(j + 1) % m] - values[j])
}
