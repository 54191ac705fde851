//! Discrete Fourier transform helpers.
//!
//! Convention: the forward transform is unscaled,
//! `X[k] = sum_j x[j] exp(-2 pi i j k / n)`, and the inverse carries the
//! `1/n` factor so that `inverse(forward(x)) == x`.

use std::sync::Arc;

pub use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse transforms of one length with their scratch space.
pub struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len);
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len);
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let scale = 1.0 / self.len as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }
}

pub fn fft(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    if !out.is_empty() {
        FftPair::new(v.len()).forward(&mut out);
    }
    out
}

pub fn ifft(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    if !out.is_empty() {
        FftPair::new(v.len()).inverse(&mut out);
    }
    out
}

/// Signed wavenumber index of FFT bin `k` for a transform of length `n`.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}
