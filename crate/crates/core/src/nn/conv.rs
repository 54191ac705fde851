use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_limit;
use super::params::{array_slice, array_slice_mut};
use super::{NnError, Params, Result};

/// One-dimensional convolution (cross-correlation) with per-channel bias.
///
/// Kernels are `out_channels x in_channels x kernel_len`; inputs are
/// channel-major, batched as `batch x channels x length`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub kernels: Array3<f64>,
    pub bias: Array1<f64>,
    pub stride: usize,
}

impl Conv1d {
    pub fn new(kernels: Array3<f64>, bias: Array1<f64>, stride: usize) -> Result<Self> {
        if kernels.dim().0 != bias.len() {
            return Err(NnError::Shape("one bias entry per output channel".into()));
        }
        if stride == 0 || kernels.dim().2 == 0 {
            return Err(NnError::Shape(
                "stride and kernel length must be positive".into(),
            ));
        }
        Ok(Self {
            kernels: kernels.as_standard_layout().into_owned(),
            bias,
            stride,
        })
    }

    /// Glorot-uniform kernels with `fan_in = in_channels * kernel_len` and
    /// `fan_out = out_channels * kernel_len`; zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let limit = glorot_limit(in_channels * kernel_len, out_channels * kernel_len);
        let kernels = Array3::from_shape_simple_fn((out_channels, in_channels, kernel_len), || {
            rng.random_range(-limit..=limit)
        });
        Self {
            kernels,
            bias: Array1::zeros(out_channels),
            stride,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.dim().0
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.dim().2
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if self.kernel_len() > input_len {
            return Err(NnError::Shape(format!(
                "kernel of length {} longer than input of length {input_len}",
                self.kernel_len()
            )));
        }
        Ok((input_len - self.kernel_len()) / self.stride + 1)
    }

    /// Single-sample forward pass on a `channels x length` sequence.
    pub fn forward_single(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let batch = x.insert_axis(Axis(0));
        Ok(self.forward(batch)?.index_axis_move(Axis(0), 0))
    }

    pub fn forward(&self, x: ArrayView3<f64>) -> Result<Array3<f64>> {
        let (batch, channels, len) = x.dim();
        if channels != self.in_channels() {
            return Err(NnError::Shape(format!(
                "conv expects {} input channels, got {channels}",
                self.in_channels()
            )));
        }
        let out_len = self.output_len(len)?;
        let k = self.kernel_len();
        let mut y = Array3::zeros((batch, self.out_channels(), out_len));
        for b in 0..batch {
            for o in 0..self.out_channels() {
                for t in 0..out_len {
                    let start = t * self.stride;
                    let mut acc = self.bias[o];
                    for c in 0..channels {
                        for j in 0..k {
                            acc += self.kernels[[o, c, j]] * x[[b, c, start + j]];
                        }
                    }
                    y[[b, o, t]] = acc;
                }
            }
        }
        Ok(y)
    }

    /// Reverse pass for the affine part (no activation). Returns parameter
    /// gradients and dL/dx.
    pub fn backward(&self, x: ArrayView3<f64>, grad_y: ArrayView3<f64>) -> (Conv1d, Array3<f64>) {
        let (batch, channels, _) = x.dim();
        let out_len = grad_y.dim().2;
        let k = self.kernel_len();
        let mut gk = Array3::zeros(self.kernels.dim());
        let mut gb = Array1::zeros(self.out_channels());
        let mut gx = Array3::zeros(x.dim());
        for b in 0..batch {
            for o in 0..self.out_channels() {
                for t in 0..out_len {
                    let g = grad_y[[b, o, t]];
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    let start = t * self.stride;
                    for c in 0..channels {
                        for j in 0..k {
                            gk[[o, c, j]] += g * x[[b, c, start + j]];
                            gx[[b, c, start + j]] += g * self.kernels[[o, c, j]];
                        }
                    }
                }
            }
        }
        (
            Conv1d {
                kernels: gk,
                bias: gb,
                stride: self.stride,
            },
            gx,
        )
    }
}

impl Params for Conv1d {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(array_slice(&self.kernels));
        f(array_slice(&self.bias));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(array_slice_mut(&mut self.kernels));
        f(array_slice_mut(&mut self.bias));
    }
}
