use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{array_slice, array_slice_mut};
use super::{glorot_uniform, Activation, NnError, Params, Result};

/// Fully connected layer `y = act(W x + b)` with `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(NnError::Shape(format!(
                "weights have {} rows but bias has {} entries",
                weights.nrows(),
                bias.len()
            )));
        }
        Ok(Self {
            weights: weights.as_standard_layout().into_owned(),
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            weights: glorot_uniform(inputs, outputs, rng),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(NnError::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut y = self.weights.dot(&x) + &self.bias;
        let act = self.activation;
        y.mapv_inplace(|v| act.apply(v));
        Ok(y)
    }

    /// Forward pass over a batch whose rows are samples. Panics on a width mismatch.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.input_dim(), "dense batch width mismatch");
        let mut y = x.dot(&self.weights.t());
        y += &self.bias;
        let act = self.activation;
        y.mapv_inplace(|v| act.apply(v));
        y
    }

    /// Reverse pass. `x` and `y` are the batch input and output recorded by
    /// [`Dense::forward_batch`]; `grad_y` is dL/dy. Returns dL/dparams and,
    /// if requested, dL/dx.
    pub fn backward_batch(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        mut grad_y: Array2<f64>,
        want_input_grad: bool,
    ) -> (Dense, Option<Array2<f64>>) {
        let act = self.activation;
        if act != Activation::Identity {
            Zip::from(&mut grad_y)
                .and(&y)
                .for_each(|g, &out| *g *= act.derivative_from_output(out));
        }
        let grad_w = grad_y.t().dot(&x);
        let grad_b = grad_y.sum_axis(Axis(0));
        let grad_x = want_input_grad.then(|| grad_y.dot(&self.weights));
        (
            Dense {
                weights: grad_w.as_standard_layout().into_owned(),
                bias: grad_b,
                activation: act,
            },
            grad_x,
        )
    }
}

impl Params for Dense {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(array_slice(&self.weights));
        f(array_slice(&self.bias));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(array_slice_mut(&mut self.weights));
        f(array_slice_mut(&mut self.bias));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = Dense::new(Array2::eye(3), Array1::zeros(3), Activation::Identity).unwrap();
        let x = array![1.5, -2.0, 0.25];
        assert_eq!(layer.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        let layer = Dense::new(array![[1.0]], array![-2.0], Activation::Relu).unwrap();
        assert_eq!(layer.forward(array![1.0].view()).unwrap(), array![0.0]);
    }

    #[test]
    fn zero_weights_return_bias() {
        let layer = Dense::new(
            Array2::zeros((2, 4)),
            array![0.5, -1.0],
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(
            layer.forward(array![1.0, 2.0, 3.0, 4.0].view()).unwrap(),
            array![0.5, -1.0]
        );
    }

    #[test]
    fn rejects_wrong_input_width() {
        let layer = Dense::zeros(3, 2, Activation::Relu);
        assert!(matches!(
            layer.forward(array![1.0].view()),
            Err(NnError::Shape(_))
        ));
        assert!(Dense::new(Array2::zeros((2, 3)), Array1::zeros(3), Activation::Relu).is_err());
    }

    #[test]
    fn linear_mse_gradient_has_closed_form() {
        // L = (Wx + b - y)^2  =>  dL/dW = 2 r x^T, dL/db = 2 r.
        let layer =
            Dense::new(array![[0.5, -1.0, 2.0]], array![0.1], Activation::Identity).unwrap();
        let x = array![[1.0, 2.0, -0.5]];
        let target = 0.3;
        let y = layer.forward_batch(x.view());
        let r = y[[0, 0]] - target;
        let (g, _) = layer.backward_batch(x.view(), y.view(), array![[2.0 * r]], false);
        for j in 0..3 {
            assert!((g.weights[[0, j]] - 2.0 * r * x[[0, j]]).abs() < 1e-15);
        }
        assert!((g.bias[0] - 2.0 * r).abs() < 1e-15);
    }
}
