use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, NnError, Params, Result};

/// Multi-layer perceptron: a chain of [`Dense`] layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations recorded during a forward pass: the batch input followed by
/// every layer's output.
#[derive(Clone, Debug)]
pub struct MlpTape {
    activations: Vec<Array2<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations
            .last()
            .expect("tape holds at least the input")
    }
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::Shape("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(NnError::Shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-initialised network with `sizes = [input, hidden.., output]`.
    /// Hidden layers use `hidden`; the last layer uses `output`.
    pub fn glorot<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::glorot(w[0], w[1], if i + 1 == n { output } else { hidden }, rng))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Dense::output_dim));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<ndarray::Array1<f64>> {
        let mut h = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            h = layer.forward(h.view())?;
        }
        Ok(h)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(x.ncols())?;
        let mut h = self.layers[0].forward_batch(x);
        for layer in &self.layers[1..] {
            h = layer.forward_batch(h.view());
        }
        Ok(h)
    }

    /// Forward pass that keeps what the reverse pass needs. Fails with the
    /// offending layer index if any activation is non-finite.
    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Result<MlpTape> {
        self.check_width(x.ncols())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward_batch(activations[i].view());
            if !y.iter().all(|v| v.is_finite()) {
                return Err(NnError::NonFinite { layer: i });
            }
            activations.push(y);
        }
        Ok(MlpTape { activations })
    }

    /// Back-propagate `grad_out = dL/d(output)` through the recorded tape.
    pub fn backward(
        &self,
        tape: &MlpTape,
        grad_out: Array2<f64>,
        want_input_grad: bool,
    ) -> (Mlp, Option<Array2<f64>>) {
        let n = self.layers.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(n);
        let mut upstream = grad_out;
        let mut input_grad = None;
        for i in (0..n).rev() {
            let need_dx = i > 0 || want_input_grad;
            let (g, dx) = self.layers[i].backward_batch(
                tape.activations[i].view(),
                tape.activations[i + 1].view(),
                upstream,
                need_dx,
            );
            grads.push(g);
            match dx {
                Some(dx) if i > 0 => upstream = dx,
                dx => {
                    input_grad = dx;
                    upstream = Array2::zeros((0, 0));
                }
            }
        }
        grads.reverse();
        (Mlp { layers: grads }, input_grad)
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.input_dim() {
            return Err(NnError::Shape(format!(
                "network expects {} inputs, got {width}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

impl Params for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.layers.iter().for_each(|l| l.visit(f));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.layers.iter_mut().for_each(|l| l.visit_mut(f));
    }
}
