use ndarray::{Array, Dimension, ShapeBuilder};
use rand::Rng;

/// Inverted dropout: during training each unit is kept with probability
/// `1 - p` and scaled by `1 / (1 - p)`; evaluation is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub p: f64,
}

impl Dropout {
    pub fn new(p: f64) -> Self {
        assert!(
            (0.0..1.0).contains(&p),
            "dropout probability must be in [0, 1)"
        );
        Self { p }
    }

    /// Multiplicative mask with entries `0` or `1 / (1 - p)`.
    pub fn sample_mask<D, Sh, R>(&self, shape: Sh, rng: &mut R) -> Array<f64, D>
    where
        D: Dimension,
        Sh: ShapeBuilder<Dim = D>,
        R: Rng + ?Sized,
    {
        let scale = 1.0 / (1.0 - self.p);
        let p = self.p;
        Array::from_shape_simple_fn(shape, || if rng.random::<f64>() < p { 0.0 } else { scale })
    }
}
