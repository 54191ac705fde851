/// Uniform access to the trainable values of a model.
///
/// Implementors visit their parameter tensors in a fixed order; that order
/// defines the layout of flattened vectors, optimizer moments and the
/// checkpoint blob. A model value doubles as its own gradient container.
pub trait Params {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }

    /// Overwrite all parameters from a flat vector in visiting order.
    ///
    /// Panics if `values` does not hold exactly `num_params()` entries.
    fn assign(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "parameter count mismatch");
        let mut offset = 0;
        self.visit_mut(&mut |s| {
            let n = s.len();
            s.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        });
    }

    fn zeroed(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.visit_mut(&mut |s| s.fill(0.0));
        z
    }

    /// `self += scale * other`, coordinate-wise in visiting order.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut offset = 0;
        self.visit_mut(&mut |s| {
            let n = s.len();
            for (a, b) in s.iter_mut().zip(&flat[offset..offset + n]) {
                *a += scale * b;
            }
            offset += n;
        });
    }
}

pub(crate) fn array_slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice_memory_order()
        .expect("parameter arrays are contiguous")
}

pub(crate) fn array_slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_memory_order_mut()
        .expect("parameter arrays are contiguous")
}
