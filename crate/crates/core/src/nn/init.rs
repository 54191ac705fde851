use ndarray::Array2;
use rand::Rng;

/// Glorot (Xavier) uniform initialisation: entries drawn from
/// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
///
/// Returns a `fan_out x fan_in` matrix, the layout used by [`super::Dense`].
pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    assert!(fan_in >= 1 && fan_out >= 1, "fan sizes must be positive");
    let limit = glorot_limit(fan_in, fan_out);
    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit))
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
