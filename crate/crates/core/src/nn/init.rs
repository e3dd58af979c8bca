use ndarray::Array2;
use rand::Rng;

/// Glorot-uniform `out x in` matrix in `±√(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

/// Glorot matrix scaled by `gain`.
pub fn glorot_scaled<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    glorot(rows, cols, rng) * gain
}
