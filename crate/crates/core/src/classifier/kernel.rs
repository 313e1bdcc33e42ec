/// Radial basis function kernel `exp(-gamma * |x - z|^2)`.
pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    debug_assert_eq!(x.len(), z.len());
    (-gamma * squared_distance(x, z)).exp()
}

pub fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}
