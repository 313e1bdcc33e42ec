use crate::error::{Error, Result};

/// Per-feature z-score parameters fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub shift: Vec<f64>,
    /// Population standard deviations; zero deviations are stored as 1.
    pub scale: Vec<f64>,
}

impl ScalingParams {
    pub fn identity(dim: usize) -> Self {
        ScalingParams {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

pub fn fit_scaling(vectors: &[Vec<f64>]) -> Result<ScalingParams> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::insufficient("cannot fit scaling on an empty dataset"))?;
    let dim = first.len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::rejected("feature vectors differ in dimension"));
    }
    let n = vectors.len() as f64;
    let mut shift = vec![0.0; dim];
    for v in vectors {
        for (acc, x) in shift.iter_mut().zip(v) {
            *acc += x;
        }
    }
    shift.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in vectors {
        for ((acc, x), m) in var.iter_mut().zip(v).zip(&shift) {
            *acc += (x - m) * (x - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(ScalingParams { shift, scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vector() {
        let p = fit_scaling(&[vec![3.0, -1.0, 2.0]]).unwrap();
        assert_eq!(p.shift, vec![3.0, -1.0, 2.0]);
        assert_eq!(p.scale, vec![1.0; 3]);
    }

    #[test]
    fn two_points() {
        let p = fit_scaling(&[vec![0.0; 8], vec![2.0; 8]]).unwrap();
        assert_eq!(p.shift, vec![1.0; 8]);
        assert_eq!(p.scale, vec![1.0; 8]);
    }

    #[test]
    fn standardized_moments() {
        let data: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.37 + 5.0, 4.0, (i * i) as f64])
            .collect();
        let p = fit_scaling(&data).unwrap();
        let z: Vec<Vec<f64>> = data.iter().map(|v| p.apply(v)).collect();
        for j in 0..3 {
            let mean = z.iter().map(|v| v[j]).sum::<f64>() / 20.0;
            let sd = (z.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / 20.0).sqrt();
            assert!(mean.abs() < 1e-12);
            assert!(sd.abs() < 1e-12 || (sd - 1.0).abs() < 1e-12);
        }
        assert!(fit_scaling(&[]).is_err());
    }
}
