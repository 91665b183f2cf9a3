use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FusionError};
use crate::num::Scalar;

/// Per-feature centering and scaling. Zero-variance features get scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![T::zero(); dim],
            scale: vec![T::one(); dim],
        }
    }

    /// Mean and population standard deviation of each column.
    pub fn fit(x: &FeatureMatrix<T>) -> Result<Self, FusionError> {
        if x.rows() == 0 {
            return Err(FusionError::EmptyInput);
        }
        x.check_finite()?;
        let n = T::of_usize(x.rows());
        let dim = x.dim();
        let mut mean = vec![T::zero(); dim];
        for row in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m / n;
        }
        let mut var = vec![T::zero(); dim];
        let mut constant = vec![true; dim];
        let first = x.row(0);
        for row in x.iter_rows() {
            for k in 0..dim {
                let d = row[k] - mean[k];
                var[k] = var[k] + d * d;
                constant[k] &= row[k] == first[k];
            }
        }
        let scale = var
            .into_iter()
            .zip(constant)
            .map(|(v, c)| {
                let s = (v / n).sqrt();
                if c || s <= T::zero() {
                    T::one()
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &FeatureMatrix<T>) -> FeatureMatrix<T> {
        let mut data = Vec::with_capacity(x.rows() * x.dim());
        for row in x.iter_rows() {
            data.extend(self.transform_row(row));
        }
        FeatureMatrix::new(x.rows(), x.dim(), data).expect("shape preserved")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr_free::standard_normal;

    mod rand_distr_free {
        use rand::Rng;
        // Box-Muller so the check does not share code with the implementation
        pub fn standard_normal(rng: &mut impl Rng) -> f64 {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    #[test]
    fn symmetric_pair() {
        let x = FeatureMatrix::new(2, 1, vec![0.0f64, 2.0]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.mean, vec![1.0]);
        assert_eq!(s.scale, vec![1.0]);
    }

    #[test]
    fn zero_variance_gets_unit_scale() {
        let x = FeatureMatrix::new(2, 1, vec![5.0f64, 5.0]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.mean, vec![5.0]);
        assert_eq!(s.scale, vec![1.0]);
        let x = FeatureMatrix::new(3, 1, vec![0.1f64, 0.1, 0.1]).unwrap();
        assert_eq!(Standardizer::fit(&x).unwrap().scale, vec![1.0]);
    }

    #[test]
    fn sampling_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..100).map(|_| standard_normal(&mut rng)).collect();
        let s = Standardizer::fit(&FeatureMatrix::new(100, 1, data).unwrap()).unwrap();
        assert!(s.mean[0].abs() < 0.5);
        assert!((s.scale[0] - 1.0).abs() < 0.5);
    }

    #[test]
    fn empty_rejected() {
        let x = FeatureMatrix::<f32>::new(0, 3, vec![]).unwrap();
        assert!(matches!(
            Standardizer::fit(&x),
            Err(FusionError::EmptyInput)
        ));
    }
}
