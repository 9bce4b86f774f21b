use crate::container::Container;
use crate::error::Result;
use crate::numerics::Tensor;

use super::{check_dim, matrix_dims};

/// Per-dimension z-score fitted on training features. Constant dimensions
/// keep unit scale so they map to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub const KIND: &'static str = "standardizer";

    pub fn fit(x: &Tensor<f64>) -> Result<Self> {
        let (n, d) = matrix_dims(x, "standardize")?;
        let mut mean = vec![0.0; d];
        for row in x.data().chunks(d) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in x.data().chunks(d) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (_, d) = matrix_dims(x, "standardize")?;
        check_dim(self.mean.len(), d, "standardize")?;
        let data = x
            .data()
            .chunks(d)
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s))
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(Self::KIND, "{}");
        c.push("mean", &Tensor::new(vec![self.mean.len()], self.mean.clone()).expect("1-d"));
        c.push("scale", &Tensor::new(vec![self.scale.len()], self.scale.clone()).expect("1-d"));
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        Ok(Standardizer {
            mean: c.take::<f64>("mean")?.into_data(),
            scale: c.take::<f64>("scale")?.into_data(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_unit_variance() {
        let x = Tensor::from_rows(&[vec![1.0, 5.0, 3.0], vec![3.0, 5.0, -1.0], vec![5.0, 5.0, 1.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        let z = s.transform(&x).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| z.data()[i * 3 + j]).collect();
            let m = col.iter().sum::<f64>() / 3.0;
            let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-12);
            assert!(j == 1 && v == 0.0 || (v - 1.0).abs() < 1e-12);
        }
        let back = Standardizer::from_container(Container::from_bytes(&s.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
