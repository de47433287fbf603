//! A small feed-forward network engine: dense layers, LeakyReLU, sigmoid,
//! batch normalization, inverted dropout, MSE and binary cross-entropy losses
//! and the Adam optimizer, all with analytic gradients.

mod adam;
mod layers;
mod loss;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{
    batchnorm_forward, dense_forward, dropout, leaky_relu, sigmoid, BatchNorm, Dense, Dropout,
    Layer, LayerSpec, LeakyRelu, Mode, Param, Sequential, Sigmoid,
};
pub use loss::{bce_grad, bce_loss, mse_grad, mse_loss, BCE_CLAMP};
pub use tensor::{dot, Tensor2};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// `n × dim` draws from `Normal(0, std²)`, filled row by row.
pub fn gaussian_noise(rng: &mut Rng, n: usize, dim: usize, std: f64) -> Result<Tensor2> {
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::Parameter(format!("noise std must be positive, got {std}")));
    }
    let data = (0..n * dim).map(|_| std * rng.standard_normal()).collect();
    Tensor2::from_vec(n, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(t: &Tensor2) -> (f64, f64) {
        let n = t.data().len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn unit_noise_moments() {
        let mut rng = Rng::new(11);
        let z = gaussian_noise(&mut rng, 10_000, 100, 1.0).unwrap();
        let (mean, std) = moments(&z);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((std - 1.0).abs() < 0.01, "std {std}");
    }

    #[test]
    fn scaled_noise_std() {
        let mut rng = Rng::new(12);
        let z = gaussian_noise(&mut rng, 1_000_000, 1, 2.5).unwrap();
        let (_, std) = moments(&z);
        assert!((std - 2.5).abs() < 0.02, "std {std}");
    }

    #[test]
    fn noise_is_seeded() {
        let a = gaussian_noise(&mut Rng::new(3), 4, 5, 1.0).unwrap();
        let b = gaussian_noise(&mut Rng::new(3), 4, 5, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_positive_std_rejected() {
        let mut rng = Rng::new(3);
        assert!(gaussian_noise(&mut rng, 1, 1, 0.0).is_err());
        assert!(gaussian_noise(&mut rng, 1, 1, -1.0).is_err());
    }
}
