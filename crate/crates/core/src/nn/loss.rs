use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

fn check_same_shape(op: &'static str, a: &Tensor2, b: &Tensor2) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    Ok(())
}

pub fn mse_loss(pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    check_same_shape("mse_loss", pred, target)?;
    let n = pred.data().len().max(1) as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (t - p) * (t - p))
        .sum::<f64>()
        / n)
}

/// Gradient of [`mse_loss`] with respect to `pred`.
pub fn mse_grad(pred: &Tensor2, target: &Tensor2) -> Result<Tensor2> {
    check_same_shape("mse_grad", pred, target)?;
    let n = pred.data().len().max(1) as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Tensor2::from_vec(pred.rows(), pred.cols(), data)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

pub fn bce_loss(pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    check_same_shape("bce_loss", pred, target)?;
    let n = pred.data().len().max(1) as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = clamp_prob(p);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n)
}

/// Gradient of [`bce_loss`] with respect to `pred`, evaluated at the clamped
/// probabilities.
pub fn bce_grad(pred: &Tensor2, target: &Tensor2) -> Result<Tensor2> {
    check_same_shape("bce_grad", pred, target)?;
    let n = pred.data().len().max(1) as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = clamp_prob(p);
            (-(t / p) + (1.0 - t) / (1.0 - p)) / n
        })
        .collect();
    Tensor2::from_vec(pred.rows(), pred.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor2 {
        Tensor2::from_rows(&[v.to_vec()]).unwrap()
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse_loss(&t(&[1.0, 2.0]), &t(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(mse_loss(&t(&[0.0, 0.0]), &t(&[1.0, 3.0])).unwrap(), 5.0);
        assert!(mse_loss(&t(&[0.0]), &t(&[1.0, 3.0])).is_err());
    }

    #[test]
    fn bce_cases() {
        let l = bce_loss(&t(&[0.5, 0.5, 0.5]), &t(&[1.0, 0.0, 1.0])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let perfect = bce_loss(&t(&[1.0, 0.0]), &t(&[1.0, 0.0])).unwrap();
        assert!(perfect <= 1e-6);
    }
}
