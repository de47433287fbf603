mod common;

use common::fd::{gradient, layer_gradient_suite, max_relative_error};
use synthrec_core::nn::{dot, dropout, Tensor2};
use synthrec_core::Rng;

#[test]
fn every_layer_and_loss_matches_finite_differences() {
    for case in layer_gradient_suite(20, 17) {
        assert!(case.worst < 1e-4, "{}: relative error {}", case.name, case.worst);
    }
}

#[test]
fn dot_product_gradient_matches_finite_differences() {
    // d/du (u·i - y)^2 = 2(u·i - y) i, and symmetrically for i
    let mut rng = Rng::new(3);
    for _ in 0..20 {
        let u: Vec<f64> = (0..5).map(|_| rng.standard_normal()).collect();
        let i: Vec<f64> = (0..5).map(|_| rng.standard_normal()).collect();
        let y = rng.uniform_range(1.0, 5.0);
        let err = dot(&u, &i) - y;
        let gu: Vec<f64> = i.iter().map(|v| 2.0 * err * v).collect();
        let gi: Vec<f64> = u.iter().map(|v| 2.0 * err * v).collect();
        let nu = gradient(&u, |v| (dot(v, &i) - y).powi(2));
        let ni = gradient(&i, |v| (dot(&u, v) - y).powi(2));
        assert!(max_relative_error(&gu, &nu) < 1e-4);
        assert!(max_relative_error(&gi, &ni) < 1e-4);
    }
}

#[test]
fn inverted_dropout_preserves_expectation() {
    let x = Tensor2::from_rows(&[vec![1.0, -2.0, 0.5, 3.0]]).unwrap();
    let mut rng = Rng::new(77);
    let reps = 100_000;
    let mut acc = [0.0; 4];
    for _ in 0..reps {
        let y = dropout(&x, 0.2, true, &mut rng).unwrap();
        for (a, v) in acc.iter_mut().zip(y.data()) {
            *a += v;
        }
    }
    for (a, &v) in acc.iter().zip(x.data()) {
        let mean = a / reps as f64;
        assert!((mean - v).abs() <= 0.01 * v.abs(), "{mean} vs {v}");
    }
}
