//! Central finite differences, used as an independent oracle for analytic
//! gradients.

pub const STEP: f64 = 1e-5;

/// Numerical gradient of `f` at `x`.
pub fn gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + STEP;
            let up = f(&probe);
            probe[k] = orig - STEP;
            let down = f(&probe);
            probe[k] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// `max_k |a_k - b_k| / max(|a_k|, |b_k|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    const FLOOR: f64 = 1e-6;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(FLOOR))
        .fold(0.0, f64::max)
}

use synthrec_core::nn::{
    bce_grad, bce_loss, mse_grad, mse_loss, BatchNorm, Dense, Dropout, Layer, LeakyRelu, Mode,
    Sequential, Sigmoid, Tensor2,
};
use synthrec_core::Rng;

fn random_tensor(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Tensor2 {
    let data = (0..rows * cols).map(|_| scale * rng.standard_normal()).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

/// Scalar probe `sum(probe ⊙ forward(x))`; its gradient with respect to the
/// output is `probe`.
fn probe_loss(net: &Sequential, x: &Tensor2, probe: &Tensor2, rng: &Rng) -> f64 {
    let mut net = net.clone();
    let mut rng = rng.clone();
    let out = net.forward(x, Mode::Train, &mut rng).unwrap();
    out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

/// Worst relative error between analytic and central-difference gradients of
/// a network, over its input and every parameter.
pub fn network_gradient_error(net: &Sequential, x: &Tensor2, rng: &Rng, probe_seed: u64) -> f64 {
    let mut analytic_net = net.clone();
    let mut fwd_rng = rng.clone();
    let out = analytic_net.forward(x, Mode::Train, &mut fwd_rng).unwrap();
    let probe = random_tensor(&mut Rng::new(probe_seed), out.rows(), out.cols(), 1.0);
    let grad_in = analytic_net.backward(&probe).unwrap();

    let numeric_in = gradient(x.data(), |v| {
        let xv = Tensor2::from_vec(x.rows(), x.cols(), v.to_vec()).unwrap();
        probe_loss(net, &xv, &probe, rng)
    });
    let mut worst = max_relative_error(grad_in.data(), &numeric_in);

    let analytic_params: Vec<Vec<f64>> =
        analytic_net.params().iter().map(|p| p.grad.to_vec()).collect();
    let mut base = net.clone();
    let values: Vec<Vec<f64>> = base.params().iter().map(|p| p.value.to_vec()).collect();
    for (g, value) in values.iter().enumerate() {
        let numeric = gradient(value, |v| {
            let mut probe_net = net.clone();
            probe_net.params()[g].value.copy_from_slice(v);
            probe_loss(&probe_net, x, &probe, rng)
        });
        worst = worst.max(max_relative_error(&analytic_params[g], &numeric));
    }
    worst
}

type Builder = fn(usize, usize, &mut Rng) -> Sequential;

pub struct LayerCase {
    pub name: &'static str,
    pub worst: f64,
}

/// Runs `instances` random gradient checks for each layer kind and both
/// losses, returning the worst relative error per kind.
pub fn layer_gradient_suite(instances: usize, seed: u64) -> Vec<LayerCase> {
    let mut rng = Rng::new(seed);
    let dims = |rng: &mut Rng| (2 + rng.below(7), 1 + rng.below(8), 1 + rng.below(8));
    let kinds: [(&str, Builder); 6] = [
        ("dense", |i, o, r| Sequential::new(vec![Layer::Dense(Dense::glorot(i, o, r))])),
        ("leaky_relu", |i, _, _| {
            let _ = i;
            Sequential::new(vec![Layer::LeakyRelu(LeakyRelu::new(0.2))])
        }),
        ("sigmoid", |_, _, _| Sequential::new(vec![Layer::Sigmoid(Sigmoid::default())])),
        ("batchnorm", |i, _, r| {
            let gamma = (0..i).map(|_| 0.5 + r.uniform()).collect();
            let beta = (0..i).map(|_| r.standard_normal()).collect();
            let bn = BatchNorm::new(i, 0.8, 1e-5).unwrap().with_affine(gamma, beta).unwrap();
            Sequential::new(vec![Layer::BatchNorm(bn)])
        }),
        ("dropout", |_, _, _| Sequential::new(vec![Layer::Dropout(Dropout::new(0.2).unwrap())])),
        ("stack", |i, o, r| {
            Sequential::new(vec![
                Layer::Dense(Dense::glorot(i, 6, r)),
                Layer::LeakyRelu(LeakyRelu::new(0.2)),
                Layer::BatchNorm(BatchNorm::new(6, 0.8, 1e-5).unwrap()),
                Layer::Dense(Dense::glorot(6, o, r)),
                Layer::Dropout(Dropout::new(0.2).unwrap()),
                Layer::Dense(Dense::glorot(o, 1, r)),
                Layer::Sigmoid(Sigmoid::default()),
            ])
        }),
    ];
    let mut out = Vec::new();
    for (name, build) in kinds {
        let mut worst = 0.0f64;
        for k in 0..instances {
            let (rows, i, o) = dims(&mut rng);
            let net = build(i, o, &mut rng);
            let x = random_tensor(&mut rng, rows, i, 1.0);
            let layer_rng = Rng::new(seed ^ (k as u64 + 1));
            worst = worst.max(network_gradient_error(&net, &x, &layer_rng, k as u64));
        }
        out.push(LayerCase { name, worst });
    }

    let mut worst_mse = 0.0f64;
    let mut worst_bce = 0.0f64;
    for _ in 0..instances {
        let (rows, cols, _) = dims(&mut rng);
        let pred = random_tensor(&mut rng, rows, cols, 1.0);
        let target = random_tensor(&mut rng, rows, cols, 1.0);
        let numeric = gradient(pred.data(), |v| {
            mse_loss(&Tensor2::from_vec(rows, cols, v.to_vec()).unwrap(), &target).unwrap()
        });
        worst_mse = worst_mse.max(max_relative_error(mse_grad(&pred, &target).unwrap().data(), &numeric));

        let probs = Tensor2::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform_range(0.05, 0.95)).collect(),
        )
        .unwrap();
        let labels = Tensor2::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| (rng.uniform() < 0.5) as u8 as f64).collect(),
        )
        .unwrap();
        let numeric = gradient(probs.data(), |v| {
            bce_loss(&Tensor2::from_vec(rows, cols, v.to_vec()).unwrap(), &labels).unwrap()
        });
        worst_bce = worst_bce.max(max_relative_error(bce_grad(&probs, &labels).unwrap().data(), &numeric));
    }
    out.push(LayerCase { name: "mse_loss", worst: worst_mse });
    out.push(LayerCase { name: "bce_loss", worst: worst_bce });
    out
}
