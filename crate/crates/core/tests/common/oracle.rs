use synthrec_core::dataset::*;
use synthrec_core::deepmf::*;
use synthrec_core::nn::{AdamConfig, Tensor2};
use synthrec_core::Rng;

/// Full 50×50 matrix with vote `a_u · b_i`, `a, b ∈ {1, 2}`.
pub fn rank_one() -> Dataset {
    let f = |k: u32| if k.is_multiple_of(2) { 2 } else { 1 };
    let triples = (1..=50u32)
        .flat_map(|u| (1..=50u32).map(move |i| RatingTriple::new(u, i, f(u) * f(i))))
        .collect();
    Dataset::new(triples, 50, 50, RatingRange::new(1, 5).unwrap(), "rank-one").unwrap()
}

pub fn rank_one_config() -> DeepMfConfig {
    DeepMfConfig {
        batch_size: 32,
        adam: AdamConfig::default().with_learning_rate(0.01),
        ..DeepMfConfig::default()
    }
}

pub fn sse(points: &[[f64; 2]], labels: &[usize], k: usize) -> Option<f64> {
    let mut sum = vec![[0.0; 2]; k];
    let mut n = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sum[l][0] += p[0];
        sum[l][1] += p[1];
        n[l] += 1;
    }
    if n.contains(&0) {
        return None;
    }
    Some(
        points
            .iter()
            .zip(labels)
            .map(|(p, &l)| {
                let c = [sum[l][0] / n[l] as f64, sum[l][1] / n[l] as f64];
                (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)
            })
            .sum(),
    )
}

/// Minimum SSE over all 3^n labelings with no empty cluster.
pub fn brute_force_sse(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % 3;
            c /= 3;
        }
        if let Some(s) = sse(points, &labels, 3) {
            best = best.min(s);
        }
    }
    best
}

/// 12 points from three blobs whose centres are 10σ apart.
pub fn twelve_points() -> Vec<[f64; 2]> {
    blobs(12, 1.0, 21)
}

pub fn blobs(n: usize, sigma: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = Rng::new(seed);
    let centres = [[0.0, 0.0], [10.0, 0.0], [5.0, 8.66]];
    (0..n)
        .map(|k| {
            let c = centres[k % 3];
            [c[0] + sigma * rng.standard_normal(), c[1] + sigma * rng.standard_normal()]
        })
        .collect()
}

pub fn tensor(points: &[[f64; 2]]) -> Tensor2 {
    Tensor2::from_vec(points.len(), 2, points.iter().flatten().copied().collect()).unwrap()
}
