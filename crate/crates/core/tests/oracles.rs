mod common;

use common::oracle::*;

use synthrec_core::dataset::*;
use synthrec_core::deepmf::*;
use synthrec_core::discretize::*;
use synthrec_core::evaluate::*;
use synthrec_core::nn::Tensor2;
use synthrec_core::Rng;

#[test]
fn deepmf_recovers_rank_one_factors() {
    let d = rank_one();
    let (train, test) = split(&d, 0.2, &mut Rng::new(3)).unwrap();
    let (model, history) = train_deepmf(&train, &rank_one_config(), &mut Rng::new(4)).unwrap();
    assert_eq!(history.epoch_mse.len(), 20);
    assert!(history.epoch_mse[19] <= history.epoch_mse[0]);
    let mse = test
        .triples()
        .iter()
        .map(|t| (model.predict(t.user, t.item).unwrap() - t.rating as f64).powi(2))
        .sum::<f64>()
        / test.len() as f64;
    assert!(mse < 0.1, "held-out mse {mse}");
}

#[test]
fn eval_fit_on_rank_one_oracle() {
    let cfg = EvalConfig {
        deepmf: rank_one_config(),
        seed: 8,
        ..Default::default()
    };
    let (model, split) = eval_model_fit(&rank_one(), &cfg).unwrap();
    let (mae, _) = mae_accuracy(&model, &split.test).unwrap();
    assert!(mae < 0.15, "mae {mae}");
    let (again, split2) = eval_model_fit(&rank_one(), &cfg).unwrap();
    assert_eq!(again, model);
    assert_eq!(split2, split);
}

#[test]
fn kmeans_matches_exhaustive_optimum() {
    let pts = twelve_points();
    let best = brute_force_sse(&pts);
    let x = tensor(&pts);
    let mut hits = 0;
    for seed in 0..20 {
        let m = kmeans_fit(&x, 3, &mut Rng::new(seed), &KMeansConfig::default()).unwrap();
        for w in m.inertia_history().windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {:?}", m.inertia_history());
        }
        if (m.inertia() - best).abs() < 1e-9 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20 restarts reached {best}");
}

#[test]
fn overlapping_points_best_restart_is_optimal() {
    let pts: Vec<[f64; 2]> = blobs(12, 3.0, 21);
    let best = brute_force_sse(&pts);
    let x = tensor(&pts);
    let fits: Vec<f64> = (0..20)
        .map(|seed| kmeans_fit(&x, 3, &mut Rng::new(seed), &KMeansConfig::default()).unwrap().inertia())
        .collect();
    assert!(fits.iter().all(|&f| f >= best - 1e-9));
    assert!(fits.iter().any(|&f| (f - best).abs() < 1e-9), "{fits:?} vs {best}");
}

#[test]
fn separated_blobs_are_recovered() {
    let mut rng = Rng::new(2);
    let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let pts: Vec<[f64; 2]> = (0..60)
        .map(|k| {
            let c = centres[k / 20];
            [c[0] + rng.standard_normal(), c[1] + rng.standard_normal()]
        })
        .collect();
    let x = tensor(&pts);
    let m = kmeans_fit(&x, 3, &mut Rng::new(0), &KMeansConfig::default()).unwrap();
    let ids = assign_all(&m, &x).unwrap();
    for blob in 0..3 {
        let first = ids[blob * 20];
        assert!(ids[blob * 20..(blob + 1) * 20].iter().all(|&i| i == first));
    }
    assert_ne!(ids[0], ids[20]);
    assert_ne!(ids[20], ids[40]);
    assert_ne!(ids[0], ids[40]);
    let sub: Vec<[f64; 2]> = (0..12).map(|k| pts[(k % 3) * 20 + k / 3]).collect();
    let sub = &sub[..];
    let m12 = kmeans_fit(&tensor(sub), 3, &mut Rng::new(0), &KMeansConfig::default()).unwrap();
    assert!((m12.inertia() - brute_force_sse(sub)).abs() < 1e-9);
}

#[test]
fn near_identical_samples_share_an_item_id() {
    let codec = RatingCodec::new(RatingRange::new(1, 5).unwrap());
    let rows = vec![
        vec![0.1, 0.2, 1.0, 1.0, 0.0],
        vec![0.1, 0.2, 1.001, 0.999, 0.5],
        vec![-1.0, 0.3, -2.0, 0.5, 1.4],
    ];
    let fakes = synthrec_core::gan::FakeDenseSet {
        samples: Tensor2::from_rows(&rows).unwrap(),
        std: 1.0,
        seed: 0,
    };
    let users = ClusterModel::from_centroids(Tensor2::from_rows(&[vec![0.0, 0.0], vec![-1.0, 0.0]]).unwrap()).unwrap();
    let items = ClusterModel::from_centroids(Tensor2::from_rows(&[vec![1.0, 1.0], vec![-2.0, 0.0]]).unwrap()).unwrap();
    let t = discretize_samples(&fakes, &users, &items, &codec).unwrap();
    assert_eq!(t[0], RatingTriple::new(1, 1, 3));
    assert_eq!(t[1].item, t[0].item);
    assert_eq!(t[2], RatingTriple::new(2, 2, 5));
}

#[test]
fn single_user_cluster_pigeonhole() {
    let mut rng = Rng::new(1);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..5).map(|_| rng.standard_normal()).collect()).collect();
    let fakes = synthrec_core::gan::FakeDenseSet {
        samples: Tensor2::from_rows(&rows).unwrap(),
        std: 1.0,
        seed: 0,
    };
    let codec = RatingCodec::new(RatingRange::new(1, 5).unwrap());
    let spec = SynthesisSpec {
        users: 1,
        items: 6,
        samples: 400,
        std: 1.0,
        conflict_policy: ConflictPolicy::Keep,
        seed: 3,
        cluster_sample: None,
        kmeans: KMeansConfig::default(),
    };
    let s = discretize_fakes(fakes, codec, &spec).unwrap();
    assert_eq!(s.dataset.triples().iter().map(|t| t.user).max(), Some(1));
    assert!(s.dataset.len() <= 6 * 5);
}
