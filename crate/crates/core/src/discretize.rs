//! Turning generated dense samples into a sparse synthetic dataset: k-means
//! over fake user and item vectors, nearest-centroid IDs, vote decoding,
//! duplicate removal and conflicting-vote handling.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{read_container, write_container, ByteWriter};
use crate::dataset::{Dataset, RatingRange, RatingTriple};
use crate::deepmf::{round_away_from_midpoint, RatingCodec};
use crate::error::{Error, Result};
use crate::gan::{generate, FakeDenseSet, GeneratorModel};
use crate::nn::Tensor2;
use crate::rng::Rng;

const CLUSTER_MAGIC: &[u8; 8] = b"SRKMEANS";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-4,
        }
    }
}

/// K centroids in embedding space. IDs handed out by [`assign`] are the
/// 1-based centroid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    centroids: Tensor2,
    inertia: f64,
    inertia_history: Vec<f64>,
    iterations: usize,
}

impl ClusterModel {
    pub fn from_centroids(centroids: Tensor2) -> Result<Self> {
        if centroids.rows() == 0 || !centroids.is_finite() {
            return Err(Error::Validation(
                "cluster model needs at least one finite centroid".into(),
            ));
        }
        Ok(Self {
            centroids,
            inertia: 0.0,
            inertia_history: Vec::new(),
            iterations: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn centroids(&self) -> &Tensor2 {
        &self.centroids
    }

    /// Within-cluster sum of squared distances of the fitted vectors.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    /// Inertia after every assignment step, ending with the final one.
    pub fn inertia_history(&self) -> &[f64] {
        &self.inertia_history
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn nearest(&self, v: &[f64]) -> (usize, f64) {
        nearest(&self.centroids, v)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = ByteWriter::new();
        w.str("euclidean");
        w.f64(self.inertia);
        w.u64(self.iterations as u64);
        w.f64s(&self.inertia_history);
        w.tensor(&self.centroids);
        write_container(path.as_ref(), CLUSTER_MAGIC, FORMAT_VERSION, w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = read_container(path, CLUSTER_MAGIC, FORMAT_VERSION)?;
        let metric = r.str()?;
        if metric != "euclidean" {
            return Err(Error::Integrity {
                path: path.to_path_buf(),
                message: format!("unsupported metric '{metric}'"),
            });
        }
        let inertia = r.f64()?;
        let iterations = r.usize()?;
        let inertia_history = r.f64s()?;
        let centroids = r.tensor()?;
        r.finish()?;
        let mut m = Self::from_centroids(centroids)?;
        m.inertia = inertia;
        m.iterations = iterations;
        m.inertia_history = inertia_history;
        Ok(m)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lowest
/// index.
fn nearest(centroids: &Tensor2, v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(centroids.row(c), v);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn count_distinct(vectors: &Tensor2, stop_at: usize) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for r in 0..vectors.rows() {
        seen.insert(vectors.row(r).iter().map(|x| x.to_bits()).collect());
        if seen.len() >= stop_at {
            break;
        }
    }
    seen.len()
}

fn kmeans_plus_plus(vectors: &Tensor2, k: usize, rng: &mut Rng) -> Tensor2 {
    let n = vectors.rows();
    let mut centroids = Tensor2::zeros(k, vectors.cols());
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(vectors.row(first));
    let mut d2: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|r| sq_dist(vectors.row(r), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.uniform() * total;
        let mut pick = n - 1;
        for (r, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = r;
                break;
            }
            target -= d;
        }
        if d2[pick] == 0.0 {
            // rounding pushed us past the end; take the last point with positive weight
            pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
        }
        centroids.row_mut(c).copy_from_slice(vectors.row(pick));
        let new = centroids.row(c).to_vec();
        d2.par_iter_mut().enumerate().for_each(|(r, d)| {
            let nd = sq_dist(vectors.row(r), &new);
            if nd < *d {
                *d = nd;
            }
        });
    }
    centroids
}

fn assign_rows(centroids: &Tensor2, vectors: &Tensor2) -> (Vec<usize>, Vec<f64>) {
    (0..vectors.rows())
        .into_par_iter()
        .map(|r| nearest(centroids, vectors.row(r)))
        .unzip()
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Iterates until the largest centroid move is below `config.tol` or
/// `config.max_iters` updates have run. A cluster that loses all its members
/// is re-seeded with the point farthest from its current centroid.
pub fn kmeans_fit(vectors: &Tensor2, k: usize, rng: &mut Rng, config: &KMeansConfig) -> Result<ClusterModel> {
    let n = vectors.rows();
    if n == 0 || vectors.cols() == 0 {
        return Err(Error::Parameter("k-means needs at least one vector".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("k-means needs K ≥ 1".into()));
    }
    if !vectors.is_finite() {
        return Err(Error::Parameter("k-means input contains non-finite values".into()));
    }
    let distinct = count_distinct(vectors, k);
    if distinct < k {
        return Err(Error::Parameter(format!(
            "K = {k} exceeds the {distinct} distinct input vectors"
        )));
    }

    let dim = vectors.cols();
    let mut centroids = kmeans_plus_plus(vectors, k, rng);
    let mut history = Vec::new();
    let mut iterations = 0;
    let (mut labels, mut dists) = assign_rows(&centroids, vectors);
    history.push(dists.iter().sum::<f64>());

    while iterations < config.max_iters {
        iterations += 1;
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (r, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(vectors.row(r)) {
                *s += v;
            }
        }
        let mut taken: HashSet<usize> = HashSet::new();
        let mut shift = 0.0f64;
        for c in 0..k {
            let new: Vec<f64> = if counts[c] > 0 {
                sums[c * dim..(c + 1) * dim]
                    .iter()
                    .map(|s| s / counts[c] as f64)
                    .collect()
            } else {
                let far = (0..n)
                    .filter(|r| !taken.contains(r))
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("n ≥ k");
                taken.insert(far);
                vectors.row(far).to_vec()
            };
            shift = shift.max(sq_dist(centroids.row(c), &new).sqrt());
            centroids.row_mut(c).copy_from_slice(&new);
        }
        (labels, dists) = assign_rows(&centroids, vectors);
        history.push(dists.iter().sum::<f64>());
        if shift < config.tol {
            break;
        }
    }

    Ok(ClusterModel {
        centroids,
        inertia: *history.last().expect("at least one entry"),
        inertia_history: history,
        iterations,
    })
}

/// 1-based ID of the nearest centroid (lowest index on ties).
pub fn assign(model: &ClusterModel, vector: &[f64]) -> Result<u32> {
    if vector.len() != model.dim() {
        return Err(Error::shape("assign", model.dim(), vector.len()));
    }
    Ok(model.nearest(vector).0 as u32 + 1)
}

pub fn assign_all(model: &ClusterModel, vectors: &Tensor2) -> Result<Vec<u32>> {
    if vectors.cols() != model.dim() {
        return Err(Error::shape("assign_all", model.dim(), vectors.cols()));
    }
    Ok(assign_rows(&model.centroids, vectors)
        .0
        .into_iter()
        .map(|c| c as u32 + 1)
        .collect())
}

/// Maps every fake sample to `⟨user cluster, item cluster, decoded vote⟩`.
pub fn discretize_samples(
    fakes: &FakeDenseSet,
    user_model: &ClusterModel,
    item_model: &ClusterModel,
    codec: &RatingCodec,
) -> Result<Vec<RatingTriple>> {
    let e = fakes.embedding_size();
    if user_model.dim() != e || item_model.dim() != e {
        return Err(Error::shape(
            "discretize_samples",
            format!("cluster width {e}"),
            format!("{} / {}", user_model.dim(), item_model.dim()),
        ));
    }
    let users = assign_all(user_model, &fakes.user_vectors())?;
    let items = assign_all(item_model, &fakes.item_vectors())?;
    Ok(users
        .into_iter()
        .zip(items)
        .zip(fakes.rating_codes())
        .map(|((u, i), code)| RatingTriple::new(u, i, codec.to_vote(code)))
        .collect())
}

/// Keeps the first occurrence of each exact triple; returns the survivors and
/// how many were removed.
pub fn dedup(triples: &[RatingTriple]) -> (Vec<RatingTriple>, usize) {
    let mut seen = HashSet::with_capacity(triples.len());
    let kept: Vec<RatingTriple> = triples.iter().copied().filter(|t| seen.insert(*t)).collect();
    let removed = triples.len() - kept.len();
    (kept, removed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    /// Drop every `⟨user, item⟩` group that carries more than one vote.
    #[default]
    RemoveAll,
    Keep,
    /// Replace each conflicting group by one triple with the rounded mean vote.
    MergeRoundMean,
}

impl fmt::Display for ConflictPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictPolicy::RemoveAll => "remove_all",
            ConflictPolicy::Keep => "keep",
            ConflictPolicy::MergeRoundMean => "merge_round_mean",
        })
    }
}

impl FromStr for ConflictPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "remove_all" => Ok(ConflictPolicy::RemoveAll),
            "keep" => Ok(ConflictPolicy::Keep),
            "merge_round_mean" => Ok(ConflictPolicy::MergeRoundMean),
            other => Err(Error::Config(format!("unknown conflict policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictOutcome {
    pub triples: Vec<RatingTriple>,
    /// Number of distinct votes in a `⟨user, item⟩` group → number of groups.
    pub group_sizes: BTreeMap<usize, usize>,
    pub total_groups: usize,
    pub conflicting_groups: usize,
}

impl ConflictOutcome {
    /// Share of `⟨user, item⟩` groups that carry two or more distinct votes.
    pub fn conflict_proportion(&self) -> f64 {
        if self.total_groups == 0 {
            return 0.0;
        }
        self.conflicting_groups as f64 / self.total_groups as f64
    }
}

/// Applies `policy` to `⟨user, item⟩` groups with differing votes. The input
/// must already be free of exact duplicates.
pub fn resolve_conflicts(
    triples: &[RatingTriple],
    policy: ConflictPolicy,
    range: RatingRange,
) -> Result<ConflictOutcome> {
    let mut groups: HashMap<(u32, u32), Vec<usize>> = HashMap::with_capacity(triples.len());
    let mut seen = HashSet::with_capacity(triples.len());
    for (k, t) in triples.iter().enumerate() {
        if !seen.insert(*t) {
            return Err(Error::Validation(format!(
                "duplicate triple ⟨{}, {}, {}⟩ passed to conflict resolution; dedup first",
                t.user, t.item, t.rating
            )));
        }
        groups.entry((t.user, t.item)).or_default().push(k);
    }
    let mut group_sizes = BTreeMap::new();
    for g in groups.values() {
        *group_sizes.entry(g.len()).or_insert(0) += 1;
    }
    let conflicting_groups = groups.values().filter(|g| g.len() > 1).count();
    let total_groups = groups.len();

    let kept = match policy {
        ConflictPolicy::Keep => triples.to_vec(),
        ConflictPolicy::RemoveAll => triples
            .iter()
            .copied()
            .filter(|t| groups[&(t.user, t.item)].len() == 1)
            .collect(),
        ConflictPolicy::MergeRoundMean => {
            let mid = range.midpoint();
            triples
                .iter()
                .enumerate()
                .filter_map(|(k, t)| {
                    let g = &groups[&(t.user, t.item)];
                    if g[0] != k {
                        return None;
                    }
                    if g.len() == 1 {
                        return Some(*t);
                    }
                    let mean =
                        g.iter().map(|&j| triples[j].rating as f64).sum::<f64>() / g.len() as f64;
                    let v = round_away_from_midpoint(mean, mid)
                        .clamp(range.min as f64, range.max as f64) as i32;
                    Some(RatingTriple::new(t.user, t.item, v))
                })
                .collect()
        }
    };
    Ok(ConflictOutcome {
        triples: kept,
        group_sizes,
        total_groups,
        conflicting_groups,
    })
}

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub users: usize,
    pub items: usize,
    pub samples: usize,
    pub std: f64,
    #[serde(default)]
    pub conflict_policy: ConflictPolicy,
    pub seed: u64,
    /// Fit each k-means on at most this many randomly chosen vectors (all
    /// vectors are still assigned). `None` fits on everything.
    #[serde(default)]
    pub cluster_sample: Option<usize>,
    #[serde(default)]
    pub kmeans: KMeansConfig,
}

impl SynthesisSpec {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.items == 0 || self.samples == 0 {
            return Err(Error::Parameter(
                "users, items and samples must all be at least 1".into(),
            ));
        }
        if !(self.std > 0.0) || !self.std.is_finite() {
            return Err(Error::Parameter(format!("generation std must be positive, got {}", self.std)));
        }
        if self.cluster_sample == Some(0) {
            return Err(Error::Parameter("cluster sample must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sample counts at each stage of discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub generated: usize,
    pub deduplicated: usize,
    pub conflict_filtered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisProvenance {
    pub spec: SynthesisSpec,
    pub rng_algorithm: String,
    pub counts: StageCounts,
    pub duplicates_removed: usize,
    pub conflict_group_sizes: BTreeMap<usize, usize>,
    pub total_groups: usize,
    pub conflicting_groups: usize,
    pub user_cluster_fit_size: usize,
    pub item_cluster_fit_size: usize,
    pub user_inertia: f64,
    pub item_inertia: f64,
    pub user_kmeans_iterations: usize,
    pub item_kmeans_iterations: usize,
}

pub struct Synthesis {
    pub dataset: Dataset,
    pub fakes: FakeDenseSet,
    pub user_clusters: ClusterModel,
    pub item_clusters: ClusterModel,
    pub provenance: SynthesisProvenance,
}

fn fit_subset(vectors: &Tensor2, cap: Option<usize>, rng: &mut Rng) -> Tensor2 {
    match cap {
        Some(cap) if cap < vectors.rows() => {
            let mut idx: Vec<usize> = (0..vectors.rows()).collect();
            // partial Fisher-Yates
            for k in 0..cap {
                let j = k + rng.below(idx.len() - k);
                idx.swap(k, j);
            }
            let mut chosen = idx[..cap].to_vec();
            chosen.sort_unstable();
            vectors.select_rows(&chosen)
        }
        _ => vectors.clone(),
    }
}

/// Clusters and discretizes `fakes` according to `spec`.
pub fn discretize_fakes(fakes: FakeDenseSet, codec: RatingCodec, spec: &SynthesisSpec) -> Result<Synthesis> {
    spec.validate()?;
    let users = fakes.user_vectors();
    let items = fakes.item_vectors();

    let mut user_rng = Rng::stream(spec.seed, "user-clusters");
    let user_fit = fit_subset(&users, spec.cluster_sample, &mut user_rng);
    let user_clusters = kmeans_fit(&user_fit, spec.users, &mut user_rng, &spec.kmeans)?;
    log::info!(
        "user k-means: K={} on {} vectors, {} iterations",
        spec.users,
        user_fit.rows(),
        user_clusters.iterations()
    );

    let mut item_rng = Rng::stream(spec.seed, "item-clusters");
    let item_fit = fit_subset(&items, spec.cluster_sample, &mut item_rng);
    let item_clusters = kmeans_fit(&item_fit, spec.items, &mut item_rng, &spec.kmeans)?;
    log::info!(
        "item k-means: K={} on {} vectors, {} iterations",
        spec.items,
        item_fit.rows(),
        item_clusters.iterations()
    );

    let raw = discretize_samples(&fakes, &user_clusters, &item_clusters, &codec)?;
    let (unique, duplicates_removed) = dedup(&raw);
    let range = codec.range();
    let outcome = resolve_conflicts(&unique, spec.conflict_policy, range)?;
    let counts = StageCounts {
        generated: raw.len(),
        deduplicated: unique.len(),
        conflict_filtered: outcome.triples.len(),
    };
    let label = format!(
        "synthetic-u{}-i{}-n{}-std{}-seed{}",
        spec.users, spec.items, spec.samples, spec.std, spec.seed
    );
    let dataset = Dataset::new(outcome.triples, spec.users, spec.items, range, label)?;
    let provenance = SynthesisProvenance {
        spec: spec.clone(),
        rng_algorithm: crate::rng::ALGORITHM.to_string(),
        counts,
        duplicates_removed,
        conflict_group_sizes: outcome.group_sizes,
        total_groups: outcome.total_groups,
        conflicting_groups: outcome.conflicting_groups,
        user_cluster_fit_size: user_fit.rows(),
        item_cluster_fit_size: item_fit.rows(),
        user_inertia: user_clusters.inertia(),
        item_inertia: item_clusters.inertia(),
        user_kmeans_iterations: user_clusters.iterations(),
        item_kmeans_iterations: item_clusters.iterations(),
    };
    Ok(Synthesis {
        dataset,
        fakes,
        user_clusters,
        item_clusters,
        provenance,
    })
}

/// Generates `spec.samples` fake dense samples and discretizes them into a
/// dataset with at most `spec.users` users and `spec.items` items.
pub fn synthesize(generator: &GeneratorModel, codec: RatingCodec, spec: &SynthesisSpec) -> Result<Synthesis> {
    spec.validate()?;
    let mut gen_rng = Rng::stream(spec.seed, "generate");
    let fakes = generate(generator, spec.samples, spec.std, &mut gen_rng)?;
    discretize_fakes(fakes, codec, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(u: u32, i: u32, r: i32) -> RatingTriple {
        RatingTriple::new(u, i, r)
    }

    fn r15() -> RatingRange {
        RatingRange::new(1, 5).unwrap()
    }

    fn pts(rows: &[[f64; 2]]) -> Tensor2 {
        Tensor2::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn square_corners_each_get_a_centroid() {
        let x = pts(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
        let m = kmeans_fit(&x, 4, &mut Rng::new(0), &KMeansConfig::default()).unwrap();
        assert_eq!(m.inertia(), 0.0);
        let mut ids: Vec<u32> = (0..4).map(|r| assign(&m, x.row(r)).unwrap()).collect();
        ids.sort_unstable();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = pts(&[[0.0, 0.0], [2.0, 4.0], [4.0, -1.0]]);
        let m = kmeans_fit(&x, 1, &mut Rng::new(5), &KMeansConfig::default()).unwrap();
        assert!((m.centroids().get(0, 0) - 2.0).abs() < 1e-12);
        assert!((m.centroids().get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_clusters_or_empty_input_rejected() {
        let x = pts(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(matches!(
            kmeans_fit(&x, 3, &mut Rng::new(0), &KMeansConfig::default()),
            Err(Error::Parameter(_))
        ));
        assert!(kmeans_fit(&Tensor2::zeros(0, 2), 1, &mut Rng::new(0), &KMeansConfig::default()).is_err());
    }

    #[test]
    fn assign_rules() {
        let m = ClusterModel::from_centroids(pts(&[[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]])).unwrap();
        assert_eq!(assign(&m, &[5.0, 5.0]).unwrap(), 3);
        assert_eq!(assign(&m, &[1.0, 0.0]).unwrap(), 1);
        assert_eq!(assign(&m, &[1.0, 0.0]).unwrap(), 1);
        assert!(assign(&m, &[1.0]).is_err());
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let (out, removed) = dedup(&[t(1, 1, 5), t(2, 1, 3), t(1, 1, 5)]);
        assert_eq!(out, vec![t(1, 1, 5), t(2, 1, 3)]);
        assert_eq!(removed, 1);
        let distinct = [t(1, 1, 1), t(1, 2, 1)];
        assert_eq!(dedup(&distinct).0, distinct.to_vec());
    }

    #[test]
    fn conflicting_pair_example() {
        let input = [t(879, 56, 4), t(879, 56, 5)];
        let removed = resolve_conflicts(&input, ConflictPolicy::RemoveAll, r15()).unwrap();
        assert!(removed.triples.is_empty());
        assert_eq!(removed.conflicting_groups, 1);
        let merged = resolve_conflicts(&input, ConflictPolicy::MergeRoundMean, r15()).unwrap();
        assert_eq!(merged.triples, vec![t(879, 56, 5)]);
        let kept = resolve_conflicts(&input, ConflictPolicy::Keep, r15()).unwrap();
        assert_eq!(kept.triples, input.to_vec());
    }

    #[test]
    fn merge_rounds_low_halves_down() {
        let input = [t(1, 1, 1), t(1, 1, 2), t(2, 2, 3)];
        let merged = resolve_conflicts(&input, ConflictPolicy::MergeRoundMean, r15()).unwrap();
        assert_eq!(merged.triples, vec![t(1, 1, 1), t(2, 2, 3)]);
        assert_eq!(merged.group_sizes, BTreeMap::from([(1, 1), (2, 1)]));
    }

    #[test]
    fn no_conflicts_is_identity_under_all_policies() {
        let input = [t(1, 1, 4), t(1, 2, 5), t(2, 1, 1)];
        for p in [ConflictPolicy::RemoveAll, ConflictPolicy::Keep, ConflictPolicy::MergeRoundMean] {
            assert_eq!(resolve_conflicts(&input, p, r15()).unwrap().triples, input.to_vec());
        }
    }

    #[test]
    fn duplicates_violate_precondition() {
        let input = [t(1, 1, 4), t(1, 1, 4)];
        assert!(matches!(
            resolve_conflicts(&input, ConflictPolicy::Keep, r15()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn policy_names_parse() {
        assert_eq!("remove-all".parse::<ConflictPolicy>().unwrap(), ConflictPolicy::RemoveAll);
        assert_eq!("merge_round_mean".parse::<ConflictPolicy>().unwrap().to_string(), "merge_round_mean");
        assert!("average".parse::<ConflictPolicy>().is_err());
    }

    #[test]
    fn cluster_checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = pts(&[[0.0, 0.1], [3.0, 3.3], [0.2, 0.0], [2.9, 3.1]]);
        let m = kmeans_fit(&x, 2, &mut Rng::new(1), &KMeansConfig::default()).unwrap();
        let p = dir.path().join("c.bin");
        m.save(&p).unwrap();
        assert_eq!(ClusterModel::load(&p).unwrap(), m);
    }
}
