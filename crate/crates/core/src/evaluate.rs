//! Quality measurements for a ratings dataset: sample-level MAE and accuracy,
//! per-user precision/recall/F1 at N, repetition tables from a synthesis run,
//! and source-vs-synthetic distribution comparison.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{stats, write_lines, Dataset, DistributionReport, RatingTriple};
use crate::deepmf::{round_away_from_midpoint, train_deepmf, DeepMfConfig, DeepMfModel};
use crate::discretize::{StageCounts, SynthesisProvenance};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Protocol choices written at the top of every report.
pub const PROTOCOL: &[&str] = &[
    "eval model: DeepMF trained on the train split only, at least 6000 Adam steps",
    "predictions clamped to the rating range",
    "accuracy: rounded clamped prediction equals the vote (halves away from the midpoint)",
    "precision/recall: per-user macro average, ties ranked by ascending item id",
    "precision denominator: min(N, user's test items)",
    "recall: users without a relevant test item are skipped",
    "F1: harmonic mean of the averaged precision and recall",
];

/// Optimizer steps the evaluation model takes at least, about what 20 epochs
/// on MovieLens 100K amount to. Small synthetic datasets would otherwise stop
/// far short of convergence.
pub const EVAL_MIN_UPDATES: usize = 6000;

/// Anything that scores a `⟨user, item⟩` pair on the raw vote scale.
pub trait Predictor {
    fn predict(&self, user: u32, item: u32) -> Result<f64>;
}

impl Predictor for DeepMfModel {
    fn predict(&self, user: u32, item: u32) -> Result<f64> {
        DeepMfModel::predict(self, user, item)
    }
}

impl<F: Fn(u32, u32) -> f64> Predictor for F {
    fn predict(&self, user: u32, item: u32) -> Result<f64> {
        Ok(self(user, item))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_list: Vec<usize>,
    /// Relevancy thresholds; empty means the two highest votes of the range.
    pub thresholds: Vec<i32>,
    pub test_fraction: f64,
    pub seed: u64,
    pub deepmf: DeepMfConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_list: vec![2, 4, 6, 8, 10],
            thresholds: vec![4, 5],
            test_fraction: 0.2,
            seed: 0,
            deepmf: DeepMfConfig {
                min_updates: EVAL_MIN_UPDATES,
                ..DeepMfConfig::default()
            },
        }
    }
}

impl EvalConfig {
    /// Thresholds to use on `dataset`, checked against its range.
    pub fn thresholds_for(&self, dataset: &Dataset) -> Result<Vec<i32>> {
        let range = dataset.range();
        let list = if self.thresholds.is_empty() {
            vec![range.max - 1, range.max]
        } else {
            self.thresholds.clone()
        };
        if let Some(bad) = list.iter().find(|t| !range.contains(**t)) {
            return Err(Error::Parameter(format!(
                "relevancy threshold {bad} outside rating range {range}"
            )));
        }
        Ok(list)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::Parameter("every N must be at least 1".into()));
        }
        self.deepmf.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    pub train: Dataset,
    pub test: Dataset,
}

/// Splits `dataset` and trains a fresh DeepMF on the train part.
pub fn eval_model_fit(dataset: &Dataset, config: &EvalConfig) -> Result<(DeepMfModel, EvalSplit)> {
    config.validate()?;
    let mut split_rng = Rng::stream(config.seed, "eval-split");
    let (train, test) = crate::dataset::split(dataset, config.test_fraction, &mut split_rng)?;
    if test.is_empty() {
        return Err(Error::Evaluation(format!(
            "dataset '{}' has no user with two or more ratings to hold out",
            dataset.label()
        )));
    }
    let mut train_rng = Rng::stream(config.seed, "eval-model");
    let (model, _) = train_deepmf(&train, &config.deepmf, &mut train_rng)?;
    Ok((model, EvalSplit { train, test }))
}

fn clamped(p: &impl Predictor, t: &RatingTriple, lo: f64, hi: f64) -> Result<f64> {
    Ok(p.predict(t.user, t.item)?.clamp(lo, hi))
}

/// Sample-level `(MAE, accuracy)` over `test`.
pub fn mae_accuracy(model: &impl Predictor, test: &Dataset) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::Evaluation("empty test set".into()));
    }
    let range = test.range();
    let (lo, hi, mid) = (range.min as f64, range.max as f64, range.midpoint());
    let mut abs = 0.0;
    let mut hits = 0usize;
    for t in test.triples() {
        let y = clamped(model, t, lo, hi)?;
        abs += (t.rating as f64 - y).abs();
        if round_away_from_midpoint(y, mid) as i32 == t.rating {
            hits += 1;
        }
    }
    let n = test.len() as f64;
    Ok((abs / n, hits as f64 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfRow {
    pub n: usize,
    pub threshold: i32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_users: usize,
    pub recall_users: usize,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Top-N precision, recall and F1 for every `(N, θ)` in `config`.
pub fn precision_recall_f1(model: &impl Predictor, split: &EvalSplit, config: &EvalConfig) -> Result<Vec<PrfRow>> {
    config.validate()?;
    let thresholds = config.thresholds_for(&split.test)?;
    let range = split.test.range();
    let (lo, hi) = (range.min as f64, range.max as f64);

    // per user: (item, vote) ranked by prediction desc, item asc
    let mut by_user: BTreeMap<u32, Vec<(u32, i32, f64)>> = BTreeMap::new();
    for t in split.test.triples() {
        let y = clamped(model, t, lo, hi)?;
        by_user.entry(t.user).or_default().push((t.item, t.rating, y));
    }
    for list in by_user.values_mut() {
        list.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    }

    let mut rows = Vec::new();
    for &theta in &thresholds {
        for &n in &config.n_list {
            let (mut p_sum, mut r_sum, mut r_users) = (0.0, 0.0, 0usize);
            for list in by_user.values() {
                let top = n.min(list.len());
                let hits = list[..top].iter().filter(|e| e.1 >= theta).count();
                p_sum += hits as f64 / top as f64;
                let relevant = list.iter().filter(|e| e.1 >= theta).count();
                if relevant > 0 {
                    r_sum += hits as f64 / relevant as f64;
                    r_users += 1;
                }
            }
            let users = by_user.len();
            let precision = if users == 0 { 0.0 } else { p_sum / users as f64 };
            let recall = if r_users == 0 { 0.0 } else { r_sum / r_users as f64 };
            rows.push(PrfRow {
                n,
                threshold: theta,
                precision,
                recall,
                f1: f1(precision, recall),
                precision_users: users,
                recall_users: r_users,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub label: String,
    pub mae: f64,
    pub accuracy: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub evaluated_users: usize,
    pub rows: Vec<PrfRow>,
}

impl QualityReport {
    pub fn row(&self, n: usize, threshold: i32) -> Option<&PrfRow> {
        self.rows.iter().find(|r| r.n == n && r.threshold == threshold)
    }

    /// Writes `model_fit.csv`, `precision_recall.csv` and `quality.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        ensure_dir(dir)?;
        let mut fit = protocol_header(&self.label);
        fit.push("label,mae,accuracy,train_samples,test_samples".into());
        fit.push(format!(
            "{},{},{},{},{}",
            self.label, self.mae, self.accuracy, self.train_samples, self.test_samples
        ));
        write_lines(dir.join("model_fit.csv"), &fit)?;

        let mut prf = protocol_header(&self.label);
        prf.push("n,threshold,precision,recall,f1,precision_users,recall_users".into());
        for r in &self.rows {
            prf.push(format!(
                "{},{},{},{},{},{},{}",
                r.n, r.threshold, r.precision, r.recall, r.f1, r.precision_users, r.recall_users
            ));
        }
        write_lines(dir.join("precision_recall.csv"), &prf)?;
        write_json(dir.join("quality.json"), &Annotated::new(self))
    }
}

/// Full battery on one dataset: fit, MAE/accuracy, precision/recall/F1.
pub fn evaluate_dataset(dataset: &Dataset, config: &EvalConfig) -> Result<QualityReport> {
    let (model, split) = eval_model_fit(dataset, config)?;
    let (mae, accuracy) = mae_accuracy(&model, &split.test)?;
    let rows = precision_recall_f1(&model, &split, config)?;
    let evaluated_users = rows.first().map_or(0, |r| r.precision_users);
    Ok(QualityReport {
        label: dataset.label().to_string(),
        mae,
        accuracy,
        train_samples: split.train.len(),
        test_samples: split.test.len(),
        evaluated_users,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub counts: StageCounts,
    /// Group size → share of `⟨user, item⟩` groups of that size.
    pub group_proportions: BTreeMap<usize, f64>,
    pub conflict_proportion: f64,
}

pub fn repetition_report(counts: StageCounts, group_sizes: &BTreeMap<usize, usize>) -> RepetitionReport {
    let total: usize = group_sizes.values().sum();
    let share = |c: usize| if total == 0 { 0.0 } else { c as f64 / total as f64 };
    let conflicting: usize = group_sizes.iter().filter(|(k, _)| **k > 1).map(|(_, c)| c).sum();
    RepetitionReport {
        counts,
        group_proportions: group_sizes.iter().map(|(k, c)| (*k, share(*c))).collect(),
        conflict_proportion: share(conflicting),
    }
}

impl RepetitionReport {
    pub fn from_provenance(p: &SynthesisProvenance) -> Self {
        repetition_report(p.counts, &p.conflict_group_sizes)
    }

    /// Reads a provenance sidecar written by the pipeline.
    pub fn from_provenance_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Report(format!("cannot read provenance {}: {e}", path.display())))?;
        let p: SynthesisProvenance = serde_json::from_str(&text)
            .map_err(|e| Error::Report(format!("malformed provenance {}: {e}", path.display())))?;
        Ok(Self::from_provenance(&p))
    }

    /// Writes `retained_samples.csv` and `conflict_groups.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        ensure_dir(dir)?;
        let c = self.counts;
        write_lines(
            dir.join("retained_samples.csv"),
            &[
                "stage,samples".into(),
                format!("generated,{}", c.generated),
                format!("deduplicated,{}", c.deduplicated),
                format!("conflict_filtered,{}", c.conflict_filtered),
            ],
        )?;
        let mut lines = vec!["group_size,proportion".to_string()];
        lines.extend(self.group_proportions.iter().map(|(k, p)| format!("{k},{p}")));
        write_lines(dir.join("conflict_groups.csv"), &lines)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub source_label: String,
    pub synthetic_label: String,
    pub source_proportions: BTreeMap<i32, f64>,
    pub synthetic_proportions: BTreeMap<i32, f64>,
    /// Sum of absolute differences of the vote proportions, in `[0, 2]`.
    pub rating_l1: f64,
    /// Lower edges of the log2 activity bins (`[2^k, 2^(k+1))`).
    pub activity_bins: Vec<usize>,
    pub source_activity: Vec<f64>,
    pub synthetic_activity: Vec<f64>,
    pub activity_l1: f64,
}

fn log2_bin(count: usize) -> usize {
    (usize::BITS - 1 - count.leading_zeros()) as usize
}

fn activity_density(report: &DistributionReport, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let total: usize = report.user_activity.values().sum();
    for (&count, &users) in &report.user_activity {
        if count > 0 {
            h[log2_bin(count)] += users as f64;
        }
    }
    if total > 0 {
        h.iter_mut().for_each(|x| *x /= total as f64);
    }
    h
}

fn l1<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().chain(b.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .sum()
}

pub fn compare_distributions(source: &Dataset, synthetic: &Dataset) -> Result<ComparisonReport> {
    if source.range() != synthetic.range() {
        return Err(Error::Validation(format!(
            "rating ranges differ: {} vs {}",
            source.range(),
            synthetic.range()
        )));
    }
    let (s, y) = (stats(source), stats(synthetic));
    let (sp, yp) = (s.rating_proportions(), y.rating_proportions());
    let max_count = s
        .user_activity
        .keys()
        .chain(y.user_activity.keys())
        .copied()
        .max()
        .unwrap_or(1)
        .max(1);
    let bins = log2_bin(max_count) + 1;
    let (sa, ya) = (activity_density(&s, bins), activity_density(&y, bins));
    let activity_l1 = sa.iter().zip(&ya).map(|(a, b)| (a - b).abs()).sum();
    Ok(ComparisonReport {
        source_label: source.label().to_string(),
        synthetic_label: synthetic.label().to_string(),
        rating_l1: l1(&sp, &yp),
        source_proportions: sp,
        synthetic_proportions: yp,
        activity_bins: (0..bins).map(|k| 1usize << k).collect(),
        source_activity: sa,
        synthetic_activity: ya,
        activity_l1,
    })
}

impl ComparisonReport {
    /// Writes `rating_distribution_comparison.csv`, `activity_comparison.csv`
    /// and `comparison.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        ensure_dir(dir)?;
        let mut lines = vec!["vote,source,synthetic".to_string()];
        for (v, p) in &self.source_proportions {
            let q = self.synthetic_proportions.get(v).unwrap_or(&0.0);
            lines.push(format!("{v},{p},{q}"));
        }
        write_lines(dir.join("rating_distribution_comparison.csv"), &lines)?;
        let mut lines = vec!["ratings_from,source_users,synthetic_users".to_string()];
        for (k, lo) in self.activity_bins.iter().enumerate() {
            lines.push(format!("{lo},{},{}", self.source_activity[k], self.synthetic_activity[k]));
        }
        write_lines(dir.join("activity_comparison.csv"), &lines)?;
        write_json(dir.join("comparison.json"), &Annotated::new(self))
    }
}

/// Standard deviation whose comparison has the smallest rating L1 (first on
/// ties).
pub fn select_std(sweep: &[(f64, ComparisonReport)]) -> Option<f64> {
    sweep
        .iter()
        .min_by(|a, b| a.1.rating_l1.total_cmp(&b.1.rating_l1))
        .map(|(s, _)| *s)
}

fn protocol_header(label: &str) -> Vec<String> {
    let mut h = vec![format!("# dataset: {label}")];
    h.extend(PROTOCOL.iter().map(|p| format!("# {p}")));
    h
}

#[derive(Serialize)]
struct Annotated<'a, T: Serialize> {
    protocol: &'static [&'static str],
    report: &'a T,
}

impl<'a, T: Serialize> Annotated<'a, T> {
    fn new(report: &'a T) -> Self {
        Self {
            protocol: PROTOCOL,
            report,
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Report(format!("cannot serialize {}: {e}", path.display())))?;
    body.push('\n');
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}
