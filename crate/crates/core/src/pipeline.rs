//! Stage orchestration over a fixed artifact layout:
//!
//! ```text
//! out/
//!   checkpoints/  deepmf.bin gan.bin user_clusters.bin item_clusters.bin
//!   dense/        source_dense.bin fake_dense.bin
//!   synthetic/    synthetic.csv
//!   reports/      histories, source/ synthetic/ repetition/ comparison/
//!   provenance/   run.json synthesis.json
//! ```
//!
//! A sweep over generation stds shares `checkpoints/` and `dense/source_dense.bin`
//! and writes one `std-<value>/` tree per std with the remaining directories.

use std::fs::{File, OpenOptions};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_dataset, reindex, stats, write_dataset, write_lines, Dataset, FormatSpec};
use crate::deepmf::{
    dense_matrix, densify, extract_embeddings, train_deepmf, DeepMfConfig, DeepMfModel, DenseFile,
};
use crate::discretize::{discretize_fakes, ClusterModel, ConflictPolicy, KMeansConfig, Synthesis, SynthesisSpec};
use crate::error::{Error, Result};
use crate::evaluate::{compare_distributions, evaluate_dataset, write_json, ComparisonReport, EvalConfig, QualityReport, RepetitionReport};
use crate::gan::{generate, train_gan, FakeDenseSet, GanCheckpoint, GanTrainConfig};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub path: PathBuf,
    /// `canonical`, `movielens`, `csv` or `tsv`, optionally `:min..max`.
    pub format: String,
    /// Renumber users and items by first appearance before training.
    pub reindex: bool,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data/ml-100k/u.data"),
            format: "movielens".into(),
            reindex: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub users: usize,
    pub items: usize,
    pub samples: usize,
    pub std: f64,
    pub conflict_policy: ConflictPolicy,
    pub cluster_sample: Option<usize>,
    pub kmeans: KMeansConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            users: 500,
            items: 800,
            samples: 200_000,
            std: 2.5,
            conflict_policy: ConflictPolicy::RemoveAll,
            cluster_sample: None,
            kmeans: KMeansConfig::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn spec(&self, seed: u64) -> SynthesisSpec {
        SynthesisSpec {
            users: self.users,
            items: self.items,
            samples: self.samples,
            std: self.std,
            conflict_policy: self.conflict_policy,
            seed,
            cluster_sample: self.cluster_sample,
            kmeans: self.kmeans,
        }
    }
}

/// Everything one run needs. Loaded from TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Reuse existing stage 1–4 artifacts instead of recomputing them.
    pub resume: bool,
    /// When non-empty, synthesize and evaluate once per std.
    pub sweep_std: Vec<f64>,
    pub source: SourceConfig,
    pub deepmf: DeepMfConfig,
    pub gan: GanTrainConfig,
    pub synthesis: SynthesisConfig,
    pub evaluate: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            resume: false,
            sweep_std: Vec::new(),
            source: SourceConfig::default(),
            deepmf: DeepMfConfig::default(),
            gan: GanTrainConfig::default(),
            synthesis: SynthesisConfig::default(),
            evaluate: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("config file {} not found", path.display())),
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn format(&self) -> Result<FormatSpec> {
        self.source.format.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.format()?;
        self.deepmf.validate()?;
        self.gan.validate()?;
        self.evaluate.validate()?;
        self.synthesis.spec(self.seed).validate()?;
        for &s in &self.sweep_std {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Parameter(format!("sweep std must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.out)
    }
}

/// Fixed artifact paths under an output root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn dense(&self) -> PathBuf {
        self.root.join("dense")
    }
    pub fn synthetic(&self) -> PathBuf {
        self.root.join("synthetic")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn provenance(&self) -> PathBuf {
        self.root.join("provenance")
    }
    pub fn deepmf_checkpoint(&self) -> PathBuf {
        self.checkpoints().join("deepmf.bin")
    }
    pub fn gan_checkpoint(&self) -> PathBuf {
        self.checkpoints().join("gan.bin")
    }
    pub fn source_dense(&self) -> PathBuf {
        self.dense().join("source_dense.bin")
    }
    pub fn fake_dense(&self) -> PathBuf {
        self.dense().join("fake_dense.bin")
    }
    pub fn synthetic_dataset(&self) -> PathBuf {
        self.synthetic().join("synthetic.csv")
    }
    pub fn synthesis_provenance(&self) -> PathBuf {
        self.provenance().join("synthesis.json")
    }
    pub fn run_provenance(&self) -> PathBuf {
        self.provenance().join("run.json")
    }
    /// Sub-tree for one std of a sweep.
    pub fn for_std(&self, std: f64) -> Layout {
        Layout::new(self.root.join(format!("std-{std}")))
    }
    fn lock(&self) -> PathBuf {
        self.root.join(".synthrec.lock")
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
    _file: File,
}

impl RunLock {
    pub fn acquire(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let path = Layout::new(root).lock();
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(file) => Ok(Self { path, _file: file }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Loads the configured source dataset.
pub fn load_source(config: &PipelineConfig) -> Result<Dataset> {
    let data = load_dataset(&config.source.path, &config.format()?)?;
    Ok(if config.source.reindex { reindex(&data).0 } else { data })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingOutcome {
    pub source_sha256: String,
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub final_mse: f64,
}

/// Stages 1–3: DeepMF on the source, then dense samples.
pub fn cmd_train_embeddings(config: &PipelineConfig) -> Result<EmbeddingOutcome> {
    config.validate()?;
    let layout = config.layout();
    let source = load_source(config)?;
    log::info!(
        "source: {} ratings, {} users, {} items",
        source.len(),
        source.num_users(),
        source.num_items()
    );
    let mut rng = Rng::stream(config.seed, "deepmf");
    let (model, history) = train_deepmf(&source, &config.deepmf, &mut rng)?;
    let final_mse = *history.epoch_mse.last().unwrap_or(&f64::NAN);
    log::info!("deepmf: final epoch mse {final_mse:.4}");
    write_embedding_artifacts(&layout, &source, &model, &history.epoch_mse)?;
    Ok(EmbeddingOutcome {
        source_sha256: sha256_file(&config.source.path)?,
        users: source.num_users(),
        items: source.num_items(),
        ratings: source.len(),
        final_mse,
    })
}

fn write_embedding_artifacts(layout: &Layout, source: &Dataset, model: &DeepMfModel, mse: &[f64]) -> Result<()> {
    mkdir(&layout.checkpoints())?;
    mkdir(&layout.dense())?;
    mkdir(&layout.reports())?;
    model.save(layout.deepmf_checkpoint())?;
    let (u, i) = extract_embeddings(model);
    let dense = densify(source, &u, &i, &model.codec())?;
    DenseFile {
        codec: model.codec(),
        embedding_size: model.embedding_size(),
        samples: dense_matrix(&dense)?,
    }
    .save(layout.source_dense())?;
    let mut lines = vec!["epoch,mse".to_string()];
    lines.extend(mse.iter().enumerate().map(|(e, m)| format!("{},{m}", e + 1)));
    write_lines(layout.reports().join("deepmf_history.csv"), &lines)?;
    stats(source).write_tables(layout.reports().join("source"))
}

/// Stage 4: GAN on the dense samples.
pub fn cmd_train_gan(config: &PipelineConfig) -> Result<GanCheckpoint> {
    config.validate()?;
    let layout = config.layout();
    let dense = DenseFile::load(layout.source_dense())?;
    let mut rng = Rng::stream(config.seed, "gan");
    let (generator, discriminator, history) = train_gan(&dense.samples, &config.gan, &mut rng)?;
    if let Some(last) = history.epochs.last() {
        log::info!(
            "gan: epoch {} d_loss {:.4} g_loss {:.4} fake score {:.3}",
            last.epoch,
            last.discriminator_loss,
            last.generator_loss,
            last.mean_fake_score
        );
    }
    let ckpt = GanCheckpoint {
        generator,
        discriminator,
    };
    mkdir(&layout.checkpoints())?;
    mkdir(&layout.reports())?;
    ckpt.save(layout.gan_checkpoint())?;
    write_lines(layout.reports().join("gan_history.csv"), &history.to_csv_lines())?;
    Ok(ckpt)
}

/// Stages 5–7 with the configured synthesis parameters, written under `target`.
fn synthesize_into(config: &PipelineConfig, synthesis: &SynthesisConfig, target: &Layout) -> Result<Synthesis> {
    let layout = config.layout();
    let dense = DenseFile::load(layout.source_dense())?;
    let ckpt = GanCheckpoint::load(layout.gan_checkpoint())?;
    let spec = synthesis.spec(config.seed);
    spec.validate()?;
    let mut gen_rng = Rng::stream(spec.seed, "generate");
    let fakes = generate(&ckpt.generator, spec.samples, spec.std, &mut gen_rng)?;
    mkdir(&target.dense())?;
    DenseFile {
        codec: dense.codec,
        embedding_size: dense.embedding_size,
        samples: fakes.samples.clone(),
    }
    .save(target.fake_dense())?;
    let result = discretize_fakes(fakes, dense.codec, &spec)?;
    let c = result.provenance.counts;
    log::info!(
        "synthesis: {} generated, {} after dedup, {} after conflict policy {}",
        c.generated,
        c.deduplicated,
        c.conflict_filtered,
        spec.conflict_policy
    );
    mkdir(&target.synthetic())?;
    mkdir(&target.checkpoints())?;
    mkdir(&target.provenance())?;
    write_dataset(&result.dataset, target.synthetic_dataset(), &FormatSpec::canonical())?;
    result.user_clusters.save(target.checkpoints().join("user_clusters.bin"))?;
    result.item_clusters.save(target.checkpoints().join("item_clusters.bin"))?;
    write_json(target.synthesis_provenance(), &result.provenance)?;
    Ok(result)
}

/// Stages 5–7: generate, cluster, discretize, dedup and resolve conflicts.
pub fn cmd_synthesize(config: &PipelineConfig) -> Result<Synthesis> {
    config.validate()?;
    synthesize_into(config, &config.synthesis, &config.layout())
}

/// Reports written by [`cmd_evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutcome {
    pub quality: QualityReport,
    pub repetition: Option<RepetitionReport>,
    pub comparison: Option<ComparisonReport>,
}

/// Quality, distribution and (when available) repetition and comparison
/// reports for `dataset_path`, written under `reports_dir`.
pub fn cmd_evaluate(
    config: &PipelineConfig,
    dataset_path: &Path,
    source_path: Option<&Path>,
    provenance_path: Option<&Path>,
    reports_dir: &Path,
) -> Result<EvaluationOutcome> {
    config.validate()?;
    let dataset = load_dataset(dataset_path, &FormatSpec::canonical())?;
    let eval = EvalConfig {
        seed: config.seed,
        ..config.evaluate.clone()
    };
    let quality = evaluate_dataset(&dataset, &eval)?;
    log::info!(
        "evaluate {}: mae {:.4} accuracy {:.4}",
        dataset.label(),
        quality.mae,
        quality.accuracy
    );
    let synthetic_dir = reports_dir.join("synthetic");
    quality.write(&synthetic_dir)?;
    stats(&dataset).write_tables(&synthetic_dir)?;

    let repetition = match provenance_path {
        Some(p) => {
            let r = RepetitionReport::from_provenance_file(p)?;
            r.write(reports_dir.join("repetition"))?;
            Some(r)
        }
        None => None,
    };
    let comparison = match source_path {
        Some(p) => {
            let source = load_dataset(p, &config.format()?)?;
            let c = compare_distributions(&source, &dataset)?;
            c.write(reports_dir.join("comparison"))?;
            Some(c)
        }
        None => None,
    };
    Ok(EvaluationOutcome {
        quality,
        repetition,
        comparison,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdOutcome {
    pub std: f64,
    pub retained: usize,
    pub mae: f64,
    pub accuracy: f64,
    pub rating_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub embeddings: Option<EmbeddingOutcome>,
    pub runs: Vec<StdOutcome>,
    /// Std of the sweep whose vote distribution is closest to the source.
    pub selected_std: Option<f64>,
}

#[derive(Serialize)]
struct RunProvenance<'a> {
    tool: &'static str,
    version: &'static str,
    rng_algorithm: &'static str,
    config: &'a PipelineConfig,
    source_sha256: String,
    embeddings_reused: bool,
    gan_reused: bool,
    runs: &'a [StdOutcome],
    selected_std: Option<f64>,
}

/// All stages in order, then evaluation. With `resume`, existing stage 1–4
/// artifacts are loaded instead of recomputed.
pub fn cmd_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let layout = config.layout();
    let _lock = RunLock::acquire(&layout.root)?;

    let embeddings_reused =
        config.resume && layout.deepmf_checkpoint().is_file() && layout.source_dense().is_file();
    let embeddings = if embeddings_reused {
        DeepMfModel::load(layout.deepmf_checkpoint())?;
        DenseFile::load(layout.source_dense())?;
        log::info!("resume: reusing embeddings and dense samples");
        None
    } else {
        Some(cmd_train_embeddings(config)?)
    };

    let gan_reused = config.resume && embeddings_reused && layout.gan_checkpoint().is_file();
    if gan_reused {
        GanCheckpoint::load(layout.gan_checkpoint())?;
        log::info!("resume: reusing GAN checkpoint");
    } else {
        cmd_train_gan(config)?;
    }

    let stds: Vec<Option<f64>> = if config.sweep_std.is_empty() {
        vec![None]
    } else {
        config.sweep_std.iter().copied().map(Some).collect()
    };
    let mut runs = Vec::new();
    let mut comparisons = Vec::new();
    for std in stds {
        let (target, synthesis) = match std {
            None => (layout.clone(), config.synthesis.clone()),
            Some(s) => (
                layout.for_std(s),
                SynthesisConfig {
                    std: s,
                    ..config.synthesis.clone()
                },
            ),
        };
        let result = synthesize_into(config, &synthesis, &target)?;
        let eval = cmd_evaluate(
            config,
            &target.synthetic_dataset(),
            Some(&config.source.path),
            Some(&target.synthesis_provenance()),
            &target.reports(),
        )?;
        let comparison = eval.comparison.expect("source was given");
        runs.push(StdOutcome {
            std: synthesis.std,
            retained: result.dataset.len(),
            mae: eval.quality.mae,
            accuracy: eval.quality.accuracy,
            rating_l1: comparison.rating_l1,
        });
        comparisons.push((synthesis.std, comparison));
    }
    let selected_std = if config.sweep_std.is_empty() {
        None
    } else {
        crate::evaluate::select_std(&comparisons)
    };

    mkdir(&layout.reports())?;
    let mut lines = vec!["std,retained,mae,accuracy,rating_l1".to_string()];
    lines.extend(
        runs.iter()
            .map(|r| format!("{},{},{},{},{}", r.std, r.retained, r.mae, r.accuracy, r.rating_l1)),
    );
    if let Some(s) = selected_std {
        lines.push(format!("# selected std: {s}"));
    }
    write_lines(layout.reports().join("summary.csv"), &lines)?;

    mkdir(&layout.provenance())?;
    write_json(
        layout.run_provenance(),
        &RunProvenance {
            tool: "synthrec",
            version: env!("CARGO_PKG_VERSION"),
            rng_algorithm: crate::rng::ALGORITHM,
            config,
            source_sha256: sha256_file(&config.source.path)?,
            embeddings_reused,
            gan_reused,
            runs: &runs,
            selected_std,
        },
    )?;
    Ok(PipelineOutcome {
        embeddings,
        runs,
        selected_std,
    })
}

/// Loads a fake dense set written by a synthesis stage.
pub fn load_fakes(path: impl AsRef<Path>, std: f64, seed: u64) -> Result<(FakeDenseSet, DenseFile)> {
    let file = DenseFile::load(path)?;
    Ok((
        FakeDenseSet {
            samples: file.samples.clone(),
            std,
            seed,
        },
        file,
    ))
}

/// Loads both cluster checkpoints of a synthesis tree.
pub fn load_clusters(layout: &Layout) -> Result<(ClusterModel, ClusterModel)> {
    Ok((
        ClusterModel::load(layout.checkpoints().join("user_clusters.bin"))?,
        ClusterModel::load(layout.checkpoints().join("item_clusters.bin"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_takes_defaults() {
        let cfg = PipelineConfig::from_toml("seed = 7\n[synthesis]\nusers = 100\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.synthesis.users, 100);
        assert_eq!(cfg.synthesis.items, 800);
        assert_eq!(cfg.gan.epochs, 20);
        assert_eq!(cfg.evaluate.n_list, vec![2, 4, 6, 8, 10]);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = PipelineConfig {
            sweep_std: vec![2.0, 2.5, 3.0],
            ..Default::default()
        };
        cfg.synthesis.cluster_sample = Some(1000);
        cfg.synthesis.conflict_policy = ConflictPolicy::MergeRoundMean;
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn bad_config_is_config_error() {
        assert!(matches!(PipelineConfig::from_toml("seed = \"x\""), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::from_toml("[synthesis]\nconflict_policy = \"avg\""), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::load("/nonexistent.toml"), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.synthesis.std = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Parameter(_))));
        let cfg = PipelineConfig {
            sweep_std: vec![-1.0],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(matches!(RunLock::acquire(dir.path()), Err(Error::Locked(_))));
        drop(lock);
        RunLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn sweep_layout() {
        let l = Layout::new("out");
        assert_eq!(l.for_std(2.5).synthetic_dataset(), PathBuf::from("out/std-2.5/synthetic/synthetic.csv"));
        assert_eq!(l.gan_checkpoint(), PathBuf::from("out/checkpoints/gan.bin"));
    }
}
