//! Generator/discriminator pair for dense samples, its adversarial training
//! loop and noise-driven generation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{get_sequential, put_sequential, read_container, write_container, ByteWriter};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, bce_grad, bce_loss, gaussian_noise, AdamConfig, AdamState, BatchNorm, Dense,
    Dropout, Layer, LayerSpec, LeakyRelu, Mode, Sequential, Sigmoid, Tensor2,
};
use crate::rng::Rng;

pub const LEAKY_ALPHA: f64 = 0.2;
pub const BATCHNORM_MOMENTUM: f64 = 0.8;
pub const DROPOUT_RATE: f64 = 0.2;
pub const GENERATOR_HIDDEN: [usize; 2] = [10, 20];
pub const DISCRIMINATOR_HIDDEN: usize = 6;
pub const DEFAULT_NOISE_DIM: usize = 100;
/// Rows per inference batch during generation. Inference is row-independent,
/// so this only bounds memory.
pub const GENERATION_BATCH: usize = 512;

const CHECKPOINT_MAGIC: &[u8; 8] = b"SRGANCKP";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct GeneratorModel {
    net: Sequential,
    noise_dim: usize,
    output_width: usize,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorModel {
    net: Sequential,
    input_width: usize,
}

fn sample_width(embedding_size: usize) -> Result<usize> {
    if embedding_size == 0 {
        return Err(Error::Parameter("embedding size must be at least 1".into()));
    }
    Ok(2 * embedding_size + 1)
}

/// Generator for dense samples of `E`-wide embeddings:
/// `noise → Dense(10) → LeakyReLU → BatchNorm → Dense(20) → LeakyReLU →
/// Dropout → Dense(2E+1)` with a linear output.
pub fn build_generator(embedding_size: usize, noise_dim: usize, rng: &mut Rng) -> Result<GeneratorModel> {
    GeneratorModel::with_output_width(noise_dim, sample_width(embedding_size)?, rng)
}

/// Discriminator for `2E+1`-wide samples:
/// `Dense(6) → LeakyReLU → Dense(1) → Sigmoid`.
pub fn build_discriminator(embedding_size: usize, rng: &mut Rng) -> Result<DiscriminatorModel> {
    DiscriminatorModel::with_input_width(sample_width(embedding_size)?, rng)
}

impl GeneratorModel {
    pub fn with_output_width(noise_dim: usize, output_width: usize, rng: &mut Rng) -> Result<Self> {
        if noise_dim == 0 || output_width == 0 {
            return Err(Error::Parameter("generator widths must be positive".into()));
        }
        let [h1, h2] = GENERATOR_HIDDEN;
        let net = Sequential::new(vec![
            Layer::Dense(Dense::glorot(noise_dim, h1, rng)),
            Layer::LeakyRelu(LeakyRelu::new(LEAKY_ALPHA)),
            Layer::BatchNorm(BatchNorm::new(h1, BATCHNORM_MOMENTUM, BatchNorm::DEFAULT_EPSILON)?),
            Layer::Dense(Dense::glorot(h1, h2, rng)),
            Layer::LeakyRelu(LeakyRelu::new(LEAKY_ALPHA)),
            Layer::Dropout(Dropout::new(DROPOUT_RATE)?),
            Layer::Dense(Dense::glorot(h2, output_width, rng)),
        ]);
        Ok(Self {
            net,
            noise_dim,
            output_width,
        })
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn architecture(&self) -> Vec<LayerSpec> {
        self.net.specs()
    }

    pub fn parameter_count(&self) -> usize {
        self.net.parameter_count()
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    /// Inference-mode forward pass (dropout off, batch-norm running stats).
    pub fn forward(&self, noise: &Tensor2) -> Result<Tensor2> {
        self.net.infer(noise)
    }
}

impl DiscriminatorModel {
    pub fn with_input_width(input_width: usize, rng: &mut Rng) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::Parameter("discriminator width must be positive".into()));
        }
        let net = Sequential::new(vec![
            Layer::Dense(Dense::glorot(input_width, DISCRIMINATOR_HIDDEN, rng)),
            Layer::LeakyRelu(LeakyRelu::new(LEAKY_ALPHA)),
            Layer::Dense(Dense::glorot(DISCRIMINATOR_HIDDEN, 1, rng)),
            Layer::Sigmoid(Sigmoid::default()),
        ]);
        Ok(Self { net, input_width })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn architecture(&self) -> Vec<LayerSpec> {
        self.net.specs()
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    /// Probability that each row is real, one score per row.
    pub fn score(&self, samples: &Tensor2) -> Result<Vec<f64>> {
        Ok(self.net.infer(samples)?.into_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub noise_dim: usize,
    /// Noise std during training; generation std is chosen separately.
    pub train_noise_std: f64,
    pub generator_adam: AdamConfig,
    pub discriminator_adam: AdamConfig,
}

/// Adam settings shared by both networks. With the stock `beta1 = 0.9` and
/// `lr = 1e-3` the generator tends to collapse onto a narrow band of votes.
pub const GAN_ADAM: AdamConfig = AdamConfig {
    learning_rate: 2e-4,
    beta1: 0.5,
    beta2: 0.999,
    epsilon: 1e-8,
};

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            noise_dim: DEFAULT_NOISE_DIM,
            train_noise_std: 1.0,
            generator_adam: GAN_ADAM,
            discriminator_adam: GAN_ADAM,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size < 2 || self.noise_dim == 0 {
            return Err(Error::Parameter(format!(
                "GAN epochs and noise size must be positive and batches at least 2 rows: {self:?}"
            )));
        }
        if !(self.train_noise_std > 0.0) {
            return Err(Error::Parameter("training noise std must be positive".into()));
        }
        self.generator_adam.validate()?;
        self.discriminator_adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// `(real loss + fake loss) / 2`, averaged over batches.
    pub discriminator_loss: f64,
    pub generator_loss: f64,
    pub mean_real_score: f64,
    pub mean_fake_score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GanHistory {
    pub epochs: Vec<EpochLoss>,
}

impl GanHistory {
    pub fn to_csv_lines(&self) -> Vec<String> {
        let mut rows =
            vec!["epoch,discriminator_loss,generator_loss,mean_real_score,mean_fake_score".to_string()];
        for e in &self.epochs {
            rows.push(format!(
                "{},{},{},{},{}",
                e.epoch, e.discriminator_loss, e.generator_loss, e.mean_real_score, e.mean_fake_score
            ));
        }
        rows
    }
}

fn check_loss(loss: f64, what: &str, epoch: usize, batch: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Training(format!(
            "{what} loss non-finite at epoch {epoch}, batch {batch}"
        )));
    }
    Ok(())
}

/// Alternating adversarial training. Each batch takes one discriminator step
/// on real (label 1) and generated (label 0) rows with loss
/// `(real + fake) / 2`, then one generator step through the fixed
/// discriminator against label 1 (non-saturating objective).
pub fn train_gan(
    real: &Tensor2,
    config: &GanTrainConfig,
    rng: &mut Rng,
) -> Result<(GeneratorModel, DiscriminatorModel, GanHistory)> {
    config.validate()?;
    if real.rows() < 2 {
        return Err(Error::Parameter("need at least two real samples".into()));
    }
    if !real.is_finite() {
        return Err(Error::Validation("real samples contain non-finite values".into()));
    }
    let width = real.cols();
    let mut gen = GeneratorModel::with_output_width(config.noise_dim, width, rng)?;
    let mut disc = DiscriminatorModel::with_input_width(width, rng)?;
    let mut gen_adam = AdamState::new(config.generator_adam);
    let mut disc_adam = AdamState::new(config.discriminator_adam);
    let mut order: Vec<usize> = (0..real.rows()).collect();
    let mut history = GanHistory::default();

    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut sums = [0.0f64; 4];
        let mut batches = 0usize;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            if idx.len() < 2 {
                continue;
            }
            let n = idx.len();
            let real_batch = real.select_rows(idx);
            let ones = Tensor2::filled(n, 1, 1.0);
            let zeros = Tensor2::zeros(n, 1);

            // discriminator step
            let z = gaussian_noise(rng, n, config.noise_dim, config.train_noise_std)?;
            let fake = gen.net.forward(&z, Mode::Train, rng)?;
            let d_real = disc.net.forward(&real_batch, Mode::Train, rng)?;
            let real_loss = bce_loss(&d_real, &ones)?;
            let g_real = bce_grad(&d_real, &ones)?.map(|g| g * 0.5);
            disc.net.backward(&g_real)?;
            let real_grads: Vec<Vec<f64>> = disc.net.params().iter().map(|p| p.grad.to_vec()).collect();

            let d_fake = disc.net.forward(&fake, Mode::Train, rng)?;
            let fake_loss = bce_loss(&d_fake, &zeros)?;
            let g_fake = bce_grad(&d_fake, &zeros)?.map(|g| g * 0.5);
            disc.net.backward(&g_fake)?;
            let d_loss = 0.5 * (real_loss + fake_loss);
            check_loss(d_loss, "discriminator", epoch, b)?;
            {
                let fake_grads: Vec<Vec<f64>> =
                    disc.net.params().iter().map(|p| p.grad.to_vec()).collect();
                let summed: Vec<Vec<f64>> = real_grads
                    .iter()
                    .zip(&fake_grads)
                    .map(|(a, f)| a.iter().zip(f).map(|(x, y)| x + y).collect())
                    .collect();
                let mut params = disc.net.params();
                for (p, g) in params.iter_mut().zip(&summed) {
                    p.grad = g;
                }
                adam_step(&mut params, &mut disc_adam)
                    .map_err(|e| Error::Training(format!("epoch {epoch}, batch {b}: {e}")))?;
            }

            // generator step
            let z = gaussian_noise(rng, n, config.noise_dim, config.train_noise_std)?;
            let fake = gen.net.forward(&z, Mode::Train, rng)?;
            let d_out = disc.net.forward(&fake, Mode::Train, rng)?;
            let g_loss = bce_loss(&d_out, &ones)?;
            check_loss(g_loss, "generator", epoch, b)?;
            let grad_fake = disc.net.backward(&bce_grad(&d_out, &ones)?)?;
            gen.net.backward(&grad_fake)?;
            adam_step(&mut gen.net.params(), &mut gen_adam)
                .map_err(|e| Error::Training(format!("epoch {epoch}, batch {b}: {e}")))?;

            sums[0] += d_loss;
            sums[1] += g_loss;
            sums[2] += d_real.mean();
            sums[3] += d_fake.mean();
            batches += 1;
        }
        let k = batches.max(1) as f64;
        let e = EpochLoss {
            epoch,
            discriminator_loss: sums[0] / k,
            generator_loss: sums[1] / k,
            mean_real_score: sums[2] / k,
            mean_fake_score: sums[3] / k,
        };
        log::debug!(
            "gan epoch {epoch}: d_loss {:.4} g_loss {:.4} D(real) {:.3} D(fake) {:.3}",
            e.discriminator_loss,
            e.generator_loss,
            e.mean_real_score,
            e.mean_fake_score
        );
        history.epochs.push(e);
    }
    Ok((gen, disc, history))
}

/// Generated dense samples, one row of width `2E+1` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeDenseSet {
    pub samples: Tensor2,
    pub std: f64,
    pub seed: u64,
}

impl FakeDenseSet {
    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn embedding_size(&self) -> usize {
        (self.samples.cols().saturating_sub(1)) / 2
    }

    fn columns(&self, from: usize, to: usize) -> Tensor2 {
        let w = to - from;
        let mut data = Vec::with_capacity(self.len() * w);
        for r in 0..self.len() {
            data.extend_from_slice(&self.samples.row(r)[from..to]);
        }
        Tensor2::from_vec(self.len(), w, data).expect("sized above")
    }

    pub fn user_vectors(&self) -> Tensor2 {
        let e = self.embedding_size();
        self.columns(0, e)
    }

    pub fn item_vectors(&self) -> Tensor2 {
        let e = self.embedding_size();
        self.columns(e, 2 * e)
    }

    pub fn rating_codes(&self) -> Vec<f64> {
        let c = 2 * self.embedding_size();
        (0..self.len()).map(|r| self.samples.get(r, c)).collect()
    }
}

/// Draws `n` noise rows from `Normal(0, std²)` and maps them through the
/// generator in inference mode.
pub fn generate(gen: &GeneratorModel, n: usize, std: f64, rng: &mut Rng) -> Result<FakeDenseSet> {
    if n == 0 {
        return Err(Error::Parameter("number of generated samples must be at least 1".into()));
    }
    let mut data = Vec::with_capacity(n * gen.output_width);
    let mut done = 0;
    while done < n {
        let rows = GENERATION_BATCH.min(n - done);
        let z = gaussian_noise(rng, rows, gen.noise_dim, std)?;
        data.extend_from_slice(gen.forward(&z)?.data());
        done += rows;
    }
    Ok(FakeDenseSet {
        samples: Tensor2::from_vec(n, gen.output_width, data)?,
        std,
        seed: rng.seed(),
    })
}

/// Both networks of a trained GAN.
#[derive(Debug, Clone)]
pub struct GanCheckpoint {
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
}

impl GanCheckpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = ByteWriter::new();
        w.u64(self.generator.noise_dim as u64);
        w.u64(self.generator.output_width as u64);
        put_sequential(&mut w, &self.generator.net);
        put_sequential(&mut w, &self.discriminator.net);
        write_container(path.as_ref(), CHECKPOINT_MAGIC, FORMAT_VERSION, w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = read_container(path, CHECKPOINT_MAGIC, FORMAT_VERSION)?;
        let noise_dim = r.usize()?;
        let width = r.usize()?;
        let gnet = get_sequential(&mut r)?;
        let dnet = get_sequential(&mut r)?;
        r.finish()?;
        let dims_ok = matches!(gnet.specs().first(), Some(LayerSpec::Dense { inputs, .. }) if *inputs == noise_dim)
            && matches!(dnet.specs().first(), Some(LayerSpec::Dense { inputs, .. }) if *inputs == width);
        if !dims_ok {
            return Err(Error::Integrity {
                path: path.to_path_buf(),
                message: "network shapes disagree with the header".into(),
            });
        }
        Ok(Self {
            generator: GeneratorModel {
                net: gnet,
                noise_dim,
                output_width: width,
            },
            discriminator: DiscriminatorModel {
                net: dnet,
                input_width: width,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_output_widths() {
        let g = build_generator(5, 100, &mut Rng::new(0)).unwrap();
        assert_eq!(g.output_width(), 11);
        let g1 = build_generator(1, 100, &mut Rng::new(0)).unwrap();
        assert_eq!(g1.output_width(), 3);
        let z = gaussian_noise(&mut Rng::new(1), 64, 100, 1.0).unwrap();
        let out = g.forward(&z).unwrap();
        assert_eq!(out.shape(), (64, 11));
        assert!(out.is_finite());
        assert!(build_generator(0, 100, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn parameter_count_is_a_function_of_shape() {
        let a = build_generator(5, 100, &mut Rng::new(0)).unwrap();
        let b = build_generator(5, 100, &mut Rng::new(99)).unwrap();
        // 100*10+10 + 2*10 + 10*20+20 + 20*11+11
        assert_eq!(a.parameter_count(), 1010 + 20 + 220 + 231);
        assert_eq!(a.parameter_count(), b.parameter_count());
    }

    #[test]
    fn discriminator_scores_in_unit_interval() {
        let d = build_discriminator(5, &mut Rng::new(0)).unwrap();
        assert_eq!(d.input_width(), 11);
        let x = gaussian_noise(&mut Rng::new(3), 7, 11, 50.0).unwrap();
        let s = d.score(&x).unwrap();
        assert_eq!(s.len(), 7);
        assert!(s.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn generate_rejects_zero_and_is_batch_independent() {
        let g = build_generator(2, 8, &mut Rng::new(0)).unwrap();
        assert!(generate(&g, 0, 1.0, &mut Rng::new(1)).is_err());
        let big = generate(&g, GENERATION_BATCH + 37, 1.5, &mut Rng::new(4)).unwrap();
        // the same noise pushed through in one pass
        let z = gaussian_noise(&mut Rng::new(4), GENERATION_BATCH + 37, 8, 1.5).unwrap();
        assert_eq!(g.forward(&z).unwrap(), big.samples);
    }
}
