//! Dot-product matrix factorization ("DeepMF"): one embedding table for users
//! and one for items, trained with MSE and Adam. The trained tables turn each
//! sparse rating into a dense sample `⟨user vector, item vector, rating code⟩`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{read_container, write_container, ByteReader, ByteWriter};
use crate::dataset::{Dataset, RatingRange};
use crate::error::{Error, Result};
use crate::nn::{adam_step, dot, AdamConfig, AdamState, Param, Tensor2};
use crate::rng::Rng;

const CHECKPOINT_MAGIC: &[u8; 8] = b"SRDEEPMF";
const DENSE_MAGIC: &[u8; 8] = b"SRDENSE\0";
const FORMAT_VERSION: u32 = 1;

/// Rounds to the nearest integer; exact halves go away from `midpoint`
/// (and up when the value sits on the midpoint itself).
pub fn round_away_from_midpoint(v: f64, midpoint: f64) -> f64 {
    let floor = v.floor();
    let frac = v - floor;
    if frac > 0.5 {
        floor + 1.0
    } else if frac < 0.5 {
        floor
    } else if v >= midpoint {
        floor + 1.0
    } else {
        floor
    }
}

/// Affine map between votes in `[min, max]` and codes in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingCodec {
    range: RatingRange,
}

impl RatingCodec {
    pub fn new(range: RatingRange) -> Self {
        Self { range }
    }

    pub fn range(&self) -> RatingRange {
        self.range
    }

    fn span(&self) -> f64 {
        (self.range.max - self.range.min) as f64
    }

    pub fn encode(&self, vote: f64) -> f64 {
        2.0 * (vote - self.range.min as f64) / self.span() - 1.0
    }

    pub fn decode(&self, code: f64) -> f64 {
        self.range.min as f64 + (code + 1.0) * self.span() / 2.0
    }

    /// Decoded, rounded and clamped to a valid vote.
    pub fn to_vote(&self, code: f64) -> i32 {
        let v = round_away_from_midpoint(self.decode(code), self.range.midpoint());
        (v.clamp(self.range.min as f64, self.range.max as f64)) as i32
    }
}

/// Learned vectors for IDs `1..=rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    kind: &'static str,
    matrix: Tensor2,
}

impl EmbeddingTable {
    pub fn new(kind: &'static str, matrix: Tensor2) -> Self {
        Self { kind, matrix }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Tensor2 {
        &self.matrix
    }

    pub fn lookup(&self, id: u32) -> Result<&[f64]> {
        if id == 0 || id as usize > self.rows() {
            return Err(Error::Lookup {
                kind: self.kind,
                id,
                max: self.rows(),
            });
        }
        Ok(self.matrix.row(id as usize - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeepMfConfig {
    pub embedding_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_std: f64,
    pub adam: AdamConfig,
    /// Run extra epochs until at least this many optimizer steps were taken.
    /// Zero keeps exactly `epochs`.
    pub min_updates: usize,
}

impl Default for DeepMfConfig {
    fn default() -> Self {
        Self {
            embedding_size: 5,
            epochs: 20,
            batch_size: 256,
            init_std: 0.1,
            adam: AdamConfig::default(),
            min_updates: 0,
        }
    }
}

impl DeepMfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_size == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Parameter(format!(
                "embedding size, epochs and batch size must be positive: {self:?}"
            )));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::Parameter("init_std must be positive".into()));
        }
        self.adam.validate()
    }

    /// Epochs actually run on a training set of `samples` ratings.
    pub fn effective_epochs(&self, samples: usize) -> usize {
        let per_epoch = samples.div_ceil(self.batch_size).max(1);
        self.epochs.max(self.min_updates.div_ceil(per_epoch))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepMfModel {
    users: EmbeddingTable,
    items: EmbeddingTable,
    codec: RatingCodec,
}

impl DeepMfModel {
    pub fn new(users: EmbeddingTable, items: EmbeddingTable, codec: RatingCodec) -> Result<Self> {
        if users.dim() != items.dim() || users.dim() == 0 {
            return Err(Error::shape("DeepMfModel::new", users.dim(), items.dim()));
        }
        if !users.matrix.is_finite() || !items.matrix.is_finite() {
            return Err(Error::Validation("embedding tables contain non-finite values".into()));
        }
        Ok(Self {
            users,
            items,
            codec,
        })
    }

    pub fn embedding_size(&self) -> usize {
        self.users.dim()
    }

    pub fn num_users(&self) -> usize {
        self.users.rows()
    }

    pub fn num_items(&self) -> usize {
        self.items.rows()
    }

    pub fn codec(&self) -> RatingCodec {
        self.codec
    }

    pub fn users(&self) -> &EmbeddingTable {
        &self.users
    }

    pub fn items(&self) -> &EmbeddingTable {
        &self.items
    }

    /// Raw dot product of the two embeddings; no bias, no output activation.
    pub fn predict(&self, user: u32, item: u32) -> Result<f64> {
        Ok(dot(self.users.lookup(user)?, self.items.lookup(item)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = ByteWriter::new();
        w.i32(self.codec.range.min);
        w.i32(self.codec.range.max);
        w.u64(self.embedding_size() as u64);
        w.tensor(&self.users.matrix);
        w.tensor(&self.items.matrix);
        write_container(path.as_ref(), CHECKPOINT_MAGIC, FORMAT_VERSION, w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = read_container(path, CHECKPOINT_MAGIC, FORMAT_VERSION)?;
        let range = read_range(&mut r, path)?;
        let e = r.usize()?;
        let users = r.tensor()?;
        let items = r.tensor()?;
        r.finish()?;
        if users.cols() != e || items.cols() != e {
            return Err(Error::Integrity {
                path: path.to_path_buf(),
                message: "table width disagrees with embedding size".into(),
            });
        }
        Self::new(
            EmbeddingTable::new("user", users),
            EmbeddingTable::new("item", items),
            RatingCodec::new(range),
        )
    }
}

fn read_range(r: &mut ByteReader<'_>, path: &Path) -> Result<RatingRange> {
    let min = r.i32()?;
    let max = r.i32()?;
    RatingRange::new(min, max).map_err(|e| Error::Integrity {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean batch MSE per epoch, measured before each batch's update.
    pub epoch_mse: Vec<f64>,
}

/// Fits user and item embeddings so that their dot product predicts the raw
/// vote.
pub fn train_deepmf(
    train: &Dataset,
    config: &DeepMfConfig,
    rng: &mut Rng,
) -> Result<(DeepMfModel, TrainHistory)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Parameter("cannot train on an empty dataset".into()));
    }
    let e = config.embedding_size;
    let (nu, ni) = (train.num_users(), train.num_items());
    let mut init = |rows: usize| {
        let data = (0..rows * e)
            .map(|_| config.init_std * rng.standard_normal())
            .collect();
        Tensor2::from_vec(rows, e, data).expect("sized above")
    };
    let mut users = init(nu);
    let mut items = init(ni);
    let mut grad_u = vec![0.0; nu * e];
    let mut grad_i = vec![0.0; ni * e];
    let mut adam = AdamState::new(config.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let triples = train.triples();
    let epochs = config.effective_epochs(train.len());
    let mut history = Vec::with_capacity(epochs);

    for epoch in 1..=epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            grad_u.iter_mut().for_each(|g| *g = 0.0);
            grad_i.iter_mut().for_each(|g| *g = 0.0);
            let b = batch.len() as f64;
            let mut loss = 0.0;
            for &k in batch {
                let t = triples[k];
                let (u, i) = (t.user as usize - 1, t.item as usize - 1);
                let uv = users.row(u);
                let iv = items.row(i);
                let err = dot(uv, iv) - t.rating as f64;
                loss += err * err;
                let g = 2.0 * err / b;
                for d in 0..e {
                    grad_u[u * e + d] += g * iv[d];
                    grad_i[i * e + d] += g * uv[d];
                }
            }
            loss /= b;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "deepmf loss became non-finite in epoch {epoch}"
                )));
            }
            loss_sum += loss;
            batches += 1;
            let mut params = [
                Param {
                    name: "user_embeddings".into(),
                    value: users.data_mut(),
                    grad: &grad_u,
                },
                Param {
                    name: "item_embeddings".into(),
                    value: items.data_mut(),
                    grad: &grad_i,
                },
            ];
            adam_step(&mut params, &mut adam)
                .map_err(|err| Error::Training(format!("epoch {epoch}: {err}")))?;
        }
        let epoch_loss = loss_sum / batches as f64;
        log::debug!("deepmf epoch {epoch}: mse {epoch_loss:.5}");
        history.push(epoch_loss);
    }

    let model = DeepMfModel::new(
        EmbeddingTable::new("user", users),
        EmbeddingTable::new("item", items),
        RatingCodec::new(train.range()),
    )
    .map_err(|e| Error::Training(e.to_string()))?;
    Ok((model, TrainHistory { epoch_mse: history }))
}

/// Independent copies of the user and item tables.
pub fn extract_embeddings(model: &DeepMfModel) -> (EmbeddingTable, EmbeddingTable) {
    (model.users.clone(), model.items.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseSample {
    pub user_vec: Vec<f64>,
    pub item_vec: Vec<f64>,
    pub rating_code: f64,
}

impl DenseSample {
    pub fn width(&self) -> usize {
        self.user_vec.len() + self.item_vec.len() + 1
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.user_vec);
        out.extend_from_slice(&self.item_vec);
        out.push(self.rating_code);
    }
}

/// One dense sample per triple, in triple order.
pub fn densify(
    dataset: &Dataset,
    users: &EmbeddingTable,
    items: &EmbeddingTable,
    codec: &RatingCodec,
) -> Result<Vec<DenseSample>> {
    dataset
        .triples()
        .iter()
        .map(|t| {
            Ok(DenseSample {
                user_vec: users.lookup(t.user)?.to_vec(),
                item_vec: items.lookup(t.item)?.to_vec(),
                rating_code: codec.encode(t.rating as f64),
            })
        })
        .collect()
}

/// Row-major `n × (2E+1)` matrix of dense samples.
pub fn dense_matrix(samples: &[DenseSample]) -> Result<Tensor2> {
    let width = samples.first().map_or(0, DenseSample::width);
    let mut data = Vec::with_capacity(samples.len() * width);
    for s in samples {
        if s.width() != width || s.user_vec.len() != s.item_vec.len() {
            return Err(Error::shape("dense_matrix", width, s.width()));
        }
        s.flatten_into(&mut data);
    }
    Tensor2::from_vec(samples.len(), width, data)
}

/// Splits a `n × (2E+1)` matrix back into samples.
pub fn samples_from_matrix(m: &Tensor2) -> Result<Vec<DenseSample>> {
    if m.cols() < 3 || m.cols().is_multiple_of(2) {
        return Err(Error::shape("samples_from_matrix", "odd width 2E+1", m.cols()));
    }
    let e = (m.cols() - 1) / 2;
    Ok((0..m.rows())
        .map(|r| {
            let row = m.row(r);
            DenseSample {
                user_vec: row[..e].to_vec(),
                item_vec: row[e..2 * e].to_vec(),
                rating_code: row[2 * e],
            }
        })
        .collect())
}

/// Dense samples with the codec they were encoded with.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFile {
    pub codec: RatingCodec,
    pub embedding_size: usize,
    pub samples: Tensor2,
}

impl DenseFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = ByteWriter::new();
        w.i32(self.codec.range.min);
        w.i32(self.codec.range.max);
        w.u64(self.embedding_size as u64);
        w.tensor(&self.samples);
        write_container(path.as_ref(), DENSE_MAGIC, FORMAT_VERSION, w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = read_container(path, DENSE_MAGIC, FORMAT_VERSION)?;
        let range = read_range(&mut r, path)?;
        let embedding_size = r.usize()?;
        let samples = r.tensor()?;
        r.finish()?;
        if samples.rows() > 0 && samples.cols() != 2 * embedding_size + 1 {
            return Err(Error::Integrity {
                path: path.to_path_buf(),
                message: format!(
                    "sample width {} does not match embedding size {embedding_size}",
                    samples.cols()
                ),
            });
        }
        Ok(Self {
            codec: RatingCodec::new(range),
            embedding_size,
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingTriple;

    fn r15() -> RatingRange {
        RatingRange::new(1, 5).unwrap()
    }

    fn table(kind: &'static str, rows: &[Vec<f64>]) -> EmbeddingTable {
        EmbeddingTable::new(kind, Tensor2::from_rows(rows).unwrap())
    }

    #[test]
    fn codec_endpoints_and_midpoint() {
        let c = RatingCodec::new(r15());
        assert_eq!(c.encode(5.0), 1.0);
        assert_eq!(c.encode(1.0), -1.0);
        assert_eq!(c.encode(3.0), 0.0);
        assert_eq!(c.to_vote(0.0), 3);
        assert_eq!(c.to_vote(1.4), 5);
        assert_eq!(c.to_vote(-3.0), 1);
    }

    #[test]
    fn codec_round_trips_every_vote() {
        for (lo, hi) in [(1, 5), (1, 10), (0, 1), (-2, 7)] {
            let c = RatingCodec::new(RatingRange::new(lo, hi).unwrap());
            for v in lo..=hi {
                let code = c.encode(v as f64);
                assert!((-1.0..=1.0).contains(&code));
                assert!((c.decode(code) - v as f64).abs() < 1e-12);
                assert_eq!(c.to_vote(code), v);
            }
        }
    }

    #[test]
    fn half_votes_round_away_from_midpoint() {
        assert_eq!(round_away_from_midpoint(4.5, 3.0), 5.0);
        assert_eq!(round_away_from_midpoint(1.5, 3.0), 1.0);
        assert_eq!(round_away_from_midpoint(2.5, 3.0), 2.0);
        assert_eq!(round_away_from_midpoint(3.5, 3.0), 4.0);
        assert_eq!(round_away_from_midpoint(3.2, 3.0), 3.0);
        assert_eq!(round_away_from_midpoint(3.7, 3.0), 4.0);
    }

    #[test]
    fn predict_is_plain_dot_product() {
        let users = table("user", &[vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0; 5]]);
        let items = table("item", &[vec![2.0, 0.0, 0.0, 0.0, 0.0], vec![0.3, -1.0, 2.0, 0.1, 4.0]]);
        let m = DeepMfModel::new(users, items, RatingCodec::new(r15())).unwrap();
        assert_eq!(m.predict(1, 1).unwrap(), 2.0);
        assert_eq!(m.predict(2, 1).unwrap(), 0.0);
        assert_eq!(m.predict(2, 2).unwrap(), 0.0);
        assert!(matches!(m.predict(3, 1), Err(Error::Lookup { .. })));
        assert!(matches!(m.predict(1, 0), Err(Error::Lookup { .. })));
    }

    #[test]
    fn extracted_tables_are_copies() {
        let users = table("user", &[vec![1.0, 2.0]]);
        let items = table("item", &[vec![3.0, 4.0]]);
        let m = DeepMfModel::new(users, items, RatingCodec::new(r15())).unwrap();
        let (u1, i1) = extract_embeddings(&m);
        let (u2, _) = extract_embeddings(&m);
        assert_eq!(u1, u2);
        assert_eq!(u1.lookup(1).unwrap(), &[1.0, 2.0]);
        assert_eq!(i1.rows(), 1);
    }

    #[test]
    fn densify_preserves_order_and_encodes_votes() {
        let d = Dataset::new(
            vec![RatingTriple::new(2, 1, 5), RatingTriple::new(1, 2, 3)],
            2,
            2,
            r15(),
            "t",
        )
        .unwrap();
        let users = table("user", &[vec![0.1], vec![0.2]]);
        let items = table("item", &[vec![-1.0], vec![-2.0]]);
        let dense = densify(&d, &users, &items, &RatingCodec::new(r15())).unwrap();
        assert_eq!(dense.len(), 2);
        assert_eq!(dense[0].user_vec, vec![0.2]);
        assert_eq!(dense[0].rating_code, 1.0);
        assert_eq!(dense[1].item_vec, vec![-2.0]);
        assert_eq!(dense[1].rating_code, 0.0);
    }

    #[test]
    fn densify_unresolvable_id_is_lookup_error() {
        let d = Dataset::new(vec![RatingTriple::new(3, 1, 5)], 3, 1, r15(), "t").unwrap();
        let users = table("user", &[vec![0.1], vec![0.2]]);
        let items = table("item", &[vec![-1.0]]);
        assert!(matches!(
            densify(&d, &users, &items, &RatingCodec::new(r15())),
            Err(Error::Lookup { kind: "user", .. })
        ));
    }

    #[test]
    fn training_is_deterministic_and_rejects_empty() {
        let d = Dataset::new(
            (1..=6)
                .flat_map(|u| (1..=4).map(move |i| RatingTriple::new(u, i, ((u + i) % 5 + 1) as i32)))
                .collect(),
            6,
            4,
            r15(),
            "t",
        )
        .unwrap();
        let cfg = DeepMfConfig {
            epochs: 3,
            batch_size: 5,
            ..Default::default()
        };
        let (a, ha) = train_deepmf(&d, &cfg, &mut Rng::new(9)).unwrap();
        let (b, hb) = train_deepmf(&d, &cfg, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(ha.epoch_mse.len(), 3);

        let empty = Dataset::new(vec![], 1, 1, r15(), "e").unwrap();
        assert!(train_deepmf(&empty, &cfg, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let users = table("user", &[vec![0.1, 1.0 / 3.0], vec![-2e-300, 7.0]]);
        let items = table("item", &[vec![std::f64::consts::PI, -0.0]]);
        let m = DeepMfModel::new(users, items, RatingCodec::new(RatingRange::new(1, 10).unwrap())).unwrap();
        let p = dir.path().join("m.bin");
        m.save(&p).unwrap();
        assert_eq!(DeepMfModel::load(&p).unwrap(), m);
    }
}
