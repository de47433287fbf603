//! Sparse ratings datasets: loading, validation, reindexing, splitting,
//! writing and distribution statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

const METADATA_TAG: &str = "synthrec-dataset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RatingTriple {
    pub user: u32,
    pub item: u32,
    pub rating: i32,
}

impl RatingTriple {
    pub fn new(user: u32, item: u32, rating: i32) -> Self {
        Self { user, item, rating }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRange {
    pub min: i32,
    pub max: i32,
}

impl RatingRange {
    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min >= max {
            return Err(Error::Validation(format!("empty rating range {min}..{max}")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, v: i32) -> bool {
        (self.min..=self.max).contains(&v)
    }

    pub fn values(&self) -> impl Iterator<Item = i32> {
        self.min..=self.max
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn midpoint(&self) -> f64 {
        (self.min + self.max) as f64 / 2.0
    }
}

impl fmt::Display for RatingRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

/// An immutable ratings dataset. IDs are 1-based and bounded by the declared
/// user and item counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    triples: Vec<RatingTriple>,
    num_users: usize,
    num_items: usize,
    range: RatingRange,
    label: String,
}

impl Dataset {
    pub fn new(
        triples: Vec<RatingTriple>,
        num_users: usize,
        num_items: usize,
        range: RatingRange,
        label: impl Into<String>,
    ) -> Result<Self> {
        for (k, t) in triples.iter().enumerate() {
            if t.user == 0 || t.user as usize > num_users {
                return Err(Error::Validation(format!(
                    "triple {k}: user {} outside 1..={num_users}",
                    t.user
                )));
            }
            if t.item == 0 || t.item as usize > num_items {
                return Err(Error::Validation(format!(
                    "triple {k}: item {} outside 1..={num_items}",
                    t.item
                )));
            }
            if !range.contains(t.rating) {
                return Err(Error::Validation(format!(
                    "triple {k}: rating {} outside {range}",
                    t.rating
                )));
            }
        }
        Ok(Self {
            triples,
            num_users,
            num_items,
            range,
            label: label.into(),
        })
    }

    pub fn triples(&self) -> &[RatingTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn range(&self) -> RatingRange {
        self.range
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `1 - N / (|U| · |I|)`.
    pub fn sparsity(&self) -> f64 {
        let cells = (self.num_users * self.num_items) as f64;
        if cells == 0.0 {
            return 1.0;
        }
        1.0 - self.len() as f64 / cells
    }

    pub fn has_duplicate_pairs(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.len());
        self.triples.iter().any(|t| !seen.insert((t.user, t.item)))
    }

    /// Same triples as `other`, ignoring order.
    pub fn same_triples(&self, other: &Dataset) -> bool {
        let mut a = self.triples.clone();
        let mut b = other.triples.clone();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }

    fn subset(&self, idx: &[usize], label: String) -> Dataset {
        Dataset {
            triples: idx.iter().map(|&i| self.triples[i]).collect(),
            num_users: self.num_users,
            num_items: self.num_items,
            range: self.range,
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Comma,
    Tab,
    Semicolon,
    /// Any run of ASCII whitespace.
    Whitespace,
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Semicolon => line.split(';').map(str::trim).collect(),
            Delimiter::Whitespace => line.split_ascii_whitespace().collect(),
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Delimiter::Comma => ",",
            Delimiter::Tab => "\t",
            Delimiter::Semicolon => ";",
            Delimiter::Whitespace => " ",
        }
    }
}

/// How a delimited ratings file is laid out.
///
/// Lines starting with `#` are comments; a comment of the form
/// `# synthrec-dataset v1 key=value ...` carries dataset metadata. Columns
/// beyond the three rating columns (e.g. timestamps) are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub delimiter: Delimiter,
    pub header: bool,
    pub user_column: usize,
    pub item_column: usize,
    pub rating_column: usize,
    /// Declared vote range; when absent it must come from the file metadata.
    pub range: Option<RatingRange>,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self::canonical()
    }
}

impl FormatSpec {
    /// `user,item,rating[,timestamp]`; range taken from metadata.
    pub fn canonical() -> Self {
        Self {
            delimiter: Delimiter::Comma,
            header: false,
            user_column: 0,
            item_column: 1,
            rating_column: 2,
            range: None,
        }
    }

    /// MovieLens `u.data`: tab separated, votes 1..5, trailing timestamp.
    pub fn movielens() -> Self {
        Self {
            delimiter: Delimiter::Tab,
            range: Some(RatingRange { min: 1, max: 5 }),
            ..Self::canonical()
        }
    }

    pub fn with_range(mut self, range: RatingRange) -> Self {
        self.range = Some(range);
        self
    }

    pub fn with_delimiter(mut self, delimiter: Delimiter) -> Self {
        self.delimiter = delimiter;
        self
    }
}

impl FromStr for FormatSpec {
    type Err = Error;

    /// `canonical`/`csv`, `movielens`, `tsv`, optionally followed by
    /// `:min..max`, e.g. `csv:1..10`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, range) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        let mut spec = match name {
            "canonical" | "csv" => Self::canonical(),
            "movielens" => Self::movielens(),
            "tsv" => Self::canonical().with_delimiter(Delimiter::Tab),
            other => return Err(Error::Config(format!("unknown dataset format '{other}'"))),
        };
        if let Some(r) = range {
            let (lo, hi) = r
                .split_once("..")
                .ok_or_else(|| Error::Config(format!("bad rating range '{r}'")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<i32>()
                    .map_err(|_| Error::Config(format!("bad rating range '{r}'")))
            };
            spec.range = Some(RatingRange::new(parse(lo)?, parse(hi)?)?);
        }
        Ok(spec)
    }
}

#[derive(Debug, Default)]
struct Metadata {
    users: Option<usize>,
    items: Option<usize>,
    range: Option<RatingRange>,
    unique_pairs: Option<bool>,
    label: Option<String>,
}

fn parse_metadata(comment: &str) -> Option<Metadata> {
    let mut words = comment.split_ascii_whitespace();
    if words.next()? != METADATA_TAG {
        return None;
    }
    let _version = words.next()?;
    let mut meta = Metadata::default();
    let (mut lo, mut hi) = (None, None);
    for kv in words {
        let Some((k, v)) = kv.split_once('=') else {
            continue;
        };
        match k {
            "users" => meta.users = v.parse().ok(),
            "items" => meta.items = v.parse().ok(),
            "rating_min" => lo = v.parse().ok(),
            "rating_max" => hi = v.parse().ok(),
            "unique_pairs" => meta.unique_pairs = v.parse().ok(),
            "label" => meta.label = Some(v.to_string()),
            _ => {}
        }
    }
    if let (Some(min), Some(max)) = (lo, hi) {
        meta.range = Some(RatingRange { min, max });
    }
    Some(meta)
}

fn parse_id(field: &str, what: &str, path: &Path, line: usize) -> Result<u32> {
    let id: u32 = field.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("{what} id '{field}' is not a non-negative integer"),
    })?;
    if id == 0 {
        return Err(Error::Validation(format!(
            "{}:{line}: {what} id 0 (ids are 1-based)",
            path.display()
        )));
    }
    Ok(id)
}

fn parse_rating(field: &str, path: &Path, line: usize) -> Result<i32> {
    let bad = || Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("rating '{field}' is not an integer vote"),
    };
    if let Ok(v) = field.parse::<i32>() {
        return Ok(v);
    }
    let v: f64 = field.parse().map_err(|_| bad())?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(bad());
    }
    Ok(v as i32)
}

/// Reads a delimited ratings file.
///
/// IDs are kept exactly as they appear in the file; declared counts are the
/// larger of the metadata counts and the largest ID seen. Use [`reindex`] to
/// obtain contiguous IDs.
pub fn load_dataset(path: impl AsRef<Path>, format: &FormatSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut meta = Metadata::default();
    let mut saw_metadata = false;
    let mut triples = Vec::new();
    let width = format
        .user_column
        .max(format.item_column)
        .max(format.rating_column)
        + 1;
    let mut header_pending = format.header;

    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(m) = parse_metadata(comment.trim()) {
                meta = m;
                saw_metadata = true;
            }
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields = format.delimiter.split(trimmed);
        if fields.len() < width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected at least {width} fields, found {}", fields.len()),
            });
        }
        triples.push((
            lineno,
            RatingTriple {
                user: parse_id(fields[format.user_column], "user", path, lineno)?,
                item: parse_id(fields[format.item_column], "item", path, lineno)?,
                rating: parse_rating(fields[format.rating_column], path, lineno)?,
            },
        ));
    }

    if triples.is_empty() && !saw_metadata {
        return Err(Error::Validation(format!("{}: empty dataset", path.display())));
    }

    let range = match (format.range, meta.range) {
        (Some(f), Some(m)) if f != m => {
            return Err(Error::Validation(format!(
                "{}: format declares rating range {f} but file metadata says {m}",
                path.display()
            )))
        }
        (Some(r), _) | (None, Some(r)) => r,
        (None, None) => {
            return Err(Error::Validation(format!(
                "{}: rating range is neither declared nor recorded in the file",
                path.display()
            )))
        }
    };
    let range = RatingRange::new(range.min, range.max)?;

    for (lineno, t) in &triples {
        if !range.contains(t.rating) {
            return Err(Error::Validation(format!(
                "{}:{lineno}: rating {} outside declared range {range}",
                path.display(),
                t.rating
            )));
        }
    }

    if meta.unique_pairs != Some(false) {
        let mut seen = HashMap::with_capacity(triples.len());
        for (lineno, t) in &triples {
            if let Some(first) = seen.insert((t.user, t.item), *lineno) {
                return Err(Error::Validation(format!(
                    "{}:{lineno}: duplicate rating for user {} item {} (first at line {first})",
                    path.display(),
                    t.user,
                    t.item
                )));
            }
        }
    }

    let max_user = triples.iter().map(|(_, t)| t.user).max().unwrap_or(0) as usize;
    let max_item = triples.iter().map(|(_, t)| t.item).max().unwrap_or(0) as usize;
    let label = meta.label.unwrap_or_else(|| {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Dataset::new(
        triples.into_iter().map(|(_, t)| t).collect(),
        meta.users.unwrap_or(0).max(max_user),
        meta.items.unwrap_or(0).max(max_item),
        range,
        label,
    )
}

/// Writes the dataset with a metadata comment line followed by one triple per
/// line.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>, format: &FormatSpec) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let label: String = dataset
        .label
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    writeln!(
        w,
        "# {METADATA_TAG} v1 users={} items={} rating_min={} rating_max={} unique_pairs={} label={}",
        dataset.num_users,
        dataset.num_items,
        dataset.range.min,
        dataset.range.max,
        !dataset.has_duplicate_pairs(),
        label
    )
    .map_err(io)?;
    if format.header {
        let d = format.delimiter.as_str();
        writeln!(w, "user{d}item{d}rating").map_err(io)?;
    }
    let d = format.delimiter.as_str();
    let width = format
        .user_column
        .max(format.item_column)
        .max(format.rating_column)
        + 1;
    let mut fields = vec![String::new(); width];
    for t in &dataset.triples {
        fields[format.user_column] = t.user.to_string();
        fields[format.item_column] = t.item.to_string();
        fields[format.rating_column] = t.rating.to_string();
        writeln!(w, "{}", fields.join(d)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Bijective maps between raw file IDs and contiguous 1-based IDs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IdMaps {
    /// `users[k]` is the raw ID of contiguous user `k + 1`.
    pub users: Vec<u32>,
    pub items: Vec<u32>,
}

impl IdMaps {
    pub fn raw_user(&self, id: u32) -> Option<u32> {
        self.users.get(id.checked_sub(1)? as usize).copied()
    }

    pub fn raw_item(&self, id: u32) -> Option<u32> {
        self.items.get(id.checked_sub(1)? as usize).copied()
    }

    /// Maps a contiguous dataset back to raw IDs.
    pub fn restore(&self, dataset: &Dataset) -> Result<Dataset> {
        let mut triples = Vec::with_capacity(dataset.len());
        for t in dataset.triples() {
            let user = self.raw_user(t.user).ok_or(Error::Lookup {
                kind: "user",
                id: t.user,
                max: self.users.len(),
            })?;
            let item = self.raw_item(t.item).ok_or(Error::Lookup {
                kind: "item",
                id: t.item,
                max: self.items.len(),
            })?;
            triples.push(RatingTriple::new(user, item, t.rating));
        }
        let nu = self.users.iter().copied().max().unwrap_or(0) as usize;
        let ni = self.items.iter().copied().max().unwrap_or(0) as usize;
        Dataset::new(triples, nu, ni, dataset.range, dataset.label.clone())
    }
}

/// Renumbers users and items to `1..=|U|` and `1..=|I|` in order of first
/// appearance.
pub fn reindex(dataset: &Dataset) -> (Dataset, IdMaps) {
    let mut users: HashMap<u32, u32> = HashMap::new();
    let mut items: HashMap<u32, u32> = HashMap::new();
    let mut maps = IdMaps::default();
    let mut triples = Vec::with_capacity(dataset.len());
    for t in &dataset.triples {
        let u = *users.entry(t.user).or_insert_with(|| {
            maps.users.push(t.user);
            maps.users.len() as u32
        });
        let i = *items.entry(t.item).or_insert_with(|| {
            maps.items.push(t.item);
            maps.items.len() as u32
        });
        triples.push(RatingTriple::new(u, i, t.rating));
    }
    let out = Dataset {
        triples,
        num_users: maps.users.len(),
        num_items: maps.items.len(),
        range: dataset.range,
        label: dataset.label.clone(),
    };
    (out, maps)
}

/// Per-user stratified train/test split.
///
/// Each user with `n ≥ 2` ratings sends `floor(f·n + u)` of them (`u` uniform
/// in `[0,1)`, capped at `n − 1`) to the test side; users with a single rating
/// stay entirely in train. Both sides keep the input order.
pub fn split(dataset: &Dataset, test_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut by_user: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (k, t) in dataset.triples.iter().enumerate() {
        by_user.entry(t.user).or_default().push(k);
    }
    let mut is_test = vec![false; dataset.len()];
    for idx in by_user.values_mut() {
        let n = idx.len();
        if n < 2 {
            continue;
        }
        let take = ((test_fraction * n as f64 + rng.uniform()).floor() as usize).min(n - 1);
        rng.shuffle(idx);
        for &k in &idx[..take] {
            is_test[k] = true;
        }
    }
    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&k| is_test[k]);
    Ok((
        dataset.subset(&train_idx, format!("{}:train", dataset.label)),
        dataset.subset(&test_idx, format!("{}:test", dataset.label)),
    ))
}

/// Histograms behind the distribution plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub samples: usize,
    pub num_users: usize,
    pub num_items: usize,
    pub active_users: usize,
    pub active_items: usize,
    pub sparsity: f64,
    pub range: RatingRange,
    /// vote → number of ratings, one entry per vote in the range.
    pub ratings: BTreeMap<i32, usize>,
    /// ratings per user → number of users.
    pub user_activity: BTreeMap<usize, usize>,
    /// ratings per item → number of items.
    pub item_popularity: BTreeMap<usize, usize>,
}

impl DistributionReport {
    pub fn rating_proportions(&self) -> BTreeMap<i32, f64> {
        let n = self.samples.max(1) as f64;
        self.ratings
            .iter()
            .map(|(&v, &c)| (v, c as f64 / n))
            .collect()
    }

    /// Writes `rating_distribution.csv`, `user_activity.csv`,
    /// `item_popularity.csv` and `summary.csv` into `dir`.
    pub fn write_tables(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let props = self.rating_proportions();
        let mut rows = vec!["rating,count,proportion".to_string()];
        for (v, c) in &self.ratings {
            rows.push(format!("{v},{c},{}", props[v]));
        }
        write_lines(dir.join("rating_distribution.csv"), &rows)?;

        let hist = |header: &str, h: &BTreeMap<usize, usize>, total: usize| {
            let mut rows = vec![header.to_string()];
            for (k, c) in h {
                rows.push(format!("{k},{c},{}", *c as f64 / total.max(1) as f64));
            }
            rows
        };
        write_lines(
            dir.join("user_activity.csv"),
            &hist("ratings,users,density", &self.user_activity, self.active_users),
        )?;
        write_lines(
            dir.join("item_popularity.csv"),
            &hist("ratings,items,density", &self.item_popularity, self.active_items),
        )?;
        let summary = vec![
            "key,value".to_string(),
            format!("samples,{}", self.samples),
            format!("users,{}", self.num_users),
            format!("items,{}", self.num_items),
            format!("active_users,{}", self.active_users),
            format!("active_items,{}", self.active_items),
            format!("rating_min,{}", self.range.min),
            format!("rating_max,{}", self.range.max),
            format!("sparsity,{}", self.sparsity),
        ];
        write_lines(dir.join("summary.csv"), &summary)
    }
}

pub(crate) fn write_lines(path: impl AsRef<Path>, lines: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut body = lines.join("\n");
    body.push('\n');
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn count_histogram(counts: impl Iterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for c in counts {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

pub fn stats(dataset: &Dataset) -> DistributionReport {
    let mut ratings: BTreeMap<i32, usize> = dataset.range.values().map(|v| (v, 0)).collect();
    let mut per_user: HashMap<u32, usize> = HashMap::new();
    let mut per_item: HashMap<u32, usize> = HashMap::new();
    for t in &dataset.triples {
        *ratings.entry(t.rating).or_insert(0) += 1;
        *per_user.entry(t.user).or_insert(0) += 1;
        *per_item.entry(t.item).or_insert(0) += 1;
    }
    DistributionReport {
        samples: dataset.len(),
        num_users: dataset.num_users,
        num_items: dataset.num_items,
        active_users: per_user.len(),
        active_items: per_item.len(),
        sparsity: dataset.sparsity(),
        range: dataset.range,
        ratings,
        user_activity: count_histogram(per_user.into_values()),
        item_popularity: count_histogram(per_item.into_values()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r15() -> RatingRange {
        RatingRange::new(1, 5).unwrap()
    }

    fn ds(triples: &[(u32, u32, i32)], users: usize, items: usize) -> Dataset {
        Dataset::new(
            triples.iter().map(|&(u, i, r)| RatingTriple::new(u, i, r)).collect(),
            users,
            items,
            r15(),
            "t",
        )
        .unwrap()
    }

    #[test]
    fn dataset_invariants_enforced() {
        assert!(Dataset::new(vec![RatingTriple::new(3, 1, 4)], 2, 2, r15(), "x").is_err());
        assert!(Dataset::new(vec![RatingTriple::new(1, 1, 6)], 2, 2, r15(), "x").is_err());
        assert!(Dataset::new(vec![RatingTriple::new(0, 1, 3)], 2, 2, r15(), "x").is_err());
    }

    #[test]
    fn published_sparsity_values_match_counts() {
        // counts from the three source datasets
        let cases = [
            (943usize, 1682usize, 99_831usize, 93.71),
            (23_012, 1_750, 535_421, 98.68),
            (19_179, 2_692, 548_967, 98.94),
        ];
        for (u, i, n, published) in cases {
            let s = 100.0 * (1.0 - n as f64 / (u * i) as f64);
            assert!((s - published).abs() < 0.01, "{u}x{i}: {s}");
        }
    }

    #[test]
    fn reindex_first_appearance() {
        let d = Dataset::new(
            vec![
                RatingTriple::new(7, 3, 1),
                RatingTriple::new(7, 9, 2),
                RatingTriple::new(42, 3, 3),
            ],
            42,
            9,
            r15(),
            "raw",
        )
        .unwrap();
        let (c, maps) = reindex(&d);
        let users: Vec<u32> = c.triples().iter().map(|t| t.user).collect();
        assert_eq!(users, vec![1, 1, 2]);
        assert_eq!((c.num_users(), c.num_items()), (2, 2));
        assert_eq!(maps.restore(&c).unwrap().triples(), d.triples());
    }

    #[test]
    fn reindex_contiguous_is_identity() {
        let d = ds(&[(1, 1, 5), (2, 2, 4), (2, 1, 3)], 2, 2);
        let (c, maps) = reindex(&d);
        assert_eq!(c, d);
        assert_eq!(maps.users, vec![1, 2]);
    }

    #[test]
    fn split_keeps_singletons_in_train() {
        let d = ds(&[(1, 1, 5), (2, 1, 4), (2, 2, 3), (2, 3, 2)], 2, 3);
        for seed in 0..20 {
            let (train, test) = split(&d, 0.5, &mut Rng::new(seed)).unwrap();
            assert!(train.triples().contains(&RatingTriple::new(1, 1, 5)));
            assert!(train.triples().iter().any(|t| t.user == 2));
            assert_eq!(train.len() + test.len(), 4);
        }
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = ds(&[(1, 1, 5)], 1, 1);
        assert!(split(&d, 0.0, &mut Rng::new(0)).is_err());
        assert!(split(&d, 1.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn stats_single_triple() {
        let d = ds(&[(1, 1, 5)], 1, 1);
        let s = stats(&d);
        assert_eq!(s.ratings[&5], 1);
        assert_eq!(s.ratings.values().sum::<usize>(), 1);
        assert_eq!(s.user_activity, BTreeMap::from([(1, 1)]));
    }

    #[test]
    fn full_matrix_has_zero_sparsity() {
        let mut t = Vec::new();
        for u in 1..=4 {
            for i in 1..=3 {
                t.push((u, i, 3));
            }
        }
        assert_eq!(ds(&t, 4, 3).sparsity(), 0.0);
    }

    #[test]
    fn format_names_parse() {
        let f: FormatSpec = "csv:1..10".parse().unwrap();
        assert_eq!(f.range, Some(RatingRange { min: 1, max: 10 }));
        assert_eq!("movielens".parse::<FormatSpec>().unwrap(), FormatSpec::movielens());
        assert!("xml".parse::<FormatSpec>().is_err());
    }
}
