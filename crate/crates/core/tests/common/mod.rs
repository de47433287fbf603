#![allow(dead_code)]

pub mod fd;
pub mod oracle;

use std::path::PathBuf;

/// MovieLens 100K `u.data`, from `SYNTHREC_ML100K` or `<workspace>/data/ml-100k/u.data`.
pub fn movielens_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("SYNTHREC_ML100K") {
        let p = PathBuf::from(p);
        return p.exists().then_some(p);
    }
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data");
    p.exists().then_some(p)
}
