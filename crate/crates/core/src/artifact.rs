//! Versioned binary containers for checkpoints and intermediate sample files.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` payload length, payload,
//! SHA-256 of the payload. All integers and floats are little endian; floats
//! are stored as raw IEEE-754 bits so every value round-trips exactly.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Dense, Dropout, Layer, LeakyRelu, Sequential, Sigmoid, Tensor2};

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn tensor(&mut self, t: &Tensor2) {
        self.u64(t.rows() as u64);
        self.u64(t.cols() as u64);
        self.f64s(t.data());
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    path: &'a Path,
    buf: Vec<u8>,
    pos: usize,
}

impl ByteReader<'_> {
    fn corrupt(&self, message: impl Into<String>) -> Error {
        Error::Integrity {
            path: self.path.to_path_buf(),
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.corrupt("payload truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.corrupt("length overflows usize"))
    }

    pub fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n.checked_mul(8).is_none_or(|b| b > self.buf.len() - self.pos) {
            return Err(self.corrupt("vector length exceeds payload"));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        let bytes = self.take(n)?.to_vec();
        String::from_utf8(bytes).map_err(|_| self.corrupt("invalid utf-8 string"))
    }

    pub fn tensor(&mut self) -> Result<Tensor2> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let data = self.f64s()?;
        Tensor2::from_vec(rows, cols, data).map_err(|e| self.corrupt(e.to_string()))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.corrupt("trailing bytes after payload"));
        }
        Ok(())
    }
}

pub fn write_container(path: &Path, magic: &[u8; 8], version: u32, payload: ByteWriter) -> Result<()> {
    let payload = payload.into_bytes();
    let mut out = Vec::with_capacity(payload.len() + 52);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_container<'a>(path: &'a Path, magic: &[u8; 8], version: u32) -> Result<ByteReader<'a>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |m: &str| Error::Integrity {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    if bytes.len() < 20 + 32 {
        return Err(corrupt("file too short"));
    }
    if &bytes[..8] != magic {
        return Err(corrupt("wrong file type"));
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if found != version {
        return Err(corrupt(&format!("unsupported version {found}, expected {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 20 + len + 32 {
        return Err(corrupt("length field does not match file size"));
    }
    let payload = &bytes[20..20 + len];
    if Sha256::digest(payload).as_slice() != &bytes[20 + len..] {
        return Err(corrupt("checksum mismatch"));
    }
    Ok(ByteReader {
        path,
        buf: payload.to_vec(),
        pos: 0,
    })
}

const LAYER_DENSE: u8 = 1;
const LAYER_LEAKY: u8 = 2;
const LAYER_BATCHNORM: u8 = 3;
const LAYER_DROPOUT: u8 = 4;
const LAYER_SIGMOID: u8 = 5;

pub fn put_sequential(w: &mut ByteWriter, net: &Sequential) {
    w.u64(net.layers().len() as u64);
    for layer in net.layers() {
        match layer {
            Layer::Dense(d) => {
                w.u8(LAYER_DENSE);
                w.tensor(&d.weights);
                w.f64s(&d.bias);
            }
            Layer::LeakyRelu(l) => {
                w.u8(LAYER_LEAKY);
                w.f64(l.alpha);
            }
            Layer::BatchNorm(b) => {
                w.u8(LAYER_BATCHNORM);
                w.f64(b.momentum);
                w.f64(b.epsilon);
                w.f64s(&b.gamma);
                w.f64s(&b.beta);
                w.f64s(&b.running_mean);
                w.f64s(&b.running_var);
            }
            Layer::Dropout(d) => {
                w.u8(LAYER_DROPOUT);
                w.f64(d.rate);
            }
            Layer::Sigmoid(_) => w.u8(LAYER_SIGMOID),
        }
    }
}

pub fn get_sequential(r: &mut ByteReader<'_>) -> Result<Sequential> {
    let n = r.usize()?;
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let layer = match r.u8()? {
            LAYER_DENSE => {
                let weights = r.tensor()?;
                let bias = r.f64s()?;
                Layer::Dense(Dense::new(weights, bias).map_err(|e| r.corrupt(e.to_string()))?)
            }
            LAYER_LEAKY => Layer::LeakyRelu(LeakyRelu::new(r.f64()?)),
            LAYER_BATCHNORM => {
                let momentum = r.f64()?;
                let epsilon = r.f64()?;
                let gamma = r.f64s()?;
                let beta = r.f64s()?;
                let mean = r.f64s()?;
                let var = r.f64s()?;
                let dim = gamma.len();
                if beta.len() != dim || mean.len() != dim || var.len() != dim {
                    return Err(r.corrupt("batchnorm vectors disagree in length"));
                }
                let mut bn = BatchNorm::new(dim, momentum, epsilon)
                    .and_then(|b| b.with_affine(gamma, beta))
                    .map_err(|e| r.corrupt(e.to_string()))?;
                bn.running_mean = mean;
                bn.running_var = var;
                Layer::BatchNorm(bn)
            }
            LAYER_DROPOUT => {
                Layer::Dropout(Dropout::new(r.f64()?).map_err(|e| r.corrupt(e.to_string()))?)
            }
            LAYER_SIGMOID => Layer::Sigmoid(Sigmoid::default()),
            other => return Err(r.corrupt(format!("unknown layer tag {other}"))),
        };
        layers.push(layer);
    }
    Ok(Sequential::new(layers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let mut w = ByteWriter::new();
        w.f64s(&[1.5, -0.0, f64::MIN_POSITIVE, 1e300]);
        w.str("hello");
        write_container(&path, b"TESTTEST", 3, w).unwrap();

        let mut r = read_container(&path, b"TESTTEST", 3).unwrap();
        let v = r.f64s().unwrap();
        assert_eq!(v[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(v[3], 1e300);
        assert_eq!(r.str().unwrap(), "hello");
        r.finish().unwrap();

        assert!(matches!(
            read_container(&path, b"TESTTEST", 4),
            Err(Error::Integrity { .. })
        ));
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[25] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_container(&path, b"TESTTEST", 3),
            Err(Error::Integrity { .. })
        ));
    }
}
