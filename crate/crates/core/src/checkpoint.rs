//! Binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field          | type                                            |
//! |----------------|-------------------------------------------------|
//! | magic          | `b"ACOSOCKP"`                                   |
//! | version        | u32 (currently 1)                               |
//! | payload length | u64                                             |
//! | config         | max_len u32, dim u32, n_widths u32, widths u32×n, filters u32, learning_rate f64, fine_tune u8, seed u64 |
//! | embedding      | rows u64, coverage f64, rows×dim f64            |
//! | conv banks     | per width: weights f64×(filters·width·dim), bias f64×filters |
//! | dense          | weights f64×(n_widths·filters), bias f64        |
//! | metrics        | iteration u32, epoch u32, accuracy f64, loss f64 |
//! | checksum       | CRC-32 (IEEE) of every preceding byte, u32      |

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::embeddings::EmbeddingMatrix;
use crate::eval::Checkpoint;
use crate::model::{ConvBank, ModelConfig, ModelParams};

pub const MAGIC: &[u8; 8] = b"ACOSOCKP";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
}

pub fn encode(cp: &Checkpoint) -> Vec<u8> {
    let p = &cp.params;
    let cfg = &p.config;
    let mut w = Writer(Vec::new());
    w.u32(cfg.max_len);
    w.u32(cfg.dim);
    w.u32(cfg.filter_widths.len());
    for &width in &cfg.filter_widths {
        w.u32(width);
    }
    w.u32(cfg.filters_per_width);
    w.f64(cfg.learning_rate);
    w.u8(u8::from(cfg.fine_tune_embeddings));
    w.u64(cfg.seed);

    w.u64(p.embedding.rows() as u64);
    w.f64(p.embedding.coverage());
    w.f64s(p.embedding.as_slice());
    for bank in &p.conv {
        w.f64s(&bank.weights);
        w.f64s(&bank.bias);
    }
    w.f64s(&p.dense_weights);
    w.f64(p.dense_bias);

    w.u32(cp.iteration);
    w.u32(cp.epoch);
    w.f64(cp.train_accuracy);
    w.f64(cp.train_loss);
    let payload = w.0;

    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(malformed("field runs past end of payload"));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| malformed("length overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn malformed(msg: &str) -> CheckpointError {
    CheckpointError::Malformed(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < HEADER_LEN {
        if !MAGIC.starts_with(&bytes[..bytes.len().min(8)]) {
            return Err(CheckpointError::BadMagic);
        }
        return Err(CheckpointError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let payload_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = usize::try_from(payload_len)
        .ok()
        .and_then(|n| n.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| malformed("payload length overflow"))?;
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(malformed("trailing bytes after checksum"));
    }
    let body_end = expected - 4;
    let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(CheckpointError::Checksum { stored, computed });
    }

    let mut r = Reader {
        buf: &bytes[HEADER_LEN..body_end],
        pos: 0,
    };
    let max_len = r.u32()?;
    let dim = r.u32()?;
    let n_widths = r.u32()?;
    if n_widths > r.buf.len() / 4 {
        return Err(malformed("implausible number of filter widths"));
    }
    let filter_widths = (0..n_widths).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let filters_per_width = r.u32()?;
    let learning_rate = r.f64()?;
    let fine_tune_embeddings = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(malformed("fine-tune flag must be 0 or 1")),
    };
    let seed = r.u64()?;
    let config = ModelConfig {
        max_len,
        dim,
        filter_widths,
        filters_per_width,
        learning_rate,
        fine_tune_embeddings,
        seed,
    };
    config
        .validate()
        .map_err(|e| CheckpointError::Malformed(alloc::format!("{e}")))?;

    let rows = usize::try_from(r.u64()?).map_err(|_| malformed("row count overflow"))?;
    if rows < 2 {
        return Err(malformed("embedding needs at least padding and OOV rows"));
    }
    let coverage = r.f64()?;
    let data = r.f64s(rows.checked_mul(dim).ok_or_else(|| malformed("matrix size overflow"))?)?;
    if data[..dim].iter().any(|&x| x != 0.0) {
        return Err(malformed("padding row is not zero"));
    }
    let embedding = Arc::new(EmbeddingMatrix::from_rows(rows, dim, data, coverage));

    let mut conv = Vec::with_capacity(config.filter_widths.len());
    for &width in &config.filter_widths {
        let weights = r.f64s(filters_per_width * width * dim)?;
        let bias = r.f64s(filters_per_width)?;
        conv.push(ConvBank { width, weights, bias });
    }
    let dense_weights = r.f64s(config.n_features())?;
    let dense_bias = r.f64()?;

    let iteration = r.u32()?;
    let epoch = r.u32()?;
    let train_accuracy = r.f64()?;
    let train_loss = r.f64()?;
    if r.pos != r.buf.len() {
        return Err(malformed("unexpected bytes after metrics"));
    }

    Ok(Checkpoint {
        iteration,
        epoch,
        params: ModelParams {
            config,
            embedding,
            conv,
            dense_weights,
            dense_bias,
        },
        train_accuracy,
        train_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample() -> Checkpoint {
        let data = (0..5 * 3).map(|i| if i < 3 { 0.0 } else { i as f64 * 0.37 - 2.0 }).collect();
        let emb = Arc::new(EmbeddingMatrix::from_rows(5, 3, data, 0.75));
        let cfg = ModelConfig {
            max_len: 4,
            dim: 3,
            filter_widths: vec![1, 3],
            filters_per_width: 2,
            learning_rate: 0.25,
            fine_tune_embeddings: true,
            seed: u64::MAX - 3,
        };
        let mut params = ModelParams::init(cfg, emb).unwrap();
        params.dense_bias = -0.125;
        params.conv[1].bias[1] = 1e-300;
        Checkpoint {
            iteration: 3,
            epoch: 7,
            params,
            train_accuracy: 0.998,
            train_loss: 0.005,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let cp = sample();
        let bytes = encode(&cp);
        assert_eq!(decode(&bytes).unwrap(), cp);
        assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
    }

    #[test]
    fn every_single_byte_corruption_is_rejected() {
        let bytes = encode(&sample());
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(decode(&bad).is_err(), "byte {i} accepted");
        }
        let mut bad = bytes.clone();
        bad[HEADER_LEN + 10] ^= 1;
        assert!(matches!(decode(&bad), Err(CheckpointError::Checksum { .. })));
    }

    #[test]
    fn truncation_version_and_magic() {
        let bytes = encode(&sample());
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated { .. })));
        assert!(matches!(decode(&bytes[..10]), Err(CheckpointError::Truncated { .. })));
        assert_eq!(decode(b"hello world, not a checkpoint"), Err(CheckpointError::BadMagic));

        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert_eq!(decode(&v2), Err(CheckpointError::UnsupportedVersion(2)));
    }
}
