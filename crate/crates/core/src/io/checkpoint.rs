//! Binary embedding checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic     8 bytes  "HGPRTRN\0"
//! version   u8
//! dim       u32
//! users     u64
//! items     u64
//! seed      u64
//! config    32 bytes  SHA-256 of the training config
//! body      (users + items) * dim f64, user rows then item rows
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;
use crate::model::EmbeddingTable;
use crate::pipeline::config::TrainConfig;

pub const MAGIC: [u8; 8] = *b"HGPRTRN\0";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 8 + 1 + 4 + 8 + 8 + 8 + 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub format_version: u8,
    pub seed: u64,
    pub config_fingerprint: [u8; 32],
    pub table: EmbeddingTable,
}

impl Checkpoint {
    pub fn new(table: EmbeddingTable, config: &TrainConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed: config.seed,
            config_fingerprint: config.fingerprint(),
            table,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let t = &self.table;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (t.user_emb.as_slice().len() + t.item_emb.as_slice().len()));
        out.extend_from_slice(&MAGIC);
        out.push(self.format_version);
        out.extend_from_slice(&(t.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(t.num_users() as u64).to_le_bytes());
        out.extend_from_slice(&(t.num_items() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.config_fingerprint);
        for x in t.user_emb.as_slice().iter().chain(t.item_emb.as_slice()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 1 {
            return Err(Error::CheckpointFormat(format!("file too short ({} bytes)", bytes.len())));
        }
        if bytes[..8] != MAGIC {
            return Err(Error::CheckpointFormat("bad magic bytes".into()));
        }
        let version = bytes[8];
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::CheckpointHeader(format!(
                "header truncated: {} of {HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let dim = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
        let users = u64_at(13);
        let items = u64_at(21);
        let seed = u64_at(29);
        let config_fingerprint: [u8; 32] = bytes[37..69].try_into().expect("32 bytes");
        if dim == 0 {
            return Err(Error::CheckpointHeader("dimension is zero".into()));
        }
        let body_len = users
            .checked_add(items)
            .and_then(|rows| rows.checked_mul(dim as u64))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| Error::CheckpointHeader(format!("implausible shape {users}+{items} x {dim}")))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != body_len {
            return Err(Error::CheckpointBody {
                expected: body_len,
                actual: body.len(),
            });
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let split = users as usize * dim;
        let table = EmbeddingTable {
            user_emb: EmbeddingMatrix::from_vec(users as usize, dim, values[..split].to_vec())?,
            item_emb: EmbeddingMatrix::from_vec(items as usize, dim, values[split..].to_vec())?,
        };
        Ok(Self {
            format_version: version,
            seed,
            config_fingerprint,
            table,
        })
    }
}

pub fn save_checkpoint(table: &EmbeddingTable, config: &TrainConfig, path: &Path) -> Result<()> {
    let bytes = Checkpoint::new(table.clone(), config).to_bytes();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut table = EmbeddingTable::init(3, 4, 5, 1).unwrap();
        table.user_emb.set(0, 0, -0.0);
        table.item_emb.set(1, 2, f64::MIN_POSITIVE / 3.0);
        Checkpoint::new(table, &TrainConfig { seed: 77, ..Default::default() })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back.seed, 77);
        assert_eq!(back.config_fingerprint, ck.config_fingerprint);
        let bits = |t: &EmbeddingTable| -> Vec<u64> {
            t.user_emb.as_slice().iter().chain(t.item_emb.as_slice()).map(|x| x.to_bits()).collect()
        };
        assert_eq!(bits(&back.table), bits(&ck.table));
    }

    #[test]
    fn truncated_body() {
        let bytes = sample().to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::CheckpointBody { .. })
        ));
    }

    #[test]
    fn distinct_header_errors() {
        let mut bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..20]), Err(Error::CheckpointHeader(_))));
        bytes[8] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::CheckpointVersion { found: 9, expected: 1 })
        ));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::CheckpointFormat(_))));
        assert!(matches!(Checkpoint::from_bytes(b"HG"), Err(Error::CheckpointFormat(_))));
    }
}
