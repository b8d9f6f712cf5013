//! Binary checkpoint container.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic      8 bytes  "MLFGCKPT"
//! version    u32      1
//! config     u64 length + UTF-8 key=value text
//! digest     32 bytes SHA-256 of the config bytes
//! metadata   u64 length + UTF-8 text (not covered by the digest)
//! count      u64 number of tensors
//! tensor     u32 name length, name, u32 rank, rank x u64 dims, f64 values
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"MLFGCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("checkpoint text section is not UTF-8")]
    Utf8,
    #[error("config digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },
    #[error("parameter '{0}' missing from checkpoint")]
    MissingParam(String),
    #[error("checkpoint has unknown parameter '{0}'")]
    UnexpectedParam(String),
    #[error("parameter '{name}' has shape {found:?}, model expects {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

pub fn config_digest(config: &str) -> String {
    hex::encode(Sha256::digest(config.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub metadata: String,
    pub tensors: Vec<(String, Tensor)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, CheckpointError> {
        usize::try_from(self.u64()?).map_err(|_| CheckpointError::Truncated(self.pos))
    }

    fn text(&mut self, n: usize) -> Result<String, CheckpointError> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Utf8)
    }
}

impl Checkpoint {
    pub fn from_store(config: &str, metadata: &str, store: &ParamStore) -> Self {
        Checkpoint {
            config: config.to_string(),
            metadata: metadata.to_string(),
            tensors: store.iter().map(|(_, p)| (p.name.clone(), p.value().clone())).collect(),
        }
    }

    pub fn digest(&self) -> String {
        config_digest(&self.config)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&Sha256::digest(self.config.as_bytes()));
        out.extend_from_slice(&(self.metadata.len() as u64).to_le_bytes());
        out.extend_from_slice(self.metadata.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint. The stored digest must match the embedded
    /// config, and `expected_digest` (if given) must match both, unless
    /// `force` is set.
    pub fn from_bytes(bytes: &[u8], expected_digest: Option<&str>, force: bool) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let n = r.len()?;
        let config = r.text(n)?;
        let stored = hex::encode(r.take(32)?);
        let actual = config_digest(&config);
        if !force {
            if stored != actual {
                return Err(CheckpointError::DigestMismatch {
                    expected: stored,
                    found: actual,
                });
            }
            if let Some(expected) = expected_digest {
                if expected != stored {
                    return Err(CheckpointError::DigestMismatch {
                        expected: expected.to_string(),
                        found: stored,
                    });
                }
            }
        }
        let n = r.len()?;
        let metadata = r.text(n)?;
        let count = r.len()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let n = r.u32()? as usize;
            let name = r.text(n)?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.len()?);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or(CheckpointError::Truncated(r.pos))?;
            let raw = r.take(len.checked_mul(8).ok_or(CheckpointError::Truncated(r.pos))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let t = Tensor::new(shape, data).map_err(|_| CheckpointError::Truncated(r.pos))?;
            tensors.push((name, t));
        }
        Ok(Checkpoint {
            config,
            metadata,
            tensors,
        })
    }

    /// Writes to a temporary sibling file, then renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("ckpt.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_digest: Option<&str>, force: bool) -> Result<Self, CheckpointError> {
        Self::from_bytes(&fs::read(path)?, expected_digest, force)
    }

    /// Copies tensors into a store whose names and shapes match exactly.
    pub fn apply_to(&self, store: &mut ParamStore) -> Result<(), CheckpointError> {
        for (name, _) in &self.tensors {
            if store.id(name).is_none() {
                return Err(CheckpointError::UnexpectedParam(name.clone()));
            }
        }
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.name(id).to_string();
            let (_, t) = self
                .tensors
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| CheckpointError::MissingParam(name.clone()))?;
            if t.shape() != store.value(id).shape() {
                return Err(CheckpointError::ShapeMismatch {
                    name,
                    expected: store.value(id).shape().to_vec(),
                    found: t.shape().to_vec(),
                });
            }
            store.set_value(id, t.clone()).expect("shape checked");
        }
        Ok(())
    }
}
