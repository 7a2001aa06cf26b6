//! EMB1 feature containers and feature fusion.
//!
//! EMB1 is the interchange format for externally computed network
//! embeddings (SoundNet conv5, VGGish) and for features written by the
//! extraction stage. Layout, all integers little-endian:
//!
//! ```text
//! magic  "EMB1"          4 bytes
//! kind   u8              1 = soundnet, 2 = vggish, 3 = mfcc, 4 = cqcc, 5 = fused
//! dim    u32
//! count  u32
//! count records:
//!   key_len u16
//!   key     key_len bytes of UTF-8
//!   values  dim x f32
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::dsp::{FeatureKind, FeatureVector};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 13;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic, not an EMB1 file")]
    BadMagic,
    #[error("unknown kind byte {0}")]
    UnknownKind(u8),
    #[error("{kind} embeddings must have dimension {expected}, header says {actual}")]
    DimMismatch { kind: FeatureKind, expected: usize, actual: usize },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("truncated file: {0}")]
    Truncated(&'static str),
    #[error("key is not valid UTF-8")]
    BadKey,
    #[error("record {key:?} holds a non-finite value")]
    NonFinite { key: String },
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("cannot fuse vectors of different segments: {0:?} vs {1:?}")]
    KeyMismatch(String, String),
    #[error("nothing to fuse")]
    EmptyFusion,
    #[error("key longer than 65535 bytes")]
    KeyTooLong,
    #[error("vector for {key:?} has dimension {actual}, store dimension is {expected}")]
    WrongDim { key: String, expected: usize, actual: usize },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

/// Vectors of one kind, keyed by segment key, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    kind: FeatureKind,
    dim: usize,
    keys: Vec<String>,
    values: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(kind: FeatureKind, dim: usize) -> Result<Self, StoreError> {
        if let Some(expected) = kind.fixed_dim() {
            if dim != expected {
                return Err(StoreError::DimMismatch { kind, expected, actual: dim });
            }
        }
        Ok(Self { kind, dim, keys: Vec::new(), values: Vec::new(), index: HashMap::new() })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Stores `values` as f32, which is what the file holds.
    pub fn insert(&mut self, key: impl Into<String>, values: &[f64]) -> Result<(), StoreError> {
        let key = key.into();
        if values.len() != self.dim {
            return Err(StoreError::WrongDim { key, expected: self.dim, actual: values.len() });
        }
        self.insert_f32(key, values.iter().map(|&v| v as f32).collect())
    }

    fn insert_f32(&mut self, key: String, values: Vec<f32>) -> Result<(), StoreError> {
        if key.len() > usize::from(u16::MAX) {
            return Err(StoreError::KeyTooLong);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite { key });
        }
        if self.index.contains_key(&key) {
            return Err(StoreError::DuplicateKey(key));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.values.push(values);
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&[f32]> {
        self.index.get(key).map(|&i| self.values[i].as_slice())
    }

    pub fn lookup(&self, key: &str) -> Result<FeatureVector, StoreError> {
        let raw = self.raw(key).ok_or_else(|| StoreError::MissingKey(key.to_string()))?;
        let values = raw.iter().map(|&v| f64::from(v)).collect();
        Ok(FeatureVector::new(self.kind, values).expect("store holds finite, dim-checked vectors"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (self.dim * 4 + 24));
        out.extend_from_slice(MAGIC);
        out.push(self.kind.code());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (key, values) in self.keys.iter().zip(&self.values) {
            out.extend_from_slice(&(key.len() as u16).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(StoreError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(StoreError::Truncated("header"));
        }
        let kind = FeatureKind::from_code(bytes[4]).ok_or(StoreError::UnknownKind(bytes[4]))?;
        let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let mut store = Self::new(kind, dim)?;

        let mut pos = HEADER_LEN;
        let mut take = |n: usize, what: &'static str| -> Result<&[u8], StoreError> {
            let slice = bytes.get(pos..pos + n).ok_or(StoreError::Truncated(what))?;
            pos += n;
            Ok(slice)
        };
        for _ in 0..count {
            let key_len = u16::from_le_bytes(take(2, "key length")?.try_into().unwrap()) as usize;
            let key = std::str::from_utf8(take(key_len, "key")?).map_err(|_| StoreError::BadKey)?.to_string();
            let values = take(dim * 4, "values")?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            store.insert_f32(key, values)?;
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Writes through a temporary sibling and renames, so readers never see
    /// a partial file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let tmp = path.with_extension("emb1.tmp");
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        Ok(result?)
    }
}

/// One segment's vector from one extractor, as handed to [`fuse`].
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedVector {
    pub key: String,
    pub vector: FeatureVector,
}

/// Concatenates parts in the order given. All parts must come from the
/// same segment. A single part comes back unchanged but tagged fused.
pub fn fuse(parts: &[KeyedVector]) -> Result<FeatureVector, StoreError> {
    let first = parts.first().ok_or(StoreError::EmptyFusion)?;
    if let Some(other) = parts.iter().find(|p| p.key != first.key) {
        return Err(StoreError::KeyMismatch(first.key.clone(), other.key.clone()));
    }
    let values: Vec<f64> = parts.iter().flat_map(|p| p.vector.values().iter().copied()).collect();
    Ok(FeatureVector::new(FeatureKind::Fused, values).expect("parts are finite"))
}

/// Sorts stores into the fixed fusion order: vggish, soundnet, cqcc, mfcc.
pub fn sort_for_fusion(stores: &mut [EmbeddingStore]) {
    stores.sort_by_key(|s| s.kind().fusion_rank());
}

/// Looks `key` up in every store and concatenates in store order.
pub fn fused_lookup(stores: &[EmbeddingStore], key: &str) -> Result<FeatureVector, StoreError> {
    if stores.len() == 1 {
        return stores[0].lookup(key);
    }
    let parts = stores
        .iter()
        .map(|s| Ok(KeyedVector { key: key.to_string(), vector: s.lookup(key)? }))
        .collect::<Result<Vec<_>, StoreError>>()?;
    fuse(&parts)
}

/// Total input dimension of a fused lookup.
pub fn fused_dim(stores: &[EmbeddingStore]) -> usize {
    stores.iter().map(EmbeddingStore::dim).sum()
}

/// Collapses a single vector into the fused kind.
pub fn as_fused(v: FeatureVector) -> FeatureVector {
    v.retag(FeatureKind::Fused)
}
