//! Embedding providers and exact cosine top-k search.
//!
//! Nothing here runs a neural model. Real embeddings are computed offline
//! and loaded through [`FileBackedProvider`], keyed by the SHA-256 of the
//! truncated text. [`HashedBagOfWords`] is a deterministic stand-in used by
//! tests and lexical-only experiments.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ranked::{RankedList, ScoredDoc};
use crate::tokenize::tokenize;

/// Maximum number of characters (Unicode scalar values) fed to an encoder.
pub const EMBED_CHAR_LIMIT: usize = 2000;

pub const DEFAULT_HASHED_DIMENSION: usize = 256;

pub fn truncate_for_embedding(text: &str) -> &str {
    match text.char_indices().nth(EMBED_CHAR_LIMIT) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

pub type ContentDigest = [u8; 32];

pub fn content_digest(text: &str) -> ContentDigest {
    Sha256::digest(text.as_bytes()).into()
}

pub fn digest_hex(d: &ContentDigest) -> String {
    hex::encode(d)
}

pub fn parse_digest(s: &str) -> Result<ContentDigest> {
    let raw =
        hex::decode(s).map_err(|e| Error::InvalidArgument(format!("bad digest `{s}`: {e}")))?;
    raw.try_into()
        .map_err(|_| Error::InvalidArgument(format!("digest `{s}` is not 32 bytes")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub name: String,
    pub dimension: usize,
    pub deterministic: bool,
}

pub trait EmbeddingProvider: Send + Sync {
    fn spec(&self) -> ProviderSpec;

    /// Encodes text that has already been truncated.
    fn encode(&self, text: &str) -> Result<Vec<f32>>;

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        let v = self.encode(truncate_for_embedding(text))?;
        let dim = self.spec().dimension;
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        Ok(v)
    }
}

/// Each token is hashed (64-bit FNV-1a over its UTF-8 bytes) into one of
/// `dimension` buckets; bucket counts are L2-normalised.
#[derive(Debug, Clone)]
pub struct HashedBagOfWords {
    dimension: usize,
}

pub const HASHED_PROVIDER_NAME: &str = "hashed-bow";

impl HashedBagOfWords {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be >= 1".into(),
            ));
        }
        Ok(Self { dimension })
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_HASHED_DIMENSION,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashedBagOfWords {
    fn spec(&self) -> ProviderSpec {
        ProviderSpec {
            name: HASHED_PROVIDER_NAME.into(),
            dimension: self.dimension,
            deterministic: true,
        }
    }

    fn encode(&self, text: &str) -> Result<Vec<f32>> {
        let mut counts = vec![0f64; self.dimension];
        for tok in tokenize(text) {
            counts[self.bucket(&tok)] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            counts.iter_mut().for_each(|c| *c /= norm);
        }
        Ok(counts.into_iter().map(|c| c as f32).collect())
    }
}

const SIDECAR_MAGIC: &[u8; 8] = b"MREMBED1";

/// Digest-keyed vectors produced outside this process.
///
/// Binary layout (little-endian):
///
/// ```text
/// magic      8 bytes  "MREMBED1"
/// dimension  u32
/// count      u64
/// count x { digest: 32 raw bytes (SHA-256 of the truncated UTF-8 text),
///           vector: dimension x f32 }
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingSidecar {
    dimension: usize,
    vectors: HashMap<ContentDigest, Vec<f32>>,
}

impl EmbeddingSidecar {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, digest: ContentDigest, vector: Vec<f32>) -> Result<()> {
        check_vector(&vector, self.dimension)?;
        self.vectors.insert(digest, vector);
        Ok(())
    }

    pub fn get(&self, digest: &ContentDigest) -> Option<&[f32]> {
        self.vectors.get(digest).map(Vec::as_slice)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut keys: Vec<_> = self.vectors.keys().collect();
        keys.sort();
        let mut out = Vec::with_capacity(20 + keys.len() * (32 + 4 * self.dimension));
        out.extend_from_slice(SIDECAR_MAGIC);
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
        for k in keys {
            out.extend_from_slice(k);
            for x in &self.vectors[k] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, data: &[u8]) -> Result<Self> {
        if data.len() < 20 || &data[..8] != SIDECAR_MAGIC {
            return Err(Error::corrupt(path, "not an embeddings sidecar"));
        }
        let dimension = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(data[12..20].try_into().unwrap());
        if dimension == 0 {
            return Err(Error::corrupt(path, "zero dimension"));
        }
        let record = 32 + 4 * dimension;
        let body = &data[20..];
        if count.checked_mul(record as u64) != Some(body.len() as u64) {
            return Err(Error::corrupt(
                path,
                "record count does not match file size",
            ));
        }
        let mut sidecar = Self::new(dimension);
        for rec in body.chunks_exact(record) {
            let digest: ContentDigest = rec[..32].try_into().unwrap();
            let vector = rec[32..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            sidecar
                .insert(digest, vector)
                .map_err(|e| Error::corrupt(path, e.to_string()))?;
        }
        Ok(sidecar)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Serves precomputed vectors; unknown text is an error, never a zero vector.
#[derive(Debug, Clone)]
pub struct FileBackedProvider {
    name: String,
    sidecar: Arc<EmbeddingSidecar>,
}

impl FileBackedProvider {
    pub fn new(name: impl Into<String>, sidecar: Arc<EmbeddingSidecar>) -> Self {
        Self {
            name: name.into(),
            sidecar,
        }
    }

    pub fn open(name: impl Into<String>, path: &Path) -> Result<Self> {
        Ok(Self::new(name, Arc::new(EmbeddingSidecar::load(path)?)))
    }
}

impl EmbeddingProvider for FileBackedProvider {
    fn spec(&self) -> ProviderSpec {
        ProviderSpec {
            name: self.name.clone(),
            dimension: self.sidecar.dimension(),
            deterministic: true,
        }
    }

    fn encode(&self, text: &str) -> Result<Vec<f32>> {
        let digest = content_digest(text);
        self.sidecar
            .get(&digest)
            .map(<[f32]>::to_vec)
            .ok_or_else(|| Error::MissingEmbedding(digest_hex(&digest)))
    }
}

fn check_vector(v: &[f32], dimension: usize) -> Result<()> {
    if v.len() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            actual: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "embedding has non-finite entries".into(),
        ));
    }
    Ok(())
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Cosine similarity in f64; zero-norm inputs give 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
    vectors: Vec<Vec<f32>>,
    norms: Vec<f64>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            ids: Vec::new(),
            lookup: HashMap::new(),
            vectors: Vec::new(),
            norms: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.lookup.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn add(&mut self, id: &str, vector: Vec<f32>) -> Result<()> {
        check_vector(&vector, self.dimension)?;
        if self.lookup.contains_key(id) {
            return Err(Error::DuplicateDoc(id.to_owned()));
        }
        self.lookup.insert(id.to_owned(), self.ids.len());
        self.norms.push(norm(&vector));
        self.ids.push(id.to_owned());
        self.vectors.push(vector);
        Ok(())
    }

    /// Exact top-k by cosine similarity over every entry.
    pub fn search(&self, query: &[f32], k: usize) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if query.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: query.len(),
            });
        }
        let qn = norm(query);
        let hits = self
            .ids
            .iter()
            .zip(&self.vectors)
            .zip(&self.norms)
            .map(|((id, v), &vn)| ScoredDoc {
                id: id.clone(),
                score: if qn == 0.0 || vn == 0.0 {
                    0.0
                } else {
                    dot(query, v) / (qn * vn)
                },
            })
            .collect();
        Ok(RankedList::from_unsorted("cosine", hits, k))
    }
}
