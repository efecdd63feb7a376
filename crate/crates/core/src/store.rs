//! Per-haystack stores: raw and enriched lexical indices, a vector index
//! over raw content, and a manifest.
//!
//! Directory layout:
//!
//! ```text
//! manifest.json    StoreManifest, including a SHA-256 for every file below
//! raw.lex          lexical index over raw content        (framed, "MRLEXIDX")
//! enriched.lex     lexical index over raw + enrichment   (framed, "MRLEXIDX")
//! vectors.idx      session id -> content digest          (framed, "MRVECIDX")
//! embeddings.bin   content digest -> vector              (sidecar, "MREMBED1")
//! ```
//!
//! The vector files are absent for lexical-only stores. Framing is
//! described in `codec`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::Session;
use crate::codec::{len_u32, Decoder, Encoder};
use crate::enrich::{enrich, Vocabulary};
use crate::error::{Error, Result};
use crate::lexical::LexicalIndex;
use crate::vector::{
    content_digest, digest_hex, truncate_for_embedding, ContentDigest, EmbeddingProvider,
    EmbeddingSidecar, HashedBagOfWords, ProviderSpec, VectorIndex, HASHED_PROVIDER_NAME,
};

pub const STORE_FORMAT_VERSION: u32 = 1;
const VECTOR_MAGIC: &[u8; 8] = b"MRVECIDX";

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RAW_INDEX_FILE: &str = "raw.lex";
pub const ENRICHED_INDEX_FILE: &str = "enriched.lex";
pub const VECTOR_INDEX_FILE: &str = "vectors.idx";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";

/// One stored session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryRecord {
    pub session_id: String,
    pub timestamp: Option<String>,
    pub raw_content: String,
    /// Appended to the enriched lexical index only.
    pub enrichment: String,
    /// SHA-256 of `raw_content`, hex.
    pub digest: String,
}

impl MemoryRecord {
    pub fn new(session: &Session, vocab: &Vocabulary) -> Self {
        let raw_content = session.content();
        Self {
            session_id: session.id.clone(),
            timestamp: session.date.clone(),
            enrichment: enrich(&raw_content, vocab),
            digest: digest_hex(&content_digest(&raw_content)),
            raw_content,
        }
    }

    fn lexical_text(&self, include_dates: bool) -> String {
        match (&self.timestamp, include_dates) {
            (Some(ts), true) => format!("date: {ts}\n{}", self.raw_content),
            _ => self.raw_content.clone(),
        }
    }

    fn enriched_text(&self, include_dates: bool) -> String {
        let base = self.lexical_text(include_dates);
        if self.enrichment.is_empty() {
            base
        } else {
            format!("{base}\n{}", self.enrichment)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Prefix each session's lexical text with a `date: <timestamp>` line.
    pub include_dates: bool,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            include_dates: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreCounts {
    pub sessions: usize,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    pub vocabulary_version: String,
    pub vocabulary_digest: String,
    /// `None` for lexical-only stores.
    pub provider: Option<ProviderSpec>,
    pub counts: StoreCounts,
    pub include_dates: bool,
    pub seed: u64,
    pub build_timestamp: u64,
    /// File name -> SHA-256 hex.
    pub files: BTreeMap<String, String>,
}

/// Order-independent digest of a vocabulary's rules.
pub fn vocabulary_digest(vocab: &Vocabulary) -> String {
    let mut lines: Vec<String> = Vec::new();
    for (kind, map) in [("h", &vocab.hypernyms), ("b", &vocab.bridges)] {
        for (k, v) in map {
            lines.push(format!("{kind}|{k}|{}", v.join(",")));
        }
    }
    lines.sort();
    for r in &vocab.rooms {
        let sets: Vec<String> = r.trigger_sets.iter().map(|s| s.join(",")).collect();
        lines.push(format!(
            "r|{}|{}|{}",
            r.name,
            sets.join(";"),
            r.added_terms.join(",")
        ));
    }
    hex::encode(Sha256::digest(lines.join("\n").as_bytes()))
}

/// Read-only handle over one haystack.
#[derive(Clone)]
pub struct Store {
    pub(crate) raw: LexicalIndex,
    pub(crate) enriched: LexicalIndex,
    pub(crate) vectors: Option<VectorIndex>,
    pub(crate) digests: Vec<(String, ContentDigest)>,
    pub(crate) provider: Option<Arc<dyn EmbeddingProvider>>,
    vocabulary_version: String,
    vocabulary_digest: String,
    include_dates: bool,
    seed: u64,
    manifest: Option<StoreManifest>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("sessions", &self.raw.doc_count())
            .field("vocabulary_version", &self.vocabulary_version)
            .field("provider", &self.provider.as_ref().map(|p| p.spec()))
            .finish()
    }
}

impl Store {
    /// Builds every index in memory. With no provider the store is
    /// lexical-only. Any embedding failure aborts the build.
    pub fn build(
        sessions: &[Session],
        vocab: &Vocabulary,
        provider: Option<Arc<dyn EmbeddingProvider>>,
        options: BuildOptions,
    ) -> Result<Self> {
        let mut raw = LexicalIndex::new();
        let mut enriched = LexicalIndex::new();
        let mut vectors = provider
            .as_ref()
            .map(|p| VectorIndex::new(p.spec().dimension));
        let mut digests = Vec::new();
        for session in sessions {
            let record = MemoryRecord::new(session, vocab);
            raw.add(
                &record.session_id,
                &record.lexical_text(options.include_dates),
            )?;
            enriched.add(
                &record.session_id,
                &record.enriched_text(options.include_dates),
            )?;
            if let (Some(p), Some(index)) = (&provider, vectors.as_mut()) {
                let v = p.embed(&record.raw_content).map_err(|e| Error::Embedding {
                    session: record.session_id.clone(),
                    source: Box::new(e),
                })?;
                index.add(&record.session_id, v)?;
                digests.push((
                    record.session_id.clone(),
                    content_digest(truncate_for_embedding(&record.raw_content)),
                ));
            }
        }
        Ok(Self {
            raw,
            enriched,
            vectors,
            digests,
            provider,
            vocabulary_version: vocab.version.clone(),
            vocabulary_digest: vocabulary_digest(vocab),
            include_dates: options.include_dates,
            seed: options.seed,
            manifest: None,
        })
    }

    pub fn raw_index(&self) -> &LexicalIndex {
        &self.raw
    }

    pub fn enriched_index(&self) -> &LexicalIndex {
        &self.enriched
    }

    pub fn vector_index(&self) -> Option<&VectorIndex> {
        self.vectors.as_ref()
    }

    pub fn provider(&self) -> Option<&dyn EmbeddingProvider> {
        self.provider.as_deref()
    }

    pub fn session_count(&self) -> usize {
        self.raw.doc_count()
    }

    pub fn vocabulary_version(&self) -> &str {
        &self.vocabulary_version
    }

    /// The manifest this store was opened from, if any.
    pub fn manifest(&self) -> Option<&StoreManifest> {
        self.manifest.as_ref()
    }

    /// Attaches the query-time embedding provider. Its dimension must match
    /// the stored vectors.
    pub fn attach_provider(&mut self, provider: Arc<dyn EmbeddingProvider>) -> Result<()> {
        let Some(index) = &self.vectors else {
            return Err(Error::Config(
                "store is lexical-only; no vector index to query".into(),
            ));
        };
        let dim = provider.spec().dimension;
        if dim != index.dimension() {
            return Err(Error::DimensionMismatch {
                expected: index.dimension(),
                actual: dim,
            });
        }
        self.provider = Some(provider);
        Ok(())
    }

    fn provider_spec(&self) -> Option<ProviderSpec> {
        self.provider
            .as_ref()
            .map(|p| p.spec())
            .or_else(|| self.manifest.as_ref().and_then(|m| m.provider.clone()))
    }

    /// Writes the store to `dir`, which must not exist. Files are written
    /// to a sibling temporary directory and renamed into place.
    pub fn save(&self, dir: &Path, instance_id: Option<&str>) -> Result<StoreManifest> {
        if dir.exists() {
            return Err(Error::Config(format!("{} already exists", dir.display())));
        }
        let tmp = tmp_sibling(dir);
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let result = self.write_files(&tmp, instance_id);
        match result {
            Ok(manifest) => {
                fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
                Ok(manifest)
            }
            Err(e) => {
                let _ = fs::remove_dir_all(&tmp);
                Err(e)
            }
        }
    }

    fn write_files(&self, dir: &Path, instance_id: Option<&str>) -> Result<StoreManifest> {
        let mut files = BTreeMap::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            files.insert(name.to_owned(), hex::encode(Sha256::digest(&bytes)));
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
        };
        put(RAW_INDEX_FILE, self.raw.encode())?;
        put(ENRICHED_INDEX_FILE, self.enriched.encode())?;
        if let Some(index) = &self.vectors {
            let mut enc = Encoder::default();
            enc.u32(len_u32(index.dimension()));
            enc.u32(len_u32(self.digests.len()));
            let mut sidecar = EmbeddingSidecar::new(index.dimension());
            for (id, digest) in &self.digests {
                enc.str(id);
                enc.bytes(digest);
                let v = index.get(id).expect("digest entries mirror the index");
                sidecar.insert(*digest, v.to_vec())?;
            }
            put(
                VECTOR_INDEX_FILE,
                enc.finish(VECTOR_MAGIC, STORE_FORMAT_VERSION),
            )?;
            put(EMBEDDINGS_FILE, sidecar.to_bytes())?;
        }
        let manifest = StoreManifest {
            format_version: STORE_FORMAT_VERSION,
            instance_id: instance_id.map(str::to_owned),
            vocabulary_version: self.vocabulary_version.clone(),
            vocabulary_digest: self.vocabulary_digest.clone(),
            provider: self.provider_spec(),
            counts: StoreCounts {
                sessions: self.raw.doc_count(),
                instances: 1,
            },
            include_dates: self.include_dates,
            seed: self.seed,
            build_timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            files,
        };
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    /// Opens a saved store, verifying the format version and every file
    /// checksum. A store built with the hashed test provider gets that
    /// provider back; any other provider must be attached by the caller.
    pub fn open(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: StoreManifest =
            serde_json::from_str(&text).map_err(|e| Error::corrupt(&mpath, e.to_string()))?;
        if manifest.format_version != STORE_FORMAT_VERSION {
            return Err(Error::Version {
                path: mpath,
                found: manifest.format_version,
                expected: STORE_FORMAT_VERSION,
            });
        }
        let read = |name: &str| -> Result<(PathBuf, Vec<u8>)> {
            let path = dir.join(name);
            let expected = manifest
                .files
                .get(name)
                .ok_or_else(|| Error::corrupt(&mpath, format!("manifest lists no {name}")))?;
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if &hex::encode(Sha256::digest(&bytes)) != expected {
                return Err(Error::corrupt(&path, "checksum does not match manifest"));
            }
            Ok((path, bytes))
        };
        let (p, b) = read(RAW_INDEX_FILE)?;
        let raw = LexicalIndex::decode(&p, &b)?;
        let (p, b) = read(ENRICHED_INDEX_FILE)?;
        let enriched = LexicalIndex::decode(&p, &b)?;

        let (vectors, digests, provider) = match &manifest.provider {
            None => (None, Vec::new(), None),
            Some(spec) => {
                let (p, b) = read(EMBEDDINGS_FILE)?;
                let sidecar = EmbeddingSidecar::from_bytes(&p, &b)?;
                let (p, b) = read(VECTOR_INDEX_FILE)?;
                let mut dec = Decoder::open(&p, &b, VECTOR_MAGIC, STORE_FORMAT_VERSION)?;
                let dim = dec.u32()? as usize;
                if dim != spec.dimension || dim != sidecar.dimension() {
                    return Err(Error::corrupt(&p, "dimension disagrees with manifest"));
                }
                let n = dec.u32()? as usize;
                let mut index = VectorIndex::new(dim);
                let mut digests = Vec::with_capacity(n);
                for _ in 0..n {
                    let id = dec.str()?;
                    let digest: ContentDigest = dec.bytes(32)?.try_into().unwrap();
                    let v = sidecar
                        .get(&digest)
                        .ok_or_else(|| Error::corrupt(&p, format!("no vector for `{id}`")))?;
                    index.add(&id, v.to_vec())?;
                    digests.push((id, digest));
                }
                dec.finish()?;
                let provider: Option<Arc<dyn EmbeddingProvider>> =
                    if spec.name == HASHED_PROVIDER_NAME {
                        Some(Arc::new(HashedBagOfWords::new(spec.dimension)?))
                    } else {
                        None
                    };
                (Some(index), digests, provider)
            }
        };
        if raw.doc_ids() != enriched.doc_ids() || manifest.counts.sessions != raw.doc_count() {
            return Err(Error::corrupt(dir, "indices disagree on the session set"));
        }
        Ok(Self {
            raw,
            enriched,
            vectors,
            digests,
            provider,
            vocabulary_version: manifest.vocabulary_version.clone(),
            vocabulary_digest: manifest.vocabulary_digest.clone(),
            include_dates: manifest.include_dates,
            seed: manifest.seed,
            manifest: Some(manifest),
        })
    }
}

fn tmp_sibling(dir: &Path) -> PathBuf {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "store".into());
    dir.with_file_name(format!(".{name}.partial"))
}

/// Builds a store and writes it to `out`.
pub fn build_store(
    sessions: &[Session],
    vocab: &Vocabulary,
    provider: Option<Arc<dyn EmbeddingProvider>>,
    out: &Path,
    options: BuildOptions,
) -> Result<StoreManifest> {
    Store::build(sessions, vocab, provider, options)?.save(out, None)
}

pub fn open_store(path: &Path) -> Result<Store> {
    Store::open(path)
}

/// Directory name for an instance's store under a store root.
pub fn instance_dir_name(instance_id: &str) -> String {
    instance_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}
