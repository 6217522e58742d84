//! Token-vector archives and the deterministic hash embedder.
//!
//! An archive directory holds one `<doc_id>.emb` payload per document and a
//! `manifest.json`. Payload layout (all integers little-endian u32):
//!
//! ```text
//! "ADEM" | version = 1 | dim | sentence_count
//! per sentence: token_count | token_count * dim binary32 values, row-major
//! ```
//!
//! The manifest checksum is the CRC32 of every payload concatenated in id order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"ADEM";
pub const VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

/// One sentence's token vectors: `tokens` rows of `dim` values.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceMatrix {
    pub tokens: usize,
    pub dim: usize,
    pub values: Vec<f32>,
}

impl SentenceMatrix {
    pub fn new(tokens: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != tokens * dim {
            return Err(Error::ShapeMismatch(format!(
                "{tokens}x{dim} sentence matrix given {} values",
                values.len()
            )));
        }
        Ok(SentenceMatrix { tokens, dim, values })
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    /// Promotes to the engine's working precision.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(
            vec![self.tokens, self.dim],
            self.values.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("matrix shape checked at construction")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub provider: String,
    pub dim: usize,
    pub checksum: String,
    pub docs: BTreeMap<String, Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingArchive {
    pub provider_id: String,
    pub dim: usize,
    pub docs: BTreeMap<String, Vec<SentenceMatrix>>,
}

impl EmbeddingArchive {
    pub fn new(provider_id: impl Into<String>, dim: usize) -> Self {
        EmbeddingArchive {
            provider_id: provider_id.into(),
            dim,
            docs: BTreeMap::new(),
        }
    }

    /// Builds an archive for a corpus using the hash embedder.
    pub fn from_hash(documents: &[Document], dim: usize, seed: u64) -> Self {
        let mut archive = EmbeddingArchive::new(format!("hash:{seed}"), dim);
        for doc in documents {
            let sentences = doc
                .sentences
                .iter()
                .map(|tokens| {
                    let values = tokens
                        .iter()
                        .flat_map(|t| hash_embed(t, dim, seed).into_iter().map(|v| v as f32))
                        .collect();
                    SentenceMatrix {
                        tokens: tokens.len(),
                        dim,
                        values,
                    }
                })
                .collect();
            archive.docs.insert(doc.id.clone(), sentences);
        }
        archive
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::ShapeMismatch("archive dim must be positive".into()));
        }
        for (id, sentences) in &self.docs {
            for s in sentences {
                if s.dim != self.dim || s.tokens == 0 || s.values.len() != s.tokens * s.dim {
                    return Err(Error::ShapeMismatch(format!(
                        "document {id}: sentence of {} tokens x {} does not fit dim {}",
                        s.tokens, s.dim, self.dim
                    )));
                }
            }
        }
        Ok(())
    }

    fn payload(&self, id: &str) -> Vec<u8> {
        let sentences = &self.docs[id];
        let floats: usize = sentences.iter().map(|s| s.values.len()).sum();
        let mut buf = Vec::with_capacity(16 + 4 * sentences.len() + 4 * floats);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(sentences.len() as u32).to_le_bytes());
        for s in sentences {
            buf.extend_from_slice(&(s.tokens as u32).to_le_bytes());
            for v in &s.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn meta(&self) -> EmbeddingMeta {
        let mut hasher = crc32fast::Hasher::new();
        for id in self.docs.keys() {
            hasher.update(&self.payload(id));
        }
        EmbeddingMeta {
            provider: self.provider_id.clone(),
            dim: self.dim,
            checksum: format!("{:08x}", hasher.finalize()),
            docs: self
                .docs
                .iter()
                .map(|(id, s)| (id.clone(), s.iter().map(|m| m.tokens).collect()))
                .collect(),
        }
    }
}

/// Writes `<id>.emb` payloads plus `manifest.json` into `dir`.
pub fn write_archive(archive: &EmbeddingArchive, dir: &Path) -> Result<()> {
    archive.validate()?;
    fs::create_dir_all(dir)?;
    for id in archive.docs.keys() {
        fs::write(dir.join(format!("{id}.emb")), archive.payload(id))?;
    }
    let mut manifest = serde_json::to_vec_pretty(&archive.meta())?;
    manifest.push(b'\n');
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl Reader<'_> {
    fn u32(&mut self) -> Result<u32> {
        let bytes = self.take(4)?;
        Ok(u32::from_le_bytes(bytes.try_into().unwrap()))
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::ChecksumMismatch(format!("{}: payload truncated at byte {}", self.name, self.pos))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

fn parse_payload(name: &str, buf: &[u8], meta: &EmbeddingMeta, counts: &[usize]) -> Result<Vec<SentenceMatrix>> {
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(Error::BadMagic(name.to_string()));
    }
    let mut r = Reader { buf, pos: 4, name };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let dim = r.u32()? as usize;
    if dim != meta.dim {
        return Err(Error::ShapeMismatch(format!(
            "{name}: payload dim {dim} but manifest dim {}",
            meta.dim
        )));
    }
    let sentence_count = r.u32()? as usize;
    if sentence_count != counts.len() {
        return Err(Error::ShapeMismatch(format!(
            "{name}: manifest lists {} sentences, payload has {sentence_count}",
            counts.len()
        )));
    }
    let mut sentences = Vec::with_capacity(sentence_count);
    for (i, &expected) in counts.iter().enumerate() {
        let tokens = r.u32()? as usize;
        if tokens != expected || tokens == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{name}: sentence {i} has {tokens} tokens, manifest says {expected}"
            )));
        }
        let raw = r.take(tokens.checked_mul(dim).and_then(|n| n.checked_mul(4)).ok_or_else(|| {
            Error::ShapeMismatch(format!("{name}: sentence {i} size overflows"))
        })?)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        sentences.push(SentenceMatrix { tokens, dim, values });
    }
    if r.pos != buf.len() {
        return Err(Error::ShapeMismatch(format!(
            "{name}: {} trailing bytes after the last sentence",
            buf.len() - r.pos
        )));
    }
    Ok(sentences)
}

/// Loads and fully validates an archive directory.
pub fn load_archive(dir: &Path) -> Result<EmbeddingArchive> {
    let meta: EmbeddingMeta = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
    if meta.dim == 0 {
        return Err(Error::ShapeMismatch("manifest dim must be positive".into()));
    }
    let mut hasher = crc32fast::Hasher::new();
    let mut payloads = BTreeMap::new();
    for id in meta.docs.keys() {
        let buf = fs::read(dir.join(format!("{id}.emb")))?;
        hasher.update(&buf);
        payloads.insert(id.clone(), buf);
    }
    let checksum = format!("{:08x}", hasher.finalize());

    let mut archive = EmbeddingArchive::new(meta.provider.clone(), meta.dim);
    let mut first_error = None;
    for (id, buf) in &payloads {
        let counts = &meta.docs[id];
        if counts.contains(&0) {
            return Err(Error::ShapeMismatch(format!("manifest lists an empty sentence in {id}")));
        }
        match parse_payload(id, buf, &meta, counts) {
            Ok(sentences) => {
                archive.docs.insert(id.clone(), sentences);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    // Structural errors that survive a valid checksum are manifest/payload
    // disagreements; otherwise corruption is reported as such.
    if checksum != meta.checksum.to_ascii_lowercase() {
        return match first_error {
            Some(e @ (Error::BadMagic(_) | Error::VersionUnsupported(_))) => Err(e),
            _ => Err(Error::ChecksumMismatch(format!(
                "manifest says {}, payloads hash to {checksum}",
                meta.checksum
            ))),
        };
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(archive)
}

/// Deterministic unit-norm pseudo-random vector for a token.
///
/// The token bytes and seed are mixed with FNV-1a; the digest seeds a
/// SplitMix64 stream whose outputs map to uniform values in [-1, 1).
pub fn hash_embed(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 1, "hash_embed needs dim >= 1");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut state = h ^ seed.rotate_left(32);
    let mut v: Vec<f64> = (0..dim)
        .map(|_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Where token vectors come from.
#[derive(Clone, Copy, Debug)]
pub enum EmbeddingSource<'a> {
    Archive(&'a EmbeddingArchive),
    Hash { dim: usize, seed: u64 },
}

impl EmbeddingSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingSource::Archive(a) => a.dim,
            EmbeddingSource::Hash { dim, .. } => *dim,
        }
    }
}

/// One `tokens x dim` tensor per sentence of `doc`.
pub fn embed_document(doc: &Document, source: EmbeddingSource<'_>) -> Result<Vec<Tensor>> {
    match source {
        EmbeddingSource::Hash { dim, seed } => doc
            .sentences
            .iter()
            .map(|tokens| {
                let values = tokens.iter().flat_map(|t| hash_embed(t, dim, seed)).collect();
                Tensor::from_vec(vec![tokens.len(), dim], values)
            })
            .collect(),
        EmbeddingSource::Archive(archive) => {
            let sentences = archive
                .docs
                .get(&doc.id)
                .ok_or_else(|| Error::MissingDocument(doc.id.clone()))?;
            if sentences.len() != doc.sentences.len() {
                return Err(Error::ShapeMismatch(format!(
                    "document {} has {} sentences, archive has {}",
                    doc.id,
                    doc.sentences.len(),
                    sentences.len()
                )));
            }
            doc.sentences
                .iter()
                .zip(sentences)
                .enumerate()
                .map(|(i, (tokens, m))| {
                    if tokens.len() != m.tokens {
                        return Err(Error::ShapeMismatch(format!(
                            "document {} sentence {i}: {} tokens, archive has {}",
                            doc.id,
                            tokens.len(),
                            m.tokens
                        )));
                    }
                    Ok(m.to_tensor())
                })
                .collect()
        }
    }
}
