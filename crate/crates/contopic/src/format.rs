//! On-disk formats: the binary corpus and the model checkpoint.
//!
//! Both files start with a single line of JSON (the manifest) terminated by
//! `\n`, followed immediately by a little-endian binary section whose layout
//! the manifest describes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use contopic_core::corpus::{Corpus, Document, SplitTag, Vocabulary};
use contopic_core::ntm::{ModelDims, ModelParams, TENSOR_NAMES};
use contopic_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CORPUS_MAGIC: &str = "contopic-corpus";
pub const CHECKPOINT_MAGIC: &str = "contopic-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] contopic_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn malformed<T>(msg: impl Into<String>) -> Result<T> {
    Err(FormatError::Malformed(msg.into()))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn split_manifest(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    match bytes.iter().position(|&b| b == b'\n') {
        Some(i) => Ok((&bytes[..i], &bytes[i + 1..])),
        None => malformed("missing manifest terminator"),
    }
}

fn check_magic(format: &str, expect: &str, version: u32) -> Result<()> {
    if format != expect {
        return malformed(format!("expected a {expect} file, found {format:?}"));
    }
    if version != FORMAT_VERSION {
        return malformed(format!("unsupported format_version {version}"));
    }
    Ok(())
}

fn u32_at(bytes: &[u8], i: usize) -> u32 {
    u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap())
}

fn f32_at(bytes: &[u8], i: usize) -> f32 {
    f32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap())
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusManifest {
    format: String,
    format_version: u32,
    #[serde(rename = "V")]
    vocab_size: usize,
    #[serde(rename = "N")]
    num_docs: usize,
    nnz: usize,
    vocab: Vec<String>,
    split_tags: Vec<SplitTag>,
    labels: Vec<Option<u32>>,
}

/// Serializes a corpus.
///
/// After the manifest come `nnz` records of three `u32` values
/// `(doc_index, token_id, count)` in document order and ascending token id,
/// then `nnz` `f32` tf-idf values in the same order.
pub fn encode_corpus(corpus: &Corpus) -> Vec<u8> {
    let nnz: usize = corpus.docs().iter().map(|d| d.counts().len()).sum();
    let manifest = CorpusManifest {
        format: CORPUS_MAGIC.into(),
        format_version: FORMAT_VERSION,
        vocab_size: corpus.vocab_size(),
        num_docs: corpus.len(),
        nnz,
        vocab: corpus.vocab().tokens().to_vec(),
        split_tags: corpus.split_tags().to_vec(),
        labels: corpus.docs().iter().map(|d| d.label).collect(),
    };
    let mut out = serde_json::to_vec(&manifest).expect("manifest serializes");
    out.push(b'\n');
    out.reserve(nnz * 16);
    for (d, doc) in corpus.docs().iter().enumerate() {
        for &(id, c) in doc.counts() {
            for v in [d as u32, id, c] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    for row in corpus.tfidf() {
        for &s in row {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out
}

pub fn decode_corpus(bytes: &[u8]) -> Result<Corpus> {
    let (head, body) = split_manifest(bytes)?;
    let m: CorpusManifest = serde_json::from_slice(head)?;
    check_magic(&m.format, CORPUS_MAGIC, m.format_version)?;
    if m.vocab.len() != m.vocab_size || m.split_tags.len() != m.num_docs || m.labels.len() != m.num_docs {
        return malformed("manifest lengths disagree with V and N");
    }
    if body.len() != m.nnz * 16 {
        return malformed(format!("binary section has {} bytes, expected {}", body.len(), m.nnz * 16));
    }
    let (triples, scores) = body.split_at(m.nnz * 12);
    let mut counts: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m.num_docs];
    let mut tfidf: Vec<Vec<f32>> = vec![Vec::new(); m.num_docs];
    let mut last_doc = 0usize;
    for i in 0..m.nnz {
        let (d, id, c) = (u32_at(triples, 3 * i) as usize, u32_at(triples, 3 * i + 1), u32_at(triples, 3 * i + 2));
        if d >= m.num_docs || d < last_doc {
            return malformed(format!("record {i}: document index {d} out of order"));
        }
        last_doc = d;
        counts[d].push((id, c));
        tfidf[d].push(f32_at(scores, i));
    }
    let mut df = vec![0u32; m.vocab_size];
    let mut docs = Vec::with_capacity(m.num_docs);
    for (d, (pairs, label)) in counts.into_iter().zip(m.labels).enumerate() {
        for &(id, _) in &pairs {
            match df.get_mut(id as usize) {
                Some(slot) => *slot += 1,
                None => return malformed(format!("document {d}: token id {id} out of range")),
            }
        }
        let doc = Document::from_counts(pairs.iter().copied(), label);
        if doc.counts() != pairs.as_slice() {
            return malformed(format!("document {d}: counts must be positive, unique and sorted"));
        }
        docs.push(doc);
    }
    let vocab = Vocabulary::new(m.vocab, df)?;
    Ok(Corpus::from_parts(vocab, docs, tfidf, m.split_tags)?)
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_file(path, &encode_corpus(corpus))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    decode_corpus(&read_file(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: [usize; 2],
    pub dtype: String,
    /// Byte offset into the binary blob.
    pub offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    format: String,
    format_version: u32,
    #[serde(rename = "V")]
    vocab: usize,
    #[serde(rename = "T")]
    topics: usize,
    #[serde(rename = "H")]
    hidden: usize,
    #[serde(rename = "C")]
    covariates: usize,
    tensors: BTreeMap<String, TensorEntry>,
    config: TrainConfig,
    beta0: f64,
    total_steps: u64,
    corpus_sha256: String,
}

/// A trained model with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    pub beta0: f64,
    pub total_steps: u64,
    /// Digest of the serialized training corpus.
    pub corpus_sha256: String,
}

/// Serializes a checkpoint. Tensors are stored row-major as `f32` in
/// [`TENSOR_NAMES`] order, back to back. Values are expected to be
/// `f32`-representable already, as training keeps them.
pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let dims = ck.params.dims();
    let mut tensors = BTreeMap::new();
    let mut offset = 0;
    for (name, (r, c)) in TENSOR_NAMES.iter().zip(ModelParams::shapes(dims)) {
        tensors.insert(
            name.to_string(),
            TensorEntry {
                shape: [r, c],
                dtype: "f32le".into(),
                offset,
            },
        );
        offset += 4 * r * c;
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_MAGIC.into(),
        format_version: FORMAT_VERSION,
        vocab: dims.vocab,
        topics: dims.topics,
        hidden: dims.hidden,
        covariates: dims.covariates,
        tensors,
        config: ck.config.clone(),
        beta0: ck.beta0,
        total_steps: ck.total_steps,
        corpus_sha256: ck.corpus_sha256.clone(),
    };
    let mut out = serde_json::to_vec(&manifest).expect("manifest serializes");
    out.push(b'\n');
    for t in ck.params.tensors() {
        for &x in t {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let (head, blob) = split_manifest(bytes)?;
    let m: CheckpointManifest = serde_json::from_slice(head)?;
    check_magic(&m.format, CHECKPOINT_MAGIC, m.format_version)?;
    let dims = ModelDims {
        vocab: m.vocab,
        topics: m.topics,
        hidden: m.hidden,
        covariates: m.covariates,
    };
    if m.tensors.len() != TENSOR_NAMES.len() {
        return malformed(format!("expected {} tensors, found {}", TENSOR_NAMES.len(), m.tensors.len()));
    }
    let mut flat: [Vec<f64>; 8] = Default::default();
    for ((slot, name), (r, c)) in flat.iter_mut().zip(TENSOR_NAMES).zip(ModelParams::shapes(dims)) {
        let entry = match m.tensors.get(name) {
            Some(e) => e,
            None => return malformed(format!("tensor {name} missing")),
        };
        if entry.dtype != "f32le" {
            return malformed(format!("tensor {name}: unsupported dtype {}", entry.dtype));
        }
        if entry.shape != [r, c] {
            return malformed(format!(
                "tensor {name}: shape {:?} does not match V={} T={} H={} C={}",
                entry.shape, m.vocab, m.topics, m.hidden, m.covariates
            ));
        }
        let len = r * c;
        let end = entry.offset.checked_add(4 * len).filter(|&e| e <= blob.len());
        let Some(end) = end else {
            return malformed(format!("tensor {name} extends past the end of the file"));
        };
        let bytes = &blob[entry.offset..end];
        *slot = (0..len).map(|i| f32_at(bytes, i) as f64).collect();
    }
    Ok(Checkpoint {
        params: ModelParams::from_tensors(dims, flat)?,
        config: m.config,
        beta0: m.beta0,
        total_steps: m.total_steps,
        corpus_sha256: m.corpus_sha256,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    write_file(path, &encode_checkpoint(ck))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?)
}
