//! Positive and negative sample construction.
//!
//! The word-based strategy ranks the tokens present in a document by an
//! importance score, then copies reconstructed values into the prototype:
//! at the top-`k` tokens for the negative sample and at the bottom-`k` tokens
//! for the positive one. Baselines: zero substitution, a random other
//! document as the negative, and topic-based salient-word selection.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::math::{argsort_desc, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    WordBased,
    ZeroSampling,
    RandomDoc,
    TopicBased,
}

impl SamplingStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingStrategy::WordBased => "word_based",
            SamplingStrategy::ZeroSampling => "zero_sampling",
            SamplingStrategy::RandomDoc => "random_doc",
            SamplingStrategy::TopicBased => "topic_based",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMeasure {
    Tfidf,
    Tf,
    Idf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub strategy: SamplingStrategy,
    pub importance: ImportanceMeasure,
    /// Number of substituted tokens per sample.
    pub k: usize,
    /// Number of dominant topics for the topic-based strategy.
    pub topics_m: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            strategy: SamplingStrategy::WordBased,
            importance: ImportanceMeasure::Tfidf,
            k: 15,
            topics_m: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, vocab: usize, topics: usize) -> Result<()> {
        if self.k == 0 || self.k > vocab {
            return Err(Error::InvalidConfig(alloc::format!(
                "k must be in 1..={vocab}, got {}",
                self.k
            )));
        }
        if self.strategy == SamplingStrategy::TopicBased && (self.topics_m == 0 || self.topics_m > topics) {
            return Err(Error::InvalidConfig(alloc::format!(
                "topics_m must be in 1..={topics}, got {}",
                self.topics_m
            )));
        }
        Ok(())
    }
}

/// A prototype's positive and negative samples on the count scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub x_pos: Vec<f64>,
    pub x_neg: Vec<f64>,
    pub pos_indices: Vec<u32>,
    pub neg_indices: Vec<u32>,
}

/// Scores of the tokens present in `doc`, in ascending id order.
///
/// `tfidf_row` is aligned with `doc.counts()`; `idf` is indexed by token id.
pub fn importance_scores(
    doc: &Document,
    tfidf_row: &[f32],
    idf: &[f64],
    measure: ImportanceMeasure,
) -> Vec<(u32, f64)> {
    doc.counts()
        .iter()
        .enumerate()
        .map(|(i, &(id, c))| {
            let s = match measure {
                ImportanceMeasure::Tfidf => tfidf_row[i] as f64,
                ImportanceMeasure::Tf => c as f64,
                ImportanceMeasure::Idf => idf[id as usize],
            };
            (id, s)
        })
        .collect()
}

/// Token ids by descending score, ties by ascending id.
pub fn rank_tokens(scores: &[(u32, f64)]) -> Vec<u32> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(id, _)| id).collect()
}

/// `min(k, floor(distinct / 2))`, so the two index sets never overlap.
pub fn effective_k(k: usize, distinct: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    match k.min(distinct / 2) {
        0 => Err(Error::SamplerDegenerate),
        k => Ok(k),
    }
}

/// Negative indices are the head of the ranking, positive indices its tail
/// (lowest first).
fn select_indices(scores: &[(u32, f64)], k: usize) -> Result<(Vec<u32>, Vec<u32>)> {
    let k = effective_k(k, scores.len())?;
    let ranked = rank_tokens(scores);
    let neg = ranked[..k].to_vec();
    let pos = ranked.iter().rev().take(k).copied().collect();
    Ok((pos, neg))
}

fn substitute(x: &[f64], indices: &[u32], values: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = x.to_vec();
    for &i in indices {
        out[i as usize] = values(i as usize);
    }
    out
}

fn check_len(x: &[f64], other: &[f64]) -> Result<()> {
    if x.len() != other.len() {
        return Err(Error::Shape(alloc::format!(
            "prototype has length {}, reconstruction {}",
            x.len(),
            other.len()
        )));
    }
    Ok(())
}

/// Word-based pair: reconstructed values copied in at the top-`k` (negative)
/// and bottom-`k` (positive) scored tokens.
pub fn word_based_pair(x: &[f64], x_recon_counts: &[f64], scores: &[(u32, f64)], k: usize) -> Result<SamplePair> {
    check_len(x, x_recon_counts)?;
    let (pos, neg) = select_indices(scores, k)?;
    Ok(SamplePair {
        x_pos: substitute(x, &pos, |i| x_recon_counts[i]),
        x_neg: substitute(x, &neg, |i| x_recon_counts[i]),
        pos_indices: pos,
        neg_indices: neg,
    })
}

/// Same selection as [`word_based_pair`], substituting zeros.
pub fn zero_sampling_pair(x: &[f64], scores: &[(u32, f64)], k: usize) -> Result<SamplePair> {
    let (pos, neg) = select_indices(scores, k)?;
    Ok(SamplePair {
        x_pos: substitute(x, &pos, |_| 0.0),
        x_neg: substitute(x, &neg, |_| 0.0),
        pos_indices: pos,
        neg_indices: neg,
    })
}

/// Draws a document from `pool` other than `doc_index`, uniformly.
pub fn random_doc_negative<R: Rng + ?Sized>(pool: &[usize], doc_index: usize, rng: &mut R) -> Result<usize> {
    let others = pool.iter().filter(|&&d| d != doc_index).count();
    if others == 0 {
        return Err(Error::TooFewDocuments);
    }
    let pick = rng.random_range(0..others);
    Ok(*pool
        .iter()
        .filter(|&&d| d != doc_index)
        .nth(pick)
        .expect("pick < others"))
}

/// Deterministic per-document random stream.
pub fn sample_rng(seed: u64, step: u64, doc_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(doc_index as u64);
    rng
}

/// Topic-based pair.
///
/// The negative substitutes reconstructed values at the salient set: the
/// union of the top-`ceil(k/M)` words of the `M` dominant topics of `theta`
/// (deepened until it holds `k` words, then truncated to `k`). The positive
/// substitutes them at the `k` present, non-salient tokens with the lowest
/// summed weight across those topics.
pub fn topic_based_pair(
    x: &[f64],
    x_recon_counts: &[f64],
    theta: &[f64],
    topic_word: &Matrix,
    topics_m: usize,
    k: usize,
) -> Result<SamplePair> {
    check_len(x, x_recon_counts)?;
    if topic_word.cols() != x.len() || topic_word.rows() != theta.len() {
        return Err(Error::Shape("topic-word matrix does not match the inputs".into()));
    }
    if topics_m == 0 || topics_m > theta.len() {
        return Err(Error::InvalidInput(alloc::format!(
            "M must be in 1..={}, got {topics_m}",
            theta.len()
        )));
    }
    let present: Vec<u32> = (0..x.len()).filter(|&i| x[i] > 0.0).map(|i| i as u32).collect();
    let k = effective_k(k, present.len())?;
    let dominant: Vec<usize> = argsort_desc(theta).into_iter().take(topics_m).collect();
    let rankings: Vec<Vec<usize>> = dominant.iter().map(|&t| argsort_desc(topic_word.row(t))).collect();

    let vocab = x.len();
    let mut depth = k.div_ceil(topics_m);
    let mut salient: Vec<u32> = Vec::new();
    loop {
        salient.clear();
        let mut seen = BTreeSet::new();
        for ranking in &rankings {
            for &w in ranking.iter().take(depth) {
                if seen.insert(w) {
                    salient.push(w as u32);
                }
            }
        }
        if salient.len() >= k || depth >= vocab {
            break;
        }
        depth += 1;
    }
    salient.truncate(k);

    let salient_set: BTreeSet<u32> = salient.iter().copied().collect();
    let mut candidates: Vec<(u32, f64)> = present
        .iter()
        .filter(|id| !salient_set.contains(id))
        .map(|&id| {
            let s: f64 = dominant.iter().map(|&t| topic_word.get(t, id as usize)).sum();
            (id, s)
        })
        .collect();
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let k = k.min(candidates.len());
    if k == 0 {
        return Err(Error::SamplerDegenerate);
    }
    salient.truncate(k);
    let pos: Vec<u32> = candidates.iter().take(k).map(|&(id, _)| id).collect();
    Ok(SamplePair {
        x_pos: substitute(x, &pos, |i| x_recon_counts[i]),
        x_neg: substitute(x, &salient, |i| x_recon_counts[i]),
        pos_indices: pos,
        neg_indices: salient,
    })
}
