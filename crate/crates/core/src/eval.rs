//! Topic evaluation: NPMI coherence from document co-occurrence,
//! Jensen-Shannon divergence, competitive-linking topic alignment, Welch's
//! t-test and latent-vector export.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::math::{mean, softmax, student_t_two_tailed, Matrix};
use crate::ntm::ModelParams;

/// Added to the co-document count before normalizing the joint probability.
pub const NPMI_SMOOTHING: f64 = 1e-12;

/// Binary document-level co-occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    doc_count: usize,
    marginal: Vec<u32>,
    /// Keyed by `(min id, max id)`.
    joint: BTreeMap<(u32, u32), u32>,
    /// Tokens whose pairs were counted; `None` means all.
    tracked: Option<BTreeSet<u32>>,
}

impl CooccurrenceStats {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn marginal(&self, id: u32) -> u32 {
        self.marginal.get(id as usize).copied().unwrap_or(0)
    }

    /// Co-document frequency, symmetric in its arguments.
    pub fn joint(&self, a: u32, b: u32) -> u32 {
        if a == b {
            return self.marginal(a);
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.joint.get(&key).copied().unwrap_or(0)
    }

    fn check(&self, id: u32) -> Result<()> {
        if id as usize >= self.marginal.len() || self.tracked.as_ref().is_some_and(|t| !t.contains(&id)) {
            return Err(Error::UnknownToken(id));
        }
        Ok(())
    }
}

/// Counts document frequencies and co-document frequencies over `docs`.
///
/// With `tokens = Some(set)`, only pairs inside `set` are counted, which keeps
/// the pair table small when only a few top words will be scored.
pub fn build_cooccurrence(corpus: &Corpus, docs: &[usize], tokens: Option<&BTreeSet<u32>>) -> CooccurrenceStats {
    let mut marginal = vec![0u32; corpus.vocab_size()];
    let mut joint = BTreeMap::new();
    for &d in docs {
        let ids: Vec<u32> = corpus
            .doc(d)
            .counts()
            .iter()
            .map(|&(id, _)| id)
            .collect();
        for &id in &ids {
            marginal[id as usize] += 1;
        }
        let kept: Vec<u32> = match tokens {
            Some(set) => ids.into_iter().filter(|id| set.contains(id)).collect(),
            None => ids,
        };
        for (i, &a) in kept.iter().enumerate() {
            for &b in &kept[i + 1..] {
                *joint.entry((a, b)).or_insert(0u32) += 1;
            }
        }
    }
    CooccurrenceStats {
        doc_count: docs.len(),
        marginal,
        joint,
        tracked: tokens.cloned(),
    }
}

/// NPMI of one pair given document frequencies and co-document frequency.
///
/// Returns `None` when both marginals are zero. A pair that never co-occurs
/// takes the limiting value -1 and a pair present in every document takes 1.
pub fn npmi_from_counts(doc_count: usize, marg_a: u32, marg_b: u32, joint: u32) -> Option<f64> {
    if marg_a == 0 && marg_b == 0 {
        return None;
    }
    if joint == 0 {
        return Some(-1.0);
    }
    let n = doc_count as f64;
    if joint as usize >= doc_count {
        return Some(1.0);
    }
    let p_ab = (joint as f64 + NPMI_SMOOTHING) / n;
    let p_a = marg_a as f64 / n;
    let p_b = marg_b as f64 / n;
    let pmi = libm::log(p_ab / (p_a * p_b));
    Some((pmi / -libm::log(p_ab)).clamp(-1.0, 1.0))
}

/// Mean NPMI over all unordered pairs of `top_words`.
pub fn npmi_topic(top_words: &[u32], stats: &CooccurrenceStats) -> Result<f64> {
    if top_words.len() < 2 {
        return Err(Error::InvalidInput("NPMI needs at least two words".into()));
    }
    for &w in top_words {
        stats.check(w)?;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, &a) in top_words.iter().enumerate() {
        for &b in &top_words[i + 1..] {
            if let Some(v) = npmi_from_counts(stats.doc_count, stats.marginal(a), stats.marginal(b), stats.joint(a, b)) {
                sum += v;
                pairs += 1;
            }
        }
    }
    Ok(if pairs == 0 { 0.0 } else { sum / pairs as f64 })
}

/// Jensen-Shannon divergence in nats, in `[0, ln 2]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(alloc::format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        let term = |x: f64| if x > 0.0 { x * libm::log(x / m) } else { 0.0 };
        // Summing the two terms first keeps the result exactly symmetric.
        acc += term(a) + term(b);
    }
    Ok((0.5 * acc).clamp(0.0, core::f64::consts::LN_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub a: usize,
    pub b: usize,
    pub js: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub pairs: Vec<AlignedPair>,
    pub threshold: f64,
}

/// Default alignment threshold, `0.9 ln 2`.
pub const DEFAULT_ALIGN_THRESHOLD: f64 = 0.9 * core::f64::consts::LN_2;

/// Greedy one-to-one matching on a divergence matrix: repeatedly take the
/// global minimum (ties by row, then column), stopping once it exceeds
/// `threshold`, either side is exhausted, or `max_pairs` are emitted.
pub fn link_by_divergence(div: &Matrix, threshold: f64, max_pairs: Option<usize>) -> AlignmentResult {
    let (ra, cb) = div.shape();
    let mut used_a = vec![false; ra];
    let mut used_b = vec![false; cb];
    let mut pairs = Vec::new();
    let limit = max_pairs.unwrap_or(usize::MAX).min(ra.min(cb));
    while pairs.len() < limit {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..ra).filter(|&i| !used_a[i]) {
            for j in (0..cb).filter(|&j| !used_b[j]) {
                let d = div.get(i, j);
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        match best {
            Some((i, j, d)) if d <= threshold => {
                used_a[i] = true;
                used_b[j] = true;
                pairs.push(AlignedPair { a: i, b: j, js: d });
            }
            _ => break,
        }
    }
    AlignmentResult { pairs, threshold }
}

/// Pairwise JS divergence between the rows of two topic-word matrices.
pub fn js_matrix(topics_a: &Matrix, topics_b: &Matrix) -> Result<Matrix> {
    if topics_a.cols() != topics_b.cols() {
        return Err(Error::Shape(alloc::format!(
            "vocabularies differ: {} vs {}",
            topics_a.cols(),
            topics_b.cols()
        )));
    }
    let mut m = Matrix::zeros(topics_a.rows(), topics_b.rows());
    for i in 0..topics_a.rows() {
        for j in 0..topics_b.rows() {
            m.set(i, j, js_divergence(topics_a.row(i), topics_b.row(j))?);
        }
    }
    Ok(m)
}

/// Competitive linking of two models' row-normalized topic-word matrices.
pub fn competitive_link(
    topics_a: &Matrix,
    topics_b: &Matrix,
    threshold: f64,
    max_pairs: Option<usize>,
) -> Result<AlignmentResult> {
    Ok(link_by_divergence(&js_matrix(topics_a, topics_b)?, threshold, max_pairs))
}

/// Two-tailed Welch's t-test p-value for a difference in means.
pub fn significance_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("each sample needs at least two values".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let var = |xs: &[f64], m: f64| xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    let (va, vb) = (var(a, ma) / a.len() as f64, var(b, mb) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / libm::sqrt(se2);
    let df = se2 * se2
        / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(student_t_two_tailed(t, df))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub index: usize,
    pub token_ids: Vec<u32>,
    pub words: Vec<String>,
    pub npmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub topics: Vec<TopicEntry>,
    pub mean_npmi: f64,
    pub model_id: String,
    pub seed: u64,
    pub config_digest: String,
}

/// Top-`n` words of every topic scored against `stats`.
pub fn topic_report(params: &ModelParams, corpus: &Corpus, stats: &CooccurrenceStats, n: usize) -> Result<TopicReport> {
    let mut topics = Vec::with_capacity(params.dims().topics);
    for t in 0..params.dims().topics {
        let ids = params.top_words(t, n)?;
        let npmi = npmi_topic(&ids, stats)?;
        let words = ids
            .iter()
            .map(|&id| String::from(corpus.vocab().token(id).unwrap_or("?")))
            .collect();
        topics.push(TopicEntry {
            index: t,
            token_ids: ids,
            words,
            npmi,
        });
    }
    let mean_npmi = mean(&topics.iter().map(|t| t.npmi).collect::<Vec<_>>());
    Ok(TopicReport {
        topics,
        mean_npmi,
        model_id: String::new(),
        seed: 0,
        config_digest: String::new(),
    })
}

/// Stats restricted to the union of every topic's top-`n` words.
pub fn stats_for_model(params: &ModelParams, corpus: &Corpus, docs: &[usize], n: usize) -> Result<CooccurrenceStats> {
    let mut tokens = BTreeSet::new();
    for t in 0..params.dims().topics {
        tokens.extend(params.top_words(t, n)?);
    }
    Ok(build_cooccurrence(corpus, docs, Some(&tokens)))
}

/// Mean top-`n` NPMI of a model with reference statistics from `docs`.
pub fn mean_npmi(params: &ModelParams, corpus: &Corpus, docs: &[usize], n: usize) -> Result<f64> {
    let stats = stats_for_model(params, corpus, docs, n)?;
    Ok(topic_report(params, corpus, &stats, n)?.mean_npmi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRow {
    pub doc_id: usize,
    pub label: Option<u32>,
    pub theta: Vec<f64>,
}

/// Noise-free topic proportions `softmax(mu)` for each listed document.
pub fn export_latents(params: &ModelParams, corpus: &Corpus, docs: &[usize], covariates: bool) -> Result<Vec<LatentRow>> {
    let v = corpus.vocab_size();
    let c = params.dims().covariates;
    docs.iter()
        .map(|&d| {
            let doc = corpus.doc(d);
            let cov = covariate_vector(doc.label, c, covariates);
            let (mu, _) = params.encode(&doc.to_dense(v), cov.as_deref())?;
            Ok(LatentRow {
                doc_id: d,
                label: doc.label,
                theta: softmax(&mu),
            })
        })
        .collect()
}

/// One-hot covariate for a label, or `None` when the model has no covariates.
pub fn covariate_vector(label: Option<u32>, width: usize, enabled: bool) -> Option<Vec<f64>> {
    if !enabled || width == 0 {
        return None;
    }
    let mut c = vec![0.0; width];
    if let Some(l) = label {
        if (l as usize) < width {
            c[l as usize] = 1.0;
        }
    }
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::ntm::ModelDims;
    use alloc::string::ToString;
    use core::f64::consts::LN_2;

    fn corpus(docs: &[&[u32]], v: usize) -> Corpus {
        let toks = (0..v).map(|i| alloc::format!("t{i}")).collect();
        let docs = docs
            .iter()
            .map(|ids| Document::from_counts(ids.iter().map(|&i| (i, 1)), None))
            .collect();
        Corpus::new(toks, docs).unwrap()
    }

    #[test]
    fn cooccurrence_counts() {
        let c = corpus(&[&[0, 1], &[0, 1], &[2]], 3);
        let s = build_cooccurrence(&c, &[0, 1, 2], None);
        assert_eq!((s.marginal(0), s.marginal(1), s.joint(0, 1)), (2, 2, 2));
        assert_eq!(s.joint(1, 0), s.joint(0, 1));
        assert_eq!(s.joint(0, 2), 0);
    }

    #[test]
    fn npmi_reference_values() {
        // P(i) = P(j) = P(i,j) = 0.5
        assert!((npmi_from_counts(100, 50, 50, 50).unwrap() - 1.0).abs() < 1e-9);
        // P(i,j) = P(i) P(j)
        assert!(npmi_from_counts(100, 50, 20, 10).unwrap().abs() < 1e-9);
        assert_eq!(npmi_from_counts(100, 10, 10, 0).unwrap(), -1.0);
        assert_eq!(npmi_from_counts(100, 0, 0, 0), None);
        assert_eq!(npmi_from_counts(10, 10, 10, 10).unwrap(), 1.0);
    }

    #[test]
    fn npmi_unknown_token() {
        let c = corpus(&[&[0, 1], &[1, 2]], 3);
        let s = build_cooccurrence(&c, &[0, 1], None);
        assert_eq!(npmi_topic(&[0, 7], &s), Err(Error::UnknownToken(7)));
        let restricted = build_cooccurrence(&c, &[0, 1], Some(&[0u32, 1].into_iter().collect()));
        assert_eq!(npmi_topic(&[0, 2], &restricted), Err(Error::UnknownToken(2)));
    }

    #[test]
    fn js_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        let d = js_divergence(&[0.5, 0.5, 0.0, 0.0], &[0.0, 0.0, 0.3, 0.7]).unwrap();
        assert!((d - LN_2).abs() < 1e-15);
        let q = [0.6, 0.1, 0.3];
        assert_eq!(js_divergence(&p, &q).unwrap(), js_divergence(&q, &p).unwrap());
        assert!(js_divergence(&p, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn linking_examples() {
        let m = Matrix::from_rows(&[vec![0.1, 0.3], vec![0.2, 0.05]]).unwrap();
        let r = link_by_divergence(&m, 1.0, None);
        assert_eq!(
            r.pairs,
            [AlignedPair { a: 1, b: 1, js: 0.05 }, AlignedPair { a: 0, b: 0, js: 0.1 }]
        );
        let topics = Matrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8], vec![0.3, 0.4, 0.3]]).unwrap();
        let r = competitive_link(&topics, &topics, DEFAULT_ALIGN_THRESHOLD, None).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert!(r.pairs.iter().all(|p| p.a == p.b && p.js == 0.0));
        let other = Matrix::from_rows(&[vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6]]).unwrap();
        assert!(competitive_link(&topics, &other, 0.0, None).unwrap().pairs.is_empty());
        assert_eq!(link_by_divergence(&m, 1.0, Some(1)).pairs.len(), 1);
    }

    #[test]
    fn welch_examples() {
        let a = [0.30, 0.31, 0.32];
        let b = [0.20, 0.21, 0.22];
        assert_eq!(significance_test(&a, &a).unwrap(), 1.0);
        let p = significance_test(&a, &b).unwrap();
        assert!(p < 0.01, "{p}");
        assert_eq!(p, significance_test(&b, &a).unwrap());
        assert_eq!(significance_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(significance_test(&[1.0], &b).is_err());
    }

    #[test]
    fn welch_matches_closed_form() {
        // t = 0.1 / sqrt(2 * 1e-4 / 3), df = 4 for equal variances and sizes
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let t: f64 = 0.1 / (2.0e-4f64 / 3.0).sqrt();
        let expect = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 4.0).unwrap().cdf(t));
        let got = significance_test(&[0.30, 0.31, 0.32], &[0.20, 0.21, 0.22]).unwrap();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn untrained_latents_are_uniform() {
        let c = corpus(&[&[0, 1], &[1, 2], &[2]], 3);
        let p = ModelParams::zeros(ModelDims {
            vocab: 3,
            topics: 4,
            hidden: 2,
            covariates: 0,
        });
        let rows = export_latents(&p, &c, &[0, 1, 2], false).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.theta == [0.25; 4]));
    }

    #[test]
    fn report_words() {
        let c = corpus(&[&[0, 1], &[0, 1], &[2, 3]], 4);
        let mut p = ModelParams::zeros(ModelDims {
            vocab: 4,
            topics: 1,
            hidden: 1,
            covariates: 0,
        });
        p.topic_word.row_mut(0).copy_from_slice(&[1.0, 0.9, 0.0, 0.0]);
        let stats = build_cooccurrence(&c, &[0, 1, 2], None);
        let r = topic_report(&p, &c, &stats, 2).unwrap();
        assert_eq!(r.topics[0].words, ["t0".to_string(), "t1".to_string()]);
        assert!(r.mean_npmi > 0.0);
    }
}
