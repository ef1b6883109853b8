//! Vocabulary-indexed sparse corpora: ingestion, tf-idf, splits and
//! synthetic LDA corpora with known ground truth.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Ordered token list with its inverse map and per-token document frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_to_id: BTreeMap<String, u32>,
    doc_freq: Vec<u32>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, doc_freq: Vec<u32>) -> Result<Self> {
        if tokens.len() != doc_freq.len() {
            return Err(Error::Shape(format!(
                "{} tokens but {} document frequencies",
                tokens.len(),
                doc_freq.len()
            )));
        }
        let mut token_to_id = BTreeMap::new();
        for (id, tok) in tokens.iter().enumerate() {
            if token_to_id.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Vocabulary {
            tokens,
            token_to_id,
            doc_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn doc_freq(&self) -> &[u32] {
        &self.doc_freq
    }
}

/// A bag of words: `(token id, count)` pairs sorted by id, all counts > 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    counts: Vec<(u32, u32)>,
    pub label: Option<u32>,
}

impl Document {
    /// Builds a document from arbitrary `(id, count)` pairs; duplicate ids are
    /// summed and zero counts dropped.
    pub fn from_counts(pairs: impl IntoIterator<Item = (u32, u32)>, label: Option<u32>) -> Self {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        for (id, c) in pairs {
            if c > 0 {
                *map.entry(id).or_insert(0) += c;
            }
        }
        Document {
            counts: map.into_iter().collect(),
            label,
        }
    }

    pub fn counts(&self) -> &[(u32, u32)] {
        &self.counts
    }

    pub fn count(&self, id: u32) -> u32 {
        self.counts
            .binary_search_by_key(&id, |&(t, _)| t)
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn to_dense(&self, vocab_size: usize) -> Vec<f64> {
        let mut x = vec![0.0; vocab_size];
        for &(id, c) in &self.counts {
            x[id as usize] = c as f64;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitTag::Train),
            "val" => Some(SplitTag::Val),
            "test" => Some(SplitTag::Test),
            _ => None,
        }
    }
}

/// Documents over a vocabulary, with per-entry tf-idf scores and split tags.
///
/// `tfidf[d][i]` is the score of `docs[d].counts()[i]`, so tf-idf entries
/// exist exactly where counts do.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocab: Vocabulary,
    docs: Vec<Document>,
    tfidf: Vec<Vec<f32>>,
    split_tags: Vec<SplitTag>,
}

impl Corpus {
    /// Builds a corpus, recomputing document frequencies and tf-idf from the
    /// documents. Every document starts in the train split.
    pub fn new(tokens: Vec<String>, docs: Vec<Document>) -> Result<Self> {
        let v = tokens.len();
        let mut doc_freq = vec![0u32; v];
        for (d, doc) in docs.iter().enumerate() {
            if doc.counts.is_empty() {
                return Err(Error::InvalidInput(format!("document {d} is empty")));
            }
            for &(id, _) in &doc.counts {
                let slot = doc_freq
                    .get_mut(id as usize)
                    .ok_or(Error::IndexOutOfRange {
                        index: id as usize,
                        len: v,
                    })?;
                *slot += 1;
            }
        }
        let vocab = Vocabulary::new(tokens, doc_freq)?;
        let tfidf = compute_tfidf(&vocab, &docs);
        let split_tags = vec![SplitTag::Train; docs.len()];
        Ok(Corpus {
            vocab,
            docs,
            tfidf,
            split_tags,
        })
    }

    /// Reassembles a corpus from stored parts, validating every invariant.
    pub fn from_parts(
        vocab: Vocabulary,
        docs: Vec<Document>,
        tfidf: Vec<Vec<f32>>,
        split_tags: Vec<SplitTag>,
    ) -> Result<Self> {
        let v = vocab.len();
        if tfidf.len() != docs.len() || split_tags.len() != docs.len() {
            return Err(Error::Shape(format!(
                "{} documents, {} tf-idf rows, {} split tags",
                docs.len(),
                tfidf.len(),
                split_tags.len()
            )));
        }
        let mut df = vec![0u32; v];
        for (d, (doc, row)) in docs.iter().zip(&tfidf).enumerate() {
            if doc.counts.is_empty() {
                return Err(Error::InvalidInput(format!("document {d} is empty")));
            }
            if row.len() != doc.counts.len() {
                return Err(Error::Shape(format!("tf-idf row {d} does not match its counts")));
            }
            let mut prev: Option<u32> = None;
            for &(id, c) in &doc.counts {
                if id as usize >= v {
                    return Err(Error::IndexOutOfRange {
                        index: id as usize,
                        len: v,
                    });
                }
                if c == 0 || prev.is_some_and(|p| p >= id) {
                    return Err(Error::InvalidInput(format!(
                        "document {d} counts must be positive and sorted by id"
                    )));
                }
                prev = Some(id);
                df[id as usize] += 1;
            }
        }
        if df != vocab.doc_freq {
            return Err(Error::InvalidInput(
                "document frequencies do not match the documents".into(),
            ));
        }
        Ok(Corpus {
            vocab,
            docs,
            tfidf,
            split_tags,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc(&self, index: usize) -> &Document {
        &self.docs[index]
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn tfidf(&self) -> &[Vec<f32>] {
        &self.tfidf
    }

    pub fn tfidf_row(&self, index: usize) -> &[f32] {
        &self.tfidf[index]
    }

    pub fn split_tags(&self) -> &[SplitTag] {
        &self.split_tags
    }

    /// Indices of the documents tagged `tag`, ascending.
    pub fn indices(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.docs.len())
            .filter(|&i| self.split_tags[i] == tag)
            .collect()
    }

    /// Smoothed inverse document frequency of every token.
    pub fn idf(&self) -> Vec<f64> {
        idf_vector(&self.vocab, self.docs.len())
    }

    /// Number of label classes (max label + 1), 0 when unlabeled.
    pub fn num_labels(&self) -> usize {
        self.docs
            .iter()
            .filter_map(|d| d.label)
            .max()
            .map_or(0, |m| m as usize + 1)
    }

    pub fn set_split_tags(&mut self, tags: Vec<SplitTag>) -> Result<()> {
        if tags.len() != self.docs.len() {
            return Err(Error::Shape(format!(
                "{} split tags for {} documents",
                tags.len(),
                self.docs.len()
            )));
        }
        self.split_tags = tags;
        Ok(())
    }

    /// Assigns split tags by a seeded shuffle; see [`split_tags_for`].
    pub fn split(&mut self, ratios: SplitRatios, seed: u64) -> Result<()> {
        self.split_tags = split_tags_for(self.docs.len(), ratios, seed)?;
        Ok(())
    }

    /// Plain-text rendering: each token repeated `count` times, space separated.
    pub fn detokenize(&self, index: usize) -> String {
        let mut out = String::new();
        for &(id, c) in &self.docs[index].counts {
            for _ in 0..c {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&self.vocab.tokens[id as usize]);
            }
        }
        out
    }
}

/// `ln((1 + N) / (1 + df)) + 1`.
pub fn smoothed_idf(doc_count: usize, doc_freq: u32) -> f64 {
    libm::log((1.0 + doc_count as f64) / (1.0 + doc_freq as f64)) + 1.0
}

fn idf_vector(vocab: &Vocabulary, doc_count: usize) -> Vec<f64> {
    vocab
        .doc_freq
        .iter()
        .map(|&df| smoothed_idf(doc_count, df))
        .collect()
}

/// Raw count times smoothed idf for every `(document, present token)` entry.
pub fn compute_tfidf(vocab: &Vocabulary, docs: &[Document]) -> Vec<Vec<f32>> {
    let idf = idf_vector(vocab, docs.len());
    docs.iter()
        .map(|doc| {
            doc.counts
                .iter()
                .map(|&(id, c)| (c as f64 * idf[id as usize]) as f32)
                .collect()
        })
        .collect()
}

/// Filtering rules applied during ingestion.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Tokens found in fewer documents are removed.
    pub min_df: u32,
    /// Tokens whose length (in chars) is at most this are removed.
    pub min_token_len: usize,
    pub stopwords: BTreeSet<String>,
    /// Keep only the most frequent tokens by total count (ties by vocabulary order).
    pub max_vocab: Option<usize>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_df: 1,
            min_token_len: 1,
            stopwords: BTreeSet::new(),
            max_vocab: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub input_docs: usize,
    /// Input positions of documents emptied by filtering.
    pub dropped: Vec<usize>,
}

/// Lowercases and splits on non-alphanumeric boundaries.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Tokenizes and filters raw documents into a corpus.
///
/// The vocabulary is ordered by the index of the first document a token
/// appears in, then by token string. `labels`, when given, must have one entry
/// per raw document.
pub fn ingest<S: AsRef<str>>(
    raw_docs: &[S],
    labels: Option<&[Option<u32>]>,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestReport)> {
    if raw_docs.is_empty() {
        return Err(Error::InvalidInput("no input documents".into()));
    }
    if opts.min_df < 1 {
        return Err(Error::InvalidInput("min_df must be at least 1".into()));
    }
    if let Some(labels) = labels {
        if labels.len() != raw_docs.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} documents",
                labels.len(),
                raw_docs.len()
            )));
        }
    }

    let tokenized: Vec<BTreeMap<String, u32>> = raw_docs
        .iter()
        .map(|raw| {
            let mut bag = BTreeMap::new();
            for tok in tokenize(raw.as_ref()) {
                if tok.chars().count() <= opts.min_token_len || opts.stopwords.contains(&tok) {
                    continue;
                }
                *bag.entry(tok).or_insert(0u32) += 1;
            }
            bag
        })
        .collect();

    // Candidate order: first-appearance document, then token string (the
    // per-document bag is already string ordered).
    let mut order: Vec<&str> = Vec::new();
    let mut stats: BTreeMap<&str, (u32, u64)> = BTreeMap::new();
    for bag in &tokenized {
        for (tok, &c) in bag {
            let entry = stats.entry(tok.as_str()).or_insert_with(|| {
                order.push(tok.as_str());
                (0, 0)
            });
            entry.0 += 1;
            entry.1 += c as u64;
        }
    }
    let mut kept: Vec<&str> = order
        .into_iter()
        .filter(|t| stats[t].0 >= opts.min_df)
        .collect();
    if let Some(max) = opts.max_vocab {
        if kept.len() > max {
            let mut ranked: Vec<usize> = (0..kept.len()).collect();
            ranked.sort_by(|&a, &b| stats[kept[b]].1.cmp(&stats[kept[a]].1).then(a.cmp(&b)));
            let keep: BTreeSet<usize> = ranked.into_iter().take(max).collect();
            kept = kept
                .into_iter()
                .enumerate()
                .filter(|(i, _)| keep.contains(i))
                .map(|(_, t)| t)
                .collect();
        }
    }
    let ids: BTreeMap<&str, u32> = kept.iter().enumerate().map(|(i, t)| (*t, i as u32)).collect();

    let mut docs = Vec::new();
    let mut report = IngestReport {
        input_docs: raw_docs.len(),
        dropped: Vec::new(),
    };
    for (i, bag) in tokenized.iter().enumerate() {
        let doc = Document::from_counts(
            bag.iter()
                .filter_map(|(t, &c)| ids.get(t.as_str()).map(|&id| (id, c))),
            labels.and_then(|l| l[i]),
        );
        if doc.counts.is_empty() {
            report.dropped.push(i);
        } else {
            docs.push(doc);
        }
    }
    if docs.is_empty() {
        return Err(Error::CorpusEmpty {
            dropped: report.dropped.len(),
        });
    }
    let tokens = kept.into_iter().map(String::from).collect();
    Ok((Corpus::new(tokens, docs)?, report))
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const fn new(train: f64, val: f64, test: f64) -> Self {
        SplitRatios { train, val, test }
    }

    fn validate(&self) -> Result<()> {
        for (name, r) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::InvalidRatio(format!("{name} ratio {r} is negative")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatio(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Split tags for `n` documents under a seeded shuffle. Split sizes are the
/// rounded cumulative fractions, so each is within one of its exact share.
pub fn split_tags_for(n: usize, ratios: SplitRatios, seed: u64) -> Result<Vec<SplitTag>> {
    ratios.validate()?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let train_end = libm::round(n as f64 * ratios.train) as usize;
    let val_end = (libm::round(n as f64 * (ratios.train + ratios.val)) as usize).clamp(train_end, n);
    let train_end = train_end.min(n);
    let mut tags = vec![SplitTag::Test; n];
    for (pos, &doc) in perm.iter().enumerate() {
        tags[doc] = if pos < train_end {
            SplitTag::Train
        } else if pos < val_end {
            SplitTag::Val
        } else {
            SplitTag::Test
        };
    }
    Ok(tags)
}

/// Parameters of the LDA generative process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub num_topics: usize,
    pub vocab_size: usize,
    pub num_docs: usize,
    pub doc_len: usize,
    /// Symmetric Dirichlet concentration over words, per topic.
    pub topic_sparsity: f64,
    /// Symmetric Dirichlet concentration over topics, per document.
    pub doc_sparsity: f64,
    pub seed: u64,
}

/// A sampled corpus together with the distributions that generated it.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Topic-word distributions, one row per topic, columns aligned with the
    /// corpus vocabulary.
    pub topic_word: Matrix,
    /// Per-document topic proportions.
    pub doc_topic: Matrix,
}

fn sample_dirichlet(rng: &mut ChaCha8Rng, concentration: f64, dim: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    // Very small concentrations can underflow every component; redraw.
    for _ in 0..64 {
        let draw: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draw.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return draw.into_iter().map(|g| g / sum).collect();
        }
    }
    let mut one_hot = vec![0.0; dim];
    one_hot[rng.random_range(0..dim)] = 1.0;
    one_hot
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn draw_categorical(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Samples a corpus from the LDA generative process.
///
/// Tokens are named `w000`, `w001`, ...; each document's label is its
/// dominant true topic. Words never drawn are removed from the vocabulary and
/// the returned topic-word rows are restricted to the surviving words and
/// renormalized.
pub fn synth_lda_corpus(params: &SynthParams) -> Result<SyntheticCorpus> {
    let SynthParams {
        num_topics,
        vocab_size,
        num_docs,
        doc_len,
        topic_sparsity,
        doc_sparsity,
        seed,
    } = *params;
    if num_topics == 0 || vocab_size == 0 || num_docs == 0 || doc_len == 0 {
        return Err(Error::InvalidInput("all synthetic corpus sizes must be at least 1".into()));
    }
    if !(topic_sparsity > 0.0) || !(doc_sparsity > 0.0) {
        return Err(Error::InvalidInput("Dirichlet concentrations must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics: Vec<Vec<f64>> = (0..num_topics)
        .map(|_| sample_dirichlet(&mut rng, topic_sparsity, vocab_size))
        .collect();
    let topic_cdfs: Vec<Vec<f64>> = topics.iter().map(|t| cumulative(t)).collect();

    let mut doc_topic = Matrix::zeros(num_docs, num_topics);
    let mut raw_docs = Vec::with_capacity(num_docs);
    for d in 0..num_docs {
        let theta = if num_topics == 1 {
            vec![1.0]
        } else {
            sample_dirichlet(&mut rng, doc_sparsity, num_topics)
        };
        doc_topic.row_mut(d).copy_from_slice(&theta);
        let theta_cdf = cumulative(&theta);
        let mut counts = vec![0u32; vocab_size];
        for _ in 0..doc_len {
            let z = draw_categorical(&mut rng, &theta_cdf);
            let w = draw_categorical(&mut rng, &topic_cdfs[z]);
            counts[w] += 1;
        }
        let label = crate::math::argsort_desc(&theta)[0] as u32;
        raw_docs.push((counts, label));
    }

    let mut used = vec![false; vocab_size];
    for (counts, _) in &raw_docs {
        for (w, &c) in counts.iter().enumerate() {
            used[w] |= c > 0;
        }
    }
    let mut remap = vec![u32::MAX; vocab_size];
    let mut next = 0u32;
    for w in 0..vocab_size {
        if used[w] {
            remap[w] = next;
            next += 1;
        }
    }
    let width = format!("{}", vocab_size.saturating_sub(1)).len().max(3);
    let tokens: Vec<String> = (0..vocab_size)
        .filter(|&w| used[w])
        .map(|w| format!("w{w:0width$}"))
        .collect();
    let docs: Vec<Document> = raw_docs
        .iter()
        .map(|(counts, label)| {
            Document::from_counts(
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(w, &c)| (remap[w], c)),
                Some(*label),
            )
        })
        .collect();

    let kept = next as usize;
    let mut topic_word = Matrix::zeros(num_topics, kept);
    for (t, row) in topics.iter().enumerate() {
        let mass: f64 = (0..vocab_size).filter(|&w| used[w]).map(|w| row[w]).sum();
        for w in (0..vocab_size).filter(|&w| used[w]) {
            let v = if mass > 0.0 { row[w] / mass } else { 1.0 / kept as f64 };
            topic_word.set(t, remap[w] as usize, v);
        }
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(tokens, docs)?,
        topic_word,
        doc_topic,
    })
}
