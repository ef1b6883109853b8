//! Joint training of the topic model with the contrastive objective, plus
//! multi-seed sweeps over `k` and over loss variants.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::contrastive::{beta_at, init_beta, variant_grads, variant_loss, ContrastiveConfig, LossVariant};
use crate::corpus::{Corpus, SplitTag};
use crate::error::{Error, Result};
use crate::eval::{covariate_vector, mean_npmi};
use crate::math::{mean, sample_std, softmax};
use crate::ntm::{elbo_loss, ModelDims, ModelParams, UpstreamGrads};
use crate::sampler::{
    importance_scores, random_doc_negative, sample_rng, topic_based_pair, word_based_pair, zero_sampling_pair,
    SamplerConfig, SamplingStrategy,
};

/// Seeds used by sweeps when none are given.
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

const NOISE_SALT: u64 = 0x6E6F_6973_6500_0001;
const SHUFFLE_STREAM: u64 = 1;
const BETA_BATCH_STREAM: u64 = 2;
const AUDIT_STEP: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub topics: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub contrastive: ContrastiveConfig,
    /// Feed one-hot document labels to the encoder.
    pub covariates: bool,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip; `0` disables clipping.
    pub grad_clip: f64,
    /// Top words per topic for coherence.
    pub top_n: usize,
    /// Epochs between validation NPMI evaluations; `0` disables them.
    pub val_every: usize,
    /// Split providing NPMI reference statistics for reported scores.
    pub npmi_reference: SplitTag,
    /// Initialize the decoder bias to smoothed log word frequencies.
    pub background_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            topics: 20,
            hidden: 256,
            epochs: 50,
            batch_size: 200,
            learning_rate: 0.002,
            seed: 0,
            sampler: SamplerConfig::default(),
            contrastive: ContrastiveConfig::default(),
            covariates: false,
            optimizer: Optimizer::Adam,
            grad_clip: 5.0,
            top_n: 10,
            val_every: 1,
            npmi_reference: SplitTag::Train,
            background_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, vocab: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("topics", self.topics),
            ("hidden", self.hidden),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive".into());
        }
        if !(self.grad_clip >= 0.0) {
            return bad("grad_clip must be non-negative".into());
        }
        if self.top_n < 2 {
            return bad("top_n must be at least 2".into());
        }
        if self.sampler.strategy == SamplingStrategy::RandomDoc
            && self.contrastive.variant == LossVariant::PositiveOnly
        {
            return bad("random_doc produces no positive sample; positive_only is unavailable".into());
        }
        self.sampler.validate(vocab, self.topics)?;
        self.contrastive.validate()
    }

    /// Loss variant actually optimized: `random_doc` has no positive sample,
    /// so the full loss falls back to the negative-only term.
    pub fn effective_variant(&self) -> LossVariant {
        match (self.sampler.strategy, self.contrastive.variant) {
            (SamplingStrategy::RandomDoc, LossVariant::Full) => LossVariant::NegativeOnly,
            (_, v) => v,
        }
    }

    fn effective_contrastive(&self) -> ContrastiveConfig {
        ContrastiveConfig {
            variant: self.effective_variant(),
            ..self.contrastive.clone()
        }
    }

    pub fn dims(&self, corpus: &Corpus) -> ModelDims {
        ModelDims {
            vocab: corpus.vocab_size(),
            topics: self.topics,
            hidden: self.hidden,
            covariates: if self.covariates { corpus.num_labels() } else { 0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// One optimizer step.
    Step,
    /// Epoch averages.
    Epoch,
    /// Noise-free loss of the final parameters on the held batch.
    Audit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub step: u64,
    pub recon: f64,
    pub kl: f64,
    /// Weighted contrastive term, in minimized form.
    pub contrastive: f64,
    pub total: f64,
    pub beta: f64,
    pub val_npmi: Option<f64>,
    pub wall_ms: u64,
}

/// Callbacks invoked during training.
pub trait TrainHooks {
    fn on_record(&mut self, _record: &MetricsRecord) {}
    /// Milliseconds since some fixed origin; the default keeps logs
    /// reproducible by always reporting 0.
    fn wall_ms(&mut self) -> u64 {
        0
    }
}

impl TrainHooks for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub metrics: Vec<MetricsRecord>,
    pub beta0: f64,
    pub total_steps: u64,
}

/// Per-document loss terms; `total = recon + kl + contrastive`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub recon: f64,
    pub kl: f64,
    pub contrastive: f64,
    pub total: f64,
}

impl Objective {
    fn new(recon: f64, kl: f64, contrastive: f64) -> Self {
        Objective {
            recon,
            kl,
            contrastive,
            total: recon + kl + contrastive,
        }
    }

    fn add(&mut self, o: &Objective) {
        self.recon += o.recon;
        self.kl += o.kl;
        self.contrastive += o.contrastive;
        self.total += o.total;
    }

    fn scaled(&self, s: f64) -> Objective {
        Objective::new(self.recon * s, self.kl * s, self.contrastive * s)
    }
}

/// Fixed positive and negative inputs for one prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x_pos: Vec<f64>,
    pub x_neg: Vec<f64>,
}

/// Joint objective of one document: reconstruction, KL, and the weighted
/// contrastive term of the sample encodings. Sample inputs are constants.
pub fn document_objective(
    params: &ModelParams,
    x: &[f64],
    covariate: Option<&[f64]>,
    noise: &[f64],
    samples: Option<&Samples>,
    config: &ContrastiveConfig,
    beta: f64,
) -> Result<Objective> {
    let fwd = params.forward(x, covariate, noise)?;
    let (recon, kl) = elbo_loss(x, &fwd.recon_probs, &fwd.state.mu, &fwd.state.logvar)?;
    let contrastive = match samples {
        Some(s) if config.variant != LossVariant::ElboOnly => {
            let tp = params.mean_theta(&s.x_pos, covariate)?;
            let tn = params.mean_theta(&s.x_neg, covariate)?;
            config.weight * variant_loss(config, &fwd.state.theta, &tp, &tn, beta)
        }
        _ => 0.0,
    };
    Ok(Objective::new(recon, kl, contrastive))
}

/// [`document_objective`] with its gradient accumulated into `grads`.
#[allow(clippy::too_many_arguments)]
pub fn document_gradient(
    params: &ModelParams,
    x: &[f64],
    covariate: Option<&[f64]>,
    noise: &[f64],
    samples: Option<&Samples>,
    config: &ContrastiveConfig,
    beta: f64,
    grads: &mut ModelParams,
) -> Result<Objective> {
    let fwd = params.forward(x, covariate, noise)?;
    doc_gradient_from(params, x, covariate, &fwd, samples, config, beta, grads)
}

#[allow(clippy::too_many_arguments)]
fn doc_gradient_from(
    params: &ModelParams,
    x: &[f64],
    covariate: Option<&[f64]>,
    fwd: &crate::ntm::ForwardPass,
    samples: Option<&Samples>,
    config: &ContrastiveConfig,
    beta: f64,
    grads: &mut ModelParams,
) -> Result<Objective> {
    let (recon, kl) = elbo_loss(x, &fwd.recon_probs, &fwd.state.mu, &fwd.state.logvar)?;
    let mut contrastive = 0.0;
    let mut grad_theta = None;
    if let Some(s) = samples.filter(|_| config.variant != LossVariant::ElboOnly) {
        let ep = params.encode_cached(&s.x_pos, covariate)?;
        let en = params.encode_cached(&s.x_neg, covariate)?;
        let (tp, tn) = (softmax(&ep.mu), softmax(&en.mu));
        let g = variant_grads(config, &fwd.state.theta, &tp, &tn, beta);
        let w = config.weight;
        contrastive = w * g.loss;
        let scale = |v: &[f64]| v.iter().map(|x| x * w).collect::<Vec<f64>>();
        if config.variant.uses_positive() {
            params.backward_mean_path(&ep, &scale(&g.theta_pos), grads)?;
        }
        if config.variant.uses_negative() {
            params.backward_mean_path(&en, &scale(&g.theta_neg), grads)?;
        }
        grad_theta = Some(scale(&g.theta));
    }
    params.backward(
        x,
        fwd,
        &UpstreamGrads {
            recon: 1.0,
            kl: 1.0,
            theta: grad_theta.as_deref(),
        },
        grads,
    )?;
    Ok(Objective::new(recon, kl, contrastive))
}

/// Corpus-level state shared by every sample construction.
struct SampleContext<'a> {
    corpus: &'a Corpus,
    idf: Vec<f64>,
    pool: Vec<usize>,
    sampler: SamplerConfig,
    seed: u64,
}

impl SampleContext<'_> {
    /// Builds the sample pair for `doc` from the current reconstruction.
    /// `Ok(None)` marks a document too short to sample from.
    fn samples(
        &self,
        params: &ModelParams,
        doc: usize,
        x: &[f64],
        theta: &[f64],
        recon_probs: &[f64],
        step: u64,
    ) -> Result<Option<Samples>> {
        let d = self.corpus.doc(doc);
        let total = d.total() as f64;
        let recon: Vec<f64> = recon_probs.iter().map(|p| p * total).collect();
        let scores = || importance_scores(d, self.corpus.tfidf_row(doc), &self.idf, self.sampler.importance);
        let k = self.sampler.k;
        let pair = match self.sampler.strategy {
            SamplingStrategy::WordBased => word_based_pair(x, &recon, &scores(), k),
            SamplingStrategy::ZeroSampling => zero_sampling_pair(x, &scores(), k),
            SamplingStrategy::TopicBased => {
                topic_based_pair(x, &recon, theta, &params.topic_word, self.sampler.topics_m, k)
            }
            SamplingStrategy::RandomDoc => {
                let mut rng = sample_rng(self.seed, step, doc);
                let other = random_doc_negative(&self.pool, doc, &mut rng)?;
                return Ok(Some(Samples {
                    x_pos: x.to_vec(),
                    x_neg: self.corpus.doc(other).to_dense(x.len()),
                }));
            }
        };
        match pair {
            Ok(p) => Ok(Some(Samples {
                x_pos: p.x_pos,
                x_neg: p.x_neg,
            })),
            Err(Error::SamplerDegenerate) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn noise_for(seed: u64, step: u64, doc: usize, topics: usize) -> Vec<f64> {
    let mut rng = sample_rng(seed ^ NOISE_SALT, step, doc);
    (0..topics).map(|_| StandardNormal.sample(&mut rng)).collect()
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

const MOMENTUM: f64 = 0.9;
const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    fn new(kind: Optimizer, lr: f64, like: &ModelParams) -> Self {
        OptimizerState {
            kind,
            lr,
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.t += 1;
        let lr = self.lr;
        let (c1, c2) = (
            1.0 - libm::pow(ADAM_B1, self.t as f64),
            1.0 - libm::pow(ADAM_B2, self.t as f64),
        );
        let kind = self.kind;
        let pts = params.tensors_mut();
        let mts = self.m.tensors_mut();
        let vts = self.v.tensors_mut();
        for (((p, g), m), v) in pts.into_iter().zip(grads.tensors()).zip(mts).zip(vts) {
            for i in 0..p.len() {
                match kind {
                    Optimizer::Sgd => p[i] -= lr * g[i],
                    Optimizer::Momentum => {
                        m[i] = MOMENTUM * m[i] + g[i];
                        p[i] -= lr * m[i];
                    }
                    Optimizer::Adam => {
                        m[i] = ADAM_B1 * m[i] + (1.0 - ADAM_B1) * g[i];
                        v[i] = ADAM_B2 * v[i] + (1.0 - ADAM_B2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / (libm::sqrt(v[i] / c2) + ADAM_EPS);
                    }
                }
            }
        }
    }
}

fn background_bias(corpus: &Corpus, docs: &[usize]) -> Vec<f64> {
    let v = corpus.vocab_size();
    let mut counts = vec![1.0; v];
    for &d in docs {
        for &(id, c) in corpus.doc(d).counts() {
            counts[id as usize] += c as f64;
        }
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| libm::log(c / total)).collect()
}

fn covariate(corpus: &Corpus, dims: ModelDims, doc: usize, config: &TrainConfig) -> Option<Vec<f64>> {
    covariate_vector(corpus.doc(doc).label, dims.covariates, config.covariates)
}

/// Documents of the held batch used for the final loss audit: the first
/// `batch_size` validation documents, or training documents when the
/// validation split is empty.
pub fn audit_indices(corpus: &Corpus, config: &TrainConfig) -> Vec<usize> {
    let mut docs = corpus.indices(SplitTag::Val);
    if docs.is_empty() {
        docs = corpus.indices(SplitTag::Train);
    }
    docs.truncate(config.batch_size);
    docs
}

/// Mean noise-free objective of `params` over `docs` at a given `beta`.
///
/// Samples come from the noise-free reconstruction; the random-document
/// baseline draws its negatives from a fixed audit stream.
pub fn evaluate_loss(params: &ModelParams, corpus: &Corpus, config: &TrainConfig, docs: &[usize], beta: f64) -> Result<Objective> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("no documents to evaluate".into()));
    }
    let dims = params.dims();
    let ctx = SampleContext {
        corpus,
        idf: corpus.idf(),
        pool: corpus.indices(SplitTag::Train),
        sampler: config.sampler.clone(),
        seed: config.seed,
    };
    let cfg = config.effective_contrastive();
    let zero = vec![0.0; dims.topics];
    let mut sum = Objective::default();
    for &d in docs {
        let x = corpus.doc(d).to_dense(dims.vocab);
        let cov = covariate(corpus, dims, d, config);
        let fwd = params.forward(&x, cov.as_deref(), &zero)?;
        let samples = if cfg.variant == LossVariant::ElboOnly {
            None
        } else {
            ctx.samples(params, d, &x, &fwd.state.theta, &fwd.recon_probs, AUDIT_STEP)?
        };
        sum.add(&document_objective(params, &x, cov.as_deref(), &zero, samples.as_ref(), &cfg, beta)?);
    }
    Ok(sum.scaled(1.0 / docs.len() as f64))
}

fn estimate_beta0(
    params: &ModelParams,
    ctx: &SampleContext<'_>,
    config: &TrainConfig,
    dims: ModelDims,
    batch: &[usize],
) -> Result<f64> {
    let zero = vec![0.0; dims.topics];
    let mut triples = Vec::new();
    for &d in batch {
        let x = ctx.corpus.doc(d).to_dense(dims.vocab);
        let cov = covariate(ctx.corpus, dims, d, config);
        let fwd = params.forward(&x, cov.as_deref(), &zero)?;
        if let Some(s) = ctx.samples(params, d, &x, &fwd.state.theta, &fwd.recon_probs, 0)? {
            let tp = params.mean_theta(&s.x_pos, cov.as_deref())?;
            let tn = params.mean_theta(&s.x_neg, cov.as_deref())?;
            triples.push((fwd.state.theta, tp, tn));
        }
    }
    if triples.is_empty() {
        return Err(Error::InvalidInput("no document in the beta batch can be sampled".into()));
    }
    init_beta(triples.iter().map(|(a, b, c)| (a.as_slice(), b.as_slice(), c.as_slice())))
}

pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<TrainOutput> {
    train_with_hooks(corpus, config, &mut ())
}

pub fn train_with_hooks(corpus: &Corpus, config: &TrainConfig, hooks: &mut dyn TrainHooks) -> Result<TrainOutput> {
    config.validate(corpus.vocab_size())?;
    let train_docs = corpus.indices(SplitTag::Train);
    if train_docs.is_empty() {
        return Err(Error::InvalidInput("corpus has no training documents".into()));
    }
    if config.sampler.strategy == SamplingStrategy::RandomDoc && train_docs.len() < 2 {
        return Err(Error::TooFewDocuments);
    }
    let dims = config.dims(corpus);
    let cfg = config.effective_contrastive();
    let val_docs = corpus.indices(SplitTag::Val);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(dims, &mut rng);
    if config.background_bias {
        params.word_bias = background_bias(corpus, &train_docs);
    }
    params.round_to_f32();

    let ctx = SampleContext {
        corpus,
        idf: corpus.idf(),
        pool: train_docs.clone(),
        sampler: config.sampler.clone(),
        seed: config.seed,
    };

    let batches_per_epoch = train_docs.len().div_ceil(config.batch_size);
    let total_steps = cfg
        .total_steps
        .unwrap_or((config.epochs * batches_per_epoch) as u64);
    let beta0 = match (cfg.beta0, cfg.fixed_beta) {
        (Some(b), _) => b,
        (None, Some(_)) => 0.0,
        (None, None) if cfg.variant == LossVariant::Full => {
            let mut order = train_docs.clone();
            let mut brng = ChaCha8Rng::seed_from_u64(config.seed);
            brng.set_stream(BETA_BATCH_STREAM);
            order.shuffle(&mut brng);
            order.truncate(config.batch_size);
            estimate_beta0(&params, &ctx, config, dims, &order)?
        }
        (None, None) => 0.0,
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut metrics = Vec::new();
    let mut order = train_docs.clone();
    let mut step: u64 = 0;
    let mut grads = params.zeros_like();
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, &params);
    let mut beta = cfg.fixed_beta.unwrap_or(beta0);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_sum = Objective::default();
        for chunk in order.chunks(config.batch_size) {
            // Fixed reduction order within a batch.
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            step += 1;
            beta = cfg.fixed_beta.unwrap_or_else(|| beta_at(step, total_steps, beta0));
            for g in grads.tensors_mut() {
                g.fill(0.0);
            }
            let mut sum = Objective::default();
            let mut per_doc = Vec::with_capacity(batch.len());
            for &d in &batch {
                let x = corpus.doc(d).to_dense(dims.vocab);
                let cov = covariate(corpus, dims, d, config);
                let noise = noise_for(config.seed, step, d, dims.topics);
                let fwd = params.forward(&x, cov.as_deref(), &noise)?;
                let samples = if cfg.variant == LossVariant::ElboOnly {
                    None
                } else {
                    ctx.samples(&params, d, &x, &fwd.state.theta, &fwd.recon_probs, step)?
                };
                let obj = doc_gradient_from(&params, &x, cov.as_deref(), &fwd, samples.as_ref(), &cfg, beta, &mut grads)?;
                per_doc.push((d, obj.total));
                sum.add(&obj);
            }
            let inv = 1.0 / batch.len() as f64;
            let mean_obj = sum.scaled(inv);
            if !mean_obj.total.is_finite() || !grads.is_finite() {
                let docs: Vec<String> = per_doc.iter().map(|(d, l)| format!("{d}:{l}")).collect();
                return Err(Error::Divergence {
                    epoch,
                    step,
                    diagnostics: format!(
                        "recon={} kl={} contrastive={} beta={beta} per-document totals [{}]",
                        mean_obj.recon,
                        mean_obj.kl,
                        mean_obj.contrastive,
                        docs.join(", ")
                    ),
                });
            }
            let norm = libm::sqrt(grads.squared_norm()) * inv;
            let mut scale = inv;
            if config.grad_clip > 0.0 && norm > config.grad_clip {
                scale *= config.grad_clip / norm;
            }
            for g in grads.tensors_mut() {
                g.iter_mut().for_each(|x| *x *= scale);
            }
            opt.step(&mut params, &grads);
            params.round_to_f32();
            if !params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step,
                    diagnostics: "parameters became non-finite after the update".into(),
                });
            }
            epoch_sum.add(&mean_obj.scaled(batch.len() as f64));
            let rec = record(Phase::Step, epoch, step, &mean_obj, beta, None, hooks.wall_ms());
            hooks.on_record(&rec);
            metrics.push(rec);
        }
        let val_npmi = if config.val_every > 0 && (epoch + 1) % config.val_every == 0 && !val_docs.is_empty() {
            Some(mean_npmi(&params, corpus, &val_docs, config.top_n)?)
        } else {
            None
        };
        let avg = epoch_sum.scaled(1.0 / train_docs.len() as f64);
        let rec = record(Phase::Epoch, epoch, step, &avg, beta, val_npmi, hooks.wall_ms());
        hooks.on_record(&rec);
        metrics.push(rec);
    }

    let audit = audit_indices(corpus, config);
    let obj = evaluate_loss(&params, corpus, config, &audit, beta)?;
    let rec = record(Phase::Audit, config.epochs.saturating_sub(1), step, &obj, beta, None, hooks.wall_ms());
    hooks.on_record(&rec);
    metrics.push(rec);

    Ok(TrainOutput {
        params,
        metrics,
        beta0,
        total_steps,
    })
}

fn record(phase: Phase, epoch: usize, step: u64, o: &Objective, beta: f64, val_npmi: Option<f64>, wall_ms: u64) -> MetricsRecord {
    MetricsRecord {
        phase,
        epoch,
        step,
        recon: o.recon,
        kl: o.kl,
        contrastive: o.contrastive,
        total: o.total,
        beta,
        val_npmi,
        wall_ms,
    }
}

/// Mean top-word NPMI of trained parameters against the configured
/// reference split.
pub fn model_npmi(params: &ModelParams, corpus: &Corpus, config: &TrainConfig) -> Result<f64> {
    let docs = corpus.indices(config.npmi_reference);
    if docs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "reference split {} is empty",
            config.npmi_reference.as_str()
        )));
    }
    mean_npmi(params, corpus, &docs, config.top_n)
}

/// One row of a sweep: mean and sample standard deviation of per-seed NPMI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub seeds: Vec<u64>,
    pub npmi: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl SweepRow {
    fn new(label: String, seeds: &[u64], npmi: Vec<f64>) -> Self {
        let std = if npmi.len() > 1 { sample_std(&npmi) } else { 0.0 };
        SweepRow {
            label,
            seeds: seeds.to_vec(),
            mean: mean(&npmi),
            std,
            npmi,
        }
    }
}

/// Trains `config` once per seed and returns each run's NPMI.
pub fn run_seeds(corpus: &Corpus, config: &TrainConfig, seeds: &[u64]) -> Result<Vec<f64>> {
    seeds
        .iter()
        .map(|&seed| {
            let cfg = TrainConfig {
                seed,
                ..config.clone()
            };
            let out = train(corpus, &cfg)?;
            model_npmi(&out.params, corpus, &cfg)
        })
        .collect()
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    Ok(())
}

/// One row per substituted-token count `k`.
pub fn sweep_k(corpus: &Corpus, base: &TrainConfig, k_values: &[usize], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if k_values.is_empty() {
        return Err(Error::InvalidInput("k_values is empty".into()));
    }
    check_seeds(seeds)?;
    k_values
        .iter()
        .map(|&k| {
            let mut cfg = base.clone();
            cfg.sampler.k = k;
            Ok(SweepRow::new(format!("k={k}"), seeds, run_seeds(corpus, &cfg, seeds)?))
        })
        .collect()
}

/// One row per loss variant, all sharing the corpus and seeds.
pub fn run_ablation(corpus: &Corpus, base: &TrainConfig, seeds: &[u64]) -> Result<Vec<SweepRow>> {
    check_seeds(seeds)?;
    LossVariant::ALL
        .iter()
        .map(|&variant| {
            let mut cfg = base.clone();
            cfg.contrastive.variant = variant;
            let label = String::from(variant.as_str());
            Ok(SweepRow::new(label, seeds, run_seeds(corpus, &cfg, seeds)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_lda_corpus, SplitRatios, SynthParams};

    fn small_corpus() -> Corpus {
        let mut c = synth_lda_corpus(&SynthParams {
            num_topics: 3,
            vocab_size: 40,
            num_docs: 60,
            doc_len: 30,
            topic_sparsity: 0.1,
            doc_sparsity: 0.2,
            seed: 7,
        })
        .unwrap()
        .corpus;
        c.split(SplitRatios::new(0.7, 0.15, 0.15), 7).unwrap();
        c
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            topics: 3,
            hidden: 8,
            epochs: 2,
            batch_size: 16,
            sampler: SamplerConfig {
                k: 3,
                ..SamplerConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let c = small_corpus();
        let a = train(&c, &small_config()).unwrap();
        let b = train(&c, &small_config()).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn elbo_only_has_no_contrastive_term() {
        let c = small_corpus();
        let mut cfg = small_config();
        cfg.contrastive.variant = LossVariant::ElboOnly;
        let out = train(&c, &cfg).unwrap();
        assert!(out.metrics.iter().all(|r| r.contrastive == 0.0));
    }

    #[test]
    fn logged_beta_follows_schedule() {
        let c = small_corpus();
        let out = train(&c, &small_config()).unwrap();
        assert!(out.beta0 > 0.0);
        for r in out.metrics.iter().filter(|r| r.phase == Phase::Step) {
            assert!((r.beta - beta_at(r.step, out.total_steps, out.beta0)).abs() < 1e-12);
        }
        let steps = out.metrics.iter().filter(|r| r.phase == Phase::Step).count() as u64;
        assert_eq!(steps, out.total_steps);
    }

    #[test]
    fn audit_matches_recomputation() {
        let c = small_corpus();
        let cfg = small_config();
        let out = train(&c, &cfg).unwrap();
        let audit = out.metrics.last().unwrap();
        assert_eq!(audit.phase, Phase::Audit);
        let again = evaluate_loss(&out.params, &c, &cfg, &audit_indices(&c, &cfg), audit.beta).unwrap();
        assert!((again.total - audit.total).abs() < 1e-6);
    }

    #[test]
    fn every_strategy_trains() {
        let c = small_corpus();
        for strategy in [
            SamplingStrategy::WordBased,
            SamplingStrategy::ZeroSampling,
            SamplingStrategy::RandomDoc,
            SamplingStrategy::TopicBased,
        ] {
            let mut cfg = small_config();
            cfg.sampler.strategy = strategy;
            cfg.epochs = 1;
            let out = train(&c, &cfg).unwrap();
            assert!(out.params.is_finite(), "{}", strategy.as_str());
        }
    }

    #[test]
    fn random_doc_rejects_positive_only() {
        let mut cfg = small_config();
        cfg.sampler.strategy = SamplingStrategy::RandomDoc;
        cfg.contrastive.variant = LossVariant::PositiveOnly;
        assert!(matches!(cfg.validate(40), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let c = small_corpus();
        let mut cfg = small_config();
        cfg.learning_rate = f64::MAX;
        cfg.optimizer = Optimizer::Sgd;
        cfg.grad_clip = 0.0;
        assert!(matches!(train(&c, &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = small_corpus();
        let cfg = small_config();
        let dims = cfg.dims(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ModelParams::init(dims, &mut rng);
        params.word_bias = background_bias(&c, &c.indices(SplitTag::Train));
        let x = c.doc(0).to_dense(dims.vocab);
        let noise = noise_for(1, 1, 0, dims.topics);
        let samples = Samples {
            x_pos: x.iter().map(|v| v * 0.5).collect(),
            x_neg: x.iter().rev().copied().collect(),
        };
        let ccfg = ContrastiveConfig::default();
        let mut grads = params.zeros_like();
        document_gradient(&params, &x, None, &noise, Some(&samples), &ccfg, 1.3, &mut grads).unwrap();
        let f = |p: &ModelParams| document_objective(p, &x, None, &noise, Some(&samples), &ccfg, 1.3).unwrap().total;
        let h = 1e-5;
        for (ti, g) in grads.tensors().iter().enumerate() {
            let (mut num2, mut diff2, mut ana2) = (0.0, 0.0, 0.0);
            for i in 0..g.len() {
                let mut p = params.clone();
                p.tensors_mut()[ti][i] += h;
                let up = f(&p);
                p.tensors_mut()[ti][i] -= 2.0 * h;
                let down = f(&p);
                let n = (up - down) / (2.0 * h);
                num2 += n * n;
                ana2 += g[i] * g[i];
                diff2 += (n - g[i]) * (n - g[i]);
            }
            let rel = libm::sqrt(diff2) / libm::sqrt(num2.max(ana2)).max(1e-12);
            assert!(rel < 1e-5, "tensor {ti}: {rel}");
        }
    }

    #[test]
    fn sweeps_have_one_row_per_setting() {
        let c = small_corpus();
        let mut cfg = small_config();
        cfg.epochs = 1;
        let rows = sweep_k(&c, &cfg, &[2], &[0, 1]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].npmi, run_seeds(&c, &{
            let mut k2 = cfg.clone();
            k2.sampler.k = 2;
            k2
        }, &[0, 1]).unwrap());
        let abl = run_ablation(&c, &cfg, &[0, 1]).unwrap();
        assert_eq!(abl.iter().map(|r| r.label.as_str()).collect::<Vec<_>>(), ["full", "positive_only", "negative_only", "elbo_only"]);
        assert!(sweep_k(&c, &cfg, &[], &[0]).is_err());
    }
}
