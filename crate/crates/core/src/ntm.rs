//! VAE topic model over bag-of-words input.
//!
//! One softplus hidden layer feeds Gaussian mean / log-variance heads; the
//! reparameterized draw is mapped to topic proportions by a softmax, and the
//! decoder is `softmax(theta^T W + b)` over the vocabulary.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{argsort_desc, dot, sigmoid, softmax, softmax_backward, softplus, Matrix};

pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;
/// Probabilities are floored here before taking logs in the reconstruction term.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub topics: usize,
    pub hidden: usize,
    /// Width of the one-hot covariate appended to the encoder input (0 if unused).
    pub covariates: usize,
}

/// Every trainable tensor of the model. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    /// `H x (V + C)`
    pub enc_hidden: Matrix,
    pub enc_hidden_bias: Vec<f64>,
    /// `T x H`
    pub mu_head: Matrix,
    pub mu_bias: Vec<f64>,
    /// `T x H`
    pub logvar_head: Matrix,
    pub logvar_bias: Vec<f64>,
    /// `T x V`
    pub topic_word: Matrix,
    pub word_bias: Vec<f64>,
}

/// Tensor names in storage order.
pub const TENSOR_NAMES: [&str; 8] = [
    "enc_hidden",
    "enc_hidden_bias",
    "mu_head",
    "mu_bias",
    "logvar_head",
    "logvar_bias",
    "topic_word",
    "word_bias",
];

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let ModelDims {
            vocab: v,
            topics: t,
            hidden: h,
            covariates: c,
        } = dims;
        ModelParams {
            dims,
            enc_hidden: Matrix::zeros(h, v + c),
            enc_hidden_bias: vec![0.0; h],
            mu_head: Matrix::zeros(t, h),
            mu_bias: vec![0.0; t],
            logvar_head: Matrix::zeros(t, h),
            logvar_bias: vec![0.0; t],
            topic_word: Matrix::zeros(t, v),
            word_bias: vec![0.0; v],
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let fill = |m: &mut Matrix, rng: &mut R| {
            let a = libm::sqrt(6.0 / (m.rows() + m.cols()) as f64);
            for w in m.as_mut_slice() {
                *w = rng.random_range(-a..a);
            }
        };
        fill(&mut p.enc_hidden, rng);
        fill(&mut p.mu_head, rng);
        fill(&mut p.logvar_head, rng);
        fill(&mut p.topic_word, rng);
        p
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    /// `(rows, cols)` of each tensor in [`TENSOR_NAMES`] order; vectors are `(len, 1)`.
    pub fn shapes(dims: ModelDims) -> [(usize, usize); 8] {
        let ModelDims {
            vocab: v,
            topics: t,
            hidden: h,
            covariates: c,
        } = dims;
        [
            (h, v + c),
            (h, 1),
            (t, h),
            (t, 1),
            (t, h),
            (t, 1),
            (t, v),
            (v, 1),
        ]
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.enc_hidden.as_slice(),
            &self.enc_hidden_bias,
            self.mu_head.as_slice(),
            &self.mu_bias,
            self.logvar_head.as_slice(),
            &self.logvar_bias,
            self.topic_word.as_slice(),
            &self.word_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.enc_hidden.as_mut_slice(),
            &mut self.enc_hidden_bias,
            self.mu_head.as_mut_slice(),
            &mut self.mu_bias,
            self.logvar_head.as_mut_slice(),
            &mut self.logvar_bias,
            self.topic_word.as_mut_slice(),
            &mut self.word_bias,
        ]
    }

    /// Rebuilds parameters from flat tensors in [`TENSOR_NAMES`] order.
    pub fn from_tensors(dims: ModelDims, tensors: [Vec<f64>; 8]) -> Result<Self> {
        let mut p = Self::zeros(dims);
        for ((dst, src), name) in p.tensors_mut().into_iter().zip(tensors).zip(TENSOR_NAMES) {
            if dst.len() != src.len() {
                return Err(Error::Shape(format!(
                    "tensor {name}: expected {} values, got {}",
                    dst.len(),
                    src.len()
                )));
            }
            dst.copy_from_slice(&src);
        }
        Ok(p)
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum()
    }

    /// Rounds every entry to the nearest `f32`, so that checkpoints stored as
    /// 32-bit floats reproduce the parameters exactly.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x = *x as f32 as f64;
            }
        }
    }

    /// Token ids ordered by descending `topic_word[topic]`, ties by ascending id.
    /// `n` larger than the vocabulary returns every id.
    pub fn top_words(&self, topic: usize, n: usize) -> Result<Vec<u32>> {
        if topic >= self.dims.topics {
            return Err(Error::IndexOutOfRange {
                index: topic,
                len: self.dims.topics,
            });
        }
        Ok(argsort_desc(self.topic_word.row(topic))
            .into_iter()
            .take(n)
            .map(|i| i as u32)
            .collect())
    }

    /// Word distribution of each topic: `softmax(topic_word[t] + word_bias)`.
    pub fn topic_distributions(&self) -> Matrix {
        let mut m = self.topic_word.clone();
        for t in 0..m.rows() {
            for (w, b) in m.row_mut(t).iter_mut().zip(&self.word_bias) {
                *w += b;
            }
        }
        m.row_softmax()
    }

    fn check_input(&self, x: &[f64], covariate: Option<&[f64]>) -> Result<Vec<(usize, f64)>> {
        let v = self.dims.vocab;
        if x.len() != v {
            return Err(Error::Shape(format!("input has length {}, vocabulary is {v}", x.len())));
        }
        let mut nz = Vec::new();
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_finite() || xi < 0.0 {
                return Err(Error::InvalidInput(format!("input entry {i} is {xi}")));
            }
            if xi != 0.0 {
                nz.push((i, xi));
            }
        }
        match covariate {
            Some(c) if c.len() != self.dims.covariates => {
                return Err(Error::Shape(format!(
                    "covariate has length {}, model expects {}",
                    c.len(),
                    self.dims.covariates
                )))
            }
            Some(c) => {
                for (j, &cj) in c.iter().enumerate() {
                    if !cj.is_finite() {
                        return Err(Error::InvalidInput(format!("covariate entry {j} is {cj}")));
                    }
                    if cj != 0.0 {
                        nz.push((v + j, cj));
                    }
                }
            }
            None => {}
        }
        Ok(nz)
    }

    /// Encoder forward pass, keeping the activations needed for backward.
    pub fn encode_cached(&self, x: &[f64], covariate: Option<&[f64]>) -> Result<EncoderCache> {
        let input = self.check_input(x, covariate)?;
        let ModelDims { topics: t, hidden: h, .. } = self.dims;
        let mut pre = self.enc_hidden_bias.clone();
        for (r, p) in pre.iter_mut().enumerate() {
            let row = self.enc_hidden.row(r);
            *p += input.iter().map(|&(i, xi)| row[i] * xi).sum::<f64>();
        }
        let hidden: Vec<f64> = pre.iter().map(|&a| softplus(a)).collect();
        let mut mu = self.mu_bias.clone();
        let mut logvar = self.logvar_bias.clone();
        let mut logvar_active = vec![true; t];
        for k in 0..t {
            mu[k] += dot(self.mu_head.row(k), &hidden);
            let raw = logvar[k] + dot(self.logvar_head.row(k), &hidden);
            logvar_active[k] = raw > LOGVAR_MIN && raw < LOGVAR_MAX;
            logvar[k] = raw.clamp(LOGVAR_MIN, LOGVAR_MAX);
        }
        debug_assert_eq!(hidden.len(), h);
        Ok(EncoderCache {
            input,
            pre,
            hidden,
            mu,
            logvar,
            logvar_active,
        })
    }

    /// Variational mean and (clamped) log-variance for one document.
    pub fn encode(&self, x: &[f64], covariate: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
        let cache = self.encode_cached(x, covariate)?;
        Ok((cache.mu, cache.logvar))
    }

    /// Noise-free topic proportions `softmax(mu)`.
    pub fn mean_theta(&self, x: &[f64], covariate: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(softmax(&self.encode_cached(x, covariate)?.mu))
    }

    /// Word probabilities `softmax(theta^T topic_word + word_bias)`.
    pub fn decode(&self, theta: &[f64]) -> Vec<f64> {
        let mut logits = self.word_bias.clone();
        for (k, &th) in theta.iter().enumerate() {
            if th == 0.0 {
                continue;
            }
            for (l, w) in logits.iter_mut().zip(self.topic_word.row(k)) {
                *l += th * w;
            }
        }
        softmax(&logits)
    }

    /// Full prototype forward pass with a caller-supplied noise draw.
    pub fn forward(&self, x: &[f64], covariate: Option<&[f64]>, noise: &[f64]) -> Result<ForwardPass> {
        let encoder = self.encode_cached(x, covariate)?;
        if noise.len() != self.dims.topics {
            return Err(Error::Shape(format!(
                "noise has length {}, model has {} topics",
                noise.len(),
                self.dims.topics
            )));
        }
        let state = reparameterize(&encoder.mu, &encoder.logvar, noise);
        let recon_probs = self.decode(&state.theta);
        Ok(ForwardPass {
            encoder,
            state,
            recon_probs,
        })
    }

    /// Accumulates into `grads` the gradient of
    /// `up.recon * recon + up.kl * kl + <up.theta, theta>` for one prototype.
    pub fn backward(
        &self,
        x: &[f64],
        fwd: &ForwardPass,
        up: &UpstreamGrads<'_>,
        grads: &mut ModelParams,
    ) -> Result<()> {
        let ModelDims {
            vocab: v, topics: t, ..
        } = self.dims;
        if grads.dims != self.dims || x.len() != v || fwd.recon_probs.len() != v || fwd.state.theta.len() != t {
            return Err(Error::Shape("backward called with inconsistent shapes".into()));
        }
        let theta = &fwd.state.theta;
        let mut grad_theta = match up.theta {
            Some(g) if g.len() != t => {
                return Err(Error::Shape(format!("theta gradient has length {}", g.len())))
            }
            Some(g) => g.to_vec(),
            None => vec![0.0; t],
        };

        if up.recon != 0.0 {
            let total: f64 = x.iter().sum();
            // d(-sum x log softmax(l)) / dl = total * p - x
            let grad_logits: Vec<f64> = fwd
                .recon_probs
                .iter()
                .zip(x)
                .map(|(&p, &xv)| up.recon * (total * p - xv))
                .collect();
            for (gb, gl) in grads.word_bias.iter_mut().zip(&grad_logits) {
                *gb += gl;
            }
            for k in 0..t {
                let row = self.topic_word.row(k);
                grad_theta[k] += dot(row, &grad_logits);
                let th = theta[k];
                if th != 0.0 {
                    for (g, gl) in grads.topic_word.row_mut(k).iter_mut().zip(&grad_logits) {
                        *g += th * gl;
                    }
                }
            }
        }

        let grad_z = softmax_backward(theta, &grad_theta);
        let enc = &fwd.encoder;
        let noise = &fwd.state.noise;
        let mut grad_mu = vec![0.0; t];
        let mut grad_logvar = vec![0.0; t];
        for k in 0..t {
            let sd = libm::exp(0.5 * enc.logvar[k]);
            grad_mu[k] = grad_z[k] + up.kl * enc.mu[k];
            if enc.logvar_active[k] {
                grad_logvar[k] =
                    grad_z[k] * noise[k] * 0.5 * sd + up.kl * 0.5 * (libm::exp(enc.logvar[k]) - 1.0);
            }
        }
        self.encoder_backward(enc, &grad_mu, &grad_logvar, grads);
        Ok(())
    }

    /// Accumulates the gradient of `<grad_theta, softmax(mu)>` through the
    /// noise-free encoder path used for sample documents.
    pub fn backward_mean_path(
        &self,
        enc: &EncoderCache,
        grad_theta: &[f64],
        grads: &mut ModelParams,
    ) -> Result<()> {
        let t = self.dims.topics;
        if grads.dims != self.dims || grad_theta.len() != t || enc.mu.len() != t {
            return Err(Error::Shape("backward_mean_path called with inconsistent shapes".into()));
        }
        let theta = softmax(&enc.mu);
        let grad_mu = softmax_backward(&theta, grad_theta);
        self.encoder_backward(enc, &grad_mu, &vec![0.0; t], grads);
        Ok(())
    }

    fn encoder_backward(&self, enc: &EncoderCache, grad_mu: &[f64], grad_logvar: &[f64], grads: &mut ModelParams) {
        let ModelDims { topics: t, hidden: h, .. } = self.dims;
        let mut grad_hidden = vec![0.0; h];
        for k in 0..t {
            let (gm, gl) = (grad_mu[k], grad_logvar[k]);
            grads.mu_bias[k] += gm;
            grads.logvar_bias[k] += gl;
            let mu_row = self.mu_head.row(k);
            let lv_row = self.logvar_head.row(k);
            let gmu_row = grads.mu_head.row_mut(k);
            for j in 0..h {
                gmu_row[j] += gm * enc.hidden[j];
                grad_hidden[j] += gm * mu_row[j] + gl * lv_row[j];
            }
            if gl != 0.0 {
                for (g, hj) in grads.logvar_head.row_mut(k).iter_mut().zip(&enc.hidden) {
                    *g += gl * hj;
                }
            }
        }
        for j in 0..h {
            let ga = grad_hidden[j] * sigmoid(enc.pre[j]);
            if ga == 0.0 {
                continue;
            }
            grads.enc_hidden_bias[j] += ga;
            let row = grads.enc_hidden.row_mut(j);
            for &(i, xi) in &enc.input {
                row[i] += ga * xi;
            }
        }
    }
}

/// Encoder activations retained for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderCache {
    /// Non-zero entries of the concatenated `[x; covariate]` input.
    pub input: Vec<(usize, f64)>,
    /// Hidden pre-activations.
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub mu: Vec<f64>,
    /// Clamped to `[LOGVAR_MIN, LOGVAR_MAX]`.
    pub logvar: Vec<f64>,
    /// False where the clamp is saturated (zero gradient).
    pub logvar_active: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    pub noise: Vec<f64>,
    pub z_raw: Vec<f64>,
    /// Topic proportions `softmax(z_raw)`.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub encoder: EncoderCache,
    pub state: LatentState,
    pub recon_probs: Vec<f64>,
}

/// Weights of the loss terms flowing into [`ModelParams::backward`].
#[derive(Debug, Clone, Copy, Default)]
pub struct UpstreamGrads<'a> {
    pub recon: f64,
    pub kl: f64,
    /// Extra gradient on theta, e.g. from the contrastive objective.
    pub theta: Option<&'a [f64]>,
}

/// `z_raw = mu + exp(logvar / 2) * noise`, `theta = softmax(z_raw)`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], noise: &[f64]) -> LatentState {
    let z_raw: Vec<f64> = mu
        .iter()
        .zip(logvar)
        .zip(noise)
        .map(|((m, lv), e)| m + libm::exp(0.5 * lv) * e)
        .collect();
    let theta = softmax(&z_raw);
    LatentState {
        mu: mu.to_vec(),
        logvar: logvar.to_vec(),
        noise: noise.to_vec(),
        z_raw,
        theta,
    }
}

/// Multinomial reconstruction loss and KL to a standard-normal prior.
///
/// Returns `(recon, kl)` with `recon = -sum_v x_v ln p_v` (probabilities
/// floored at [`PROB_FLOOR`]) and
/// `kl = 0.5 * sum_t (exp(logvar_t) + mu_t^2 - 1 - logvar_t)`.
pub fn elbo_loss(x: &[f64], recon_probs: &[f64], mu: &[f64], logvar: &[f64]) -> Result<(f64, f64)> {
    if x.len() != recon_probs.len() || mu.len() != logvar.len() {
        return Err(Error::Shape("elbo_loss inputs have mismatched lengths".into()));
    }
    let mut recon = 0.0;
    for (v, (&xv, &p)) in x.iter().zip(recon_probs).enumerate() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::NumericalDomain(format!("reconstruction probability {v} is {p}")));
        }
        if xv != 0.0 {
            recon -= xv * libm::log(p.max(PROB_FLOOR));
        }
    }
    let kl = 0.5
        * mu
            .iter()
            .zip(logvar)
            .map(|(m, lv)| libm::exp(*lv) + m * m - 1.0 - lv)
            .sum::<f64>();
    Ok((recon, kl.max(0.0)))
}
