//! Weighted contrastive objective over topic proportions, its loss variants,
//! and the triangle schedule for the negative-sample weight `beta`.
//!
//! All losses here are in minimized form: the full variant returns
//! `-ln(e^{s+} / (e^{s+} + beta e^{s-}))` where `s+ = z . z+` and `s- = z . z-`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, sigmoid, softplus};

/// Floor on `z . z-` when estimating the initial `beta`.
pub const GAMMA_DENOM_FLOOR: f64 = 1e-6;
/// Cap on each candidate ratio when estimating the initial `beta`.
pub const GAMMA_CAP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Positive and negative samples.
    Full,
    /// `-(z . z+)`
    PositiveOnly,
    /// `alpha * (z . z-)`
    NegativeOnly,
    /// No contrastive term.
    ElboOnly,
}

impl LossVariant {
    pub const ALL: [LossVariant; 4] = [
        LossVariant::Full,
        LossVariant::PositiveOnly,
        LossVariant::NegativeOnly,
        LossVariant::ElboOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LossVariant::Full => "full",
            LossVariant::PositiveOnly => "positive_only",
            LossVariant::NegativeOnly => "negative_only",
            LossVariant::ElboOnly => "elbo_only",
        }
    }

    pub fn uses_positive(self) -> bool {
        matches!(self, LossVariant::Full | LossVariant::PositiveOnly)
    }

    pub fn uses_negative(self) -> bool {
        matches!(self, LossVariant::Full | LossVariant::NegativeOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContrastiveConfig {
    pub variant: LossVariant,
    /// Initial `beta`. `None` estimates it from one batch before training.
    pub beta0: Option<f64>,
    /// Horizon of the triangle schedule in optimizer steps. `None` uses the
    /// number of steps the run will take.
    pub total_steps: Option<u64>,
    /// Constant `beta` replacing the schedule.
    pub fixed_beta: Option<f64>,
    /// Weight of the negative-only variant.
    pub alpha: f64,
    /// Constraint strength of the original constrained problem. It drops
    /// out of the loss and is recorded for reference only.
    pub epsilon_doc: f64,
    /// Multiplier on the contrastive term in the joint objective.
    pub weight: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            variant: LossVariant::Full,
            beta0: None,
            total_steps: None,
            fixed_beta: None,
            alpha: 1.0,
            epsilon_doc: 0.0,
            weight: 1.0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.beta0.is_some_and(|b| !(b >= 0.0) || !b.is_finite()) {
            return bad("beta0 must be finite and non-negative");
        }
        if self.fixed_beta.is_some_and(|b| !(b >= 0.0) || !b.is_finite()) {
            return bad("fixed_beta must be finite and non-negative");
        }
        if self.total_steps == Some(0) {
            return bad("total_steps must be at least 1");
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad("alpha must be positive");
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return bad("contrastive weight must be non-negative");
        }
        Ok(())
    }
}

/// Dot-product similarities of the prototype with its two samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTriple {
    pub s_pos: f64,
    pub s_neg: f64,
}

impl SimilarityTriple {
    pub fn new(theta: &[f64], theta_pos: &[f64], theta_neg: &[f64]) -> Self {
        SimilarityTriple {
            s_pos: dot(theta, theta_pos),
            s_neg: dot(theta, theta_neg),
        }
    }
}

/// `ln(1 + beta * exp(s- - s+))`, evaluated as a softplus.
pub fn contrastive_loss_from_similarity(sim: SimilarityTriple, beta: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    softplus(libm::log(beta) + sim.s_neg - sim.s_pos)
}

/// Minimized weighted-contrastive loss for one prototype.
pub fn contrastive_loss(theta: &[f64], theta_pos: &[f64], theta_neg: &[f64], beta: f64) -> f64 {
    contrastive_loss_from_similarity(SimilarityTriple::new(theta, theta_pos, theta_neg), beta)
}

/// Weight `e^{s-} / (e^{s+}/beta + e^{s-})` shared by all three gradients.
fn negative_weight(sim: SimilarityTriple, beta: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    sigmoid(libm::log(beta) + sim.s_neg - sim.s_pos)
}

/// Gradient of [`contrastive_loss`] with respect to `theta`:
/// `-(theta+ - theta-) e^{s-} / (e^{s+}/beta + e^{s-})`.
pub fn contrastive_grad(theta: &[f64], theta_pos: &[f64], theta_neg: &[f64], beta: f64) -> Vec<f64> {
    let w = negative_weight(SimilarityTriple::new(theta, theta_pos, theta_neg), beta);
    theta_pos
        .iter()
        .zip(theta_neg)
        .map(|(p, n)| -(p - n) * w)
        .collect()
}

/// Value and gradients of a loss variant with respect to all three inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantGrads {
    pub loss: f64,
    pub theta: Vec<f64>,
    pub theta_pos: Vec<f64>,
    pub theta_neg: Vec<f64>,
}

/// Loss of the chosen variant, in minimized form.
pub fn variant_loss(
    config: &ContrastiveConfig,
    theta: &[f64],
    theta_pos: &[f64],
    theta_neg: &[f64],
    beta: f64,
) -> f64 {
    match config.variant {
        LossVariant::Full => contrastive_loss(theta, theta_pos, theta_neg, beta),
        LossVariant::PositiveOnly => -dot(theta, theta_pos),
        LossVariant::NegativeOnly => config.alpha * dot(theta, theta_neg),
        LossVariant::ElboOnly => 0.0,
    }
}

/// [`variant_loss`] together with its gradients.
pub fn variant_grads(
    config: &ContrastiveConfig,
    theta: &[f64],
    theta_pos: &[f64],
    theta_neg: &[f64],
    beta: f64,
) -> VariantGrads {
    let t = theta.len();
    let scale = |v: &[f64], s: f64| v.iter().map(|x| x * s).collect::<Vec<f64>>();
    match config.variant {
        LossVariant::Full => {
            let sim = SimilarityTriple::new(theta, theta_pos, theta_neg);
            let w = negative_weight(sim, beta);
            VariantGrads {
                loss: contrastive_loss_from_similarity(sim, beta),
                theta: theta_pos.iter().zip(theta_neg).map(|(p, n)| -(p - n) * w).collect(),
                theta_pos: scale(theta, -w),
                theta_neg: scale(theta, w),
            }
        }
        LossVariant::PositiveOnly => VariantGrads {
            loss: -dot(theta, theta_pos),
            theta: scale(theta_pos, -1.0),
            theta_pos: scale(theta, -1.0),
            theta_neg: alloc::vec![0.0; t],
        },
        LossVariant::NegativeOnly => VariantGrads {
            loss: config.alpha * dot(theta, theta_neg),
            theta: scale(theta_neg, config.alpha),
            theta_pos: alloc::vec![0.0; t],
            theta_neg: scale(theta, config.alpha),
        },
        LossVariant::ElboOnly => VariantGrads {
            loss: 0.0,
            theta: alloc::vec![0.0; t],
            theta_pos: alloc::vec![0.0; t],
            theta_neg: alloc::vec![0.0; t],
        },
    }
}

/// Candidate ratio `(z . z+) / (z . z-)`, with the denominator floored and
/// the ratio clamped to `[0, GAMMA_CAP]`.
pub fn beta_candidate(sim: SimilarityTriple) -> f64 {
    (sim.s_pos / sim.s_neg.max(GAMMA_DENOM_FLOOR)).clamp(0.0, GAMMA_CAP)
}

/// Initial `beta` as the mean candidate ratio over a batch of
/// `(theta, theta+, theta-)` triples.
pub fn init_beta<'a, I>(batch: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64], &'a [f64])>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for (z, zp, zn) in batch {
        sum += beta_candidate(SimilarityTriple::new(z, zp, zn));
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidInput("init_beta needs at least one triple".into()));
    }
    Ok(sum / n as f64)
}

/// Triangle schedule `1/2 - |T/2 - t| / T + beta0`, floored at zero.
pub fn beta_at(step: u64, total_steps: u64, beta0: f64) -> f64 {
    let total = total_steps.max(1) as f64;
    let t = step as f64;
    (0.5 - (0.5 * total - t).abs() / total + beta0).max(0.0)
}

/// Checks `ln(e^{s+} / (e^{s+} + beta e^{s-})) <= s+ - s- - ln(beta)` with
/// `1e-12` slack. Requires `beta > 0`.
pub fn bound_check(s_pos: f64, s_neg: f64, beta: f64) -> bool {
    if !(beta > 0.0) {
        return false;
    }
    let ln_beta = libm::log(beta);
    let lhs = -softplus(ln_beta + s_neg - s_pos);
    let rhs = s_pos - s_neg - ln_beta;
    lhs <= rhs + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{E, LN_2};

    #[test]
    fn loss_examples() {
        let th = [0.5, 0.5];
        assert!((contrastive_loss(&th, &th, &th, 1.0) - LN_2).abs() < 1e-15);
        assert_eq!(contrastive_loss(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], 0.0), 0.0);
        // s+ = 1, s- = 0
        let l = contrastive_loss(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 1.0);
        assert!((l - libm::log(1.0 + libm::exp(-1.0))).abs() < 1e-15);
        assert!((l - 0.313_261_687_518_222_8).abs() < 1e-15);
    }

    #[test]
    fn grad_examples() {
        let th = [0.2, 0.3, 0.5];
        let tp = [0.6, 0.1, 0.3];
        // choose theta- so that s- = s+: tn = tp works trivially
        let g = contrastive_grad(&th, &tp, &tp, 1.0);
        assert!(g.iter().all(|&v| v == 0.0));
        // s+ = s- with distinct samples
        let th = [0.5, 0.5];
        let tp = [0.8, 0.2];
        let tn = [0.2, 0.8];
        let g = contrastive_grad(&th, &tp, &tn, 1.0);
        for k in 0..2 {
            assert!((g[k] + (tp[k] - tn[k]) / 2.0).abs() < 1e-15);
        }
        assert!(contrastive_grad(&th, &tp, &tn, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_beta_examples() {
        let half = [1.0, 0.0];
        // s+ = s- = 0.5
        let z = [0.5, 0.5];
        let b = init_beta([(&z[..], &half[..], &half[..])]).unwrap();
        assert!((b - 1.0).abs() < 1e-15);
        // gamma = 2 and gamma = 4
        let z1 = [1.0, 0.0];
        let p1 = [0.8, 0.2];
        let n1 = [0.4, 0.6];
        let p2 = [0.8, 0.2];
        let n2 = [0.2, 0.8];
        let b = init_beta([(&z1[..], &p1[..], &n1[..]), (&z1[..], &p2[..], &n2[..])]).unwrap();
        assert!((b - 3.0).abs() < 1e-12);
        // s- = 0 hits the cap
        let b = init_beta([(&z1[..], &p1[..], &[0.0, 1.0][..])]).unwrap();
        assert_eq!(b, GAMMA_CAP);
        assert!(init_beta(core::iter::empty()).is_err());
    }

    #[test]
    fn schedule_examples() {
        let b0 = 1.7;
        assert_eq!(beta_at(0, 100, b0), b0);
        assert!((beta_at(50, 100, b0) - (b0 + 0.5)).abs() < 1e-15);
        assert_eq!(beta_at(100, 100, b0), b0);
        for t in 0..=37 {
            assert_eq!(beta_at(t, 37, b0), beta_at(37 - t, 37, b0));
        }
    }

    #[test]
    fn variant_examples() {
        let mut cfg = ContrastiveConfig {
            variant: LossVariant::PositiveOnly,
            ..Default::default()
        };
        let u = [0.25; 4];
        assert!((variant_loss(&cfg, &u, &u, &u, 1.0) + 0.25).abs() < 1e-15);
        cfg.variant = LossVariant::NegativeOnly;
        cfg.alpha = 2.0;
        let z = [1.0, 0.0];
        let n = [0.3, 0.7];
        assert!((variant_loss(&cfg, &z, &z, &n, 1.0) - 0.6).abs() < 1e-15);
        cfg.variant = LossVariant::ElboOnly;
        assert_eq!(variant_loss(&cfg, &z, &[0.1, 0.9], &n, 5.0), 0.0);
    }

    #[test]
    fn bound_examples() {
        assert!(bound_check(0.4, 0.4, 1.0));
        assert!(bound_check(1.0, 0.0, E));
        assert!(!bound_check(1.0, 0.0, 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(ContrastiveConfig::default().validate().is_ok());
        let bad = ContrastiveConfig {
            fixed_beta: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ContrastiveConfig {
            total_steps: Some(0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
