//! Clipped-surrogate GRPO objective with a per-token KL regularizer.
//!
//! For sequence `g` with advantage `A_g` and token ratios
//! `r_t = exp(new_t - old_t)`:
//!
//! ```text
//! surr_t = min(r_t * A_g, clip(r_t, 1 - eps, 1 + eps) * A_g)
//! kl_t   = rho_t - ln(rho_t) - 1,   rho_t = exp(ref_t - new_t)
//! J      = mean_g mean_t (surr_t - beta * kl_t)
//! loss   = -J
//! ```
//!
//! Reductions run in a fixed order (sequence ascending, then token
//! ascending) so the loss is bit-reproducible.

pub mod toy;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub use toy::{toy_policy_grad_check, GradCheckConfig, GradCheckReport, ToyProblem};

/// Per-token log-probabilities of one completion under the three policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    pub new_lp: Vec<f64>,
    pub old_lp: Vec<f64>,
    pub ref_lp: Vec<f64>,
}

impl TokenLogProbs {
    pub fn len(&self) -> usize {
        self.new_lp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_lp.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.new_lp.len();
        for other in [&self.old_lp, &self.ref_lp] {
            if other.len() != n {
                return Err(Error::LengthMismatch { left: n, right: other.len() });
            }
        }
        if n == 0 {
            return Err(Error::EmptyInput("sequence has no tokens".into()));
        }
        let all = self.new_lp.iter().chain(&self.old_lp).chain(&self.ref_lp);
        if let Some(x) = all.into_iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("log-prob {x}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    pub clip_eps: f64,
    pub kl_beta: f64,
}

impl Default for GrpoConfig {
    /// Harness defaults; configuration files must set both keys explicitly.
    fn default() -> Self {
        Self { clip_eps: 0.2, kl_beta: 0.04 }
    }
}

impl GrpoConfig {
    pub fn new(clip_eps: f64, kl_beta: f64) -> Result<Self> {
        let c = Self { clip_eps, kl_beta };
        c.validate()?;
        Ok(c)
    }

    /// `clip_eps` in (0, 1), `kl_beta >= 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!("clip_eps must be in (0, 1), got {}", self.clip_eps)));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return Err(Error::Config(format!("kl_beta must be >= 0, got {}", self.kl_beta)));
        }
        Ok(())
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

pub fn importance_ratios(new_lp: &[f64], old_lp: &[f64]) -> Result<Vec<f64>> {
    same_len(new_lp, old_lp)?;
    new_lp
        .iter()
        .zip(old_lp)
        .map(|(n, o)| {
            let r = (n - o).exp();
            if r.is_finite() {
                Ok(r)
            } else {
                Err(Error::NonFinite(format!("ratio exp({n} - {o})")))
            }
        })
        .collect()
}

/// `rho - ln(rho) - 1` for `ln(rho) = ref - new`.
///
/// Evaluated as `expm1(x) - x`; the clamp only absorbs sub-ulp round-off.
#[inline]
pub fn kl_term(ref_lp: f64, new_lp: f64) -> f64 {
    let x = ref_lp - new_lp;
    (x.exp_m1() - x).max(0.0)
}

pub fn kl_estimate(ref_lp: &[f64], new_lp: &[f64]) -> Result<Vec<f64>> {
    same_len(ref_lp, new_lp)?;
    Ok(ref_lp.iter().zip(new_lp).map(|(&r, &n)| kl_term(r, n)).collect())
}

#[inline]
fn clip(r: f64, eps: f64) -> f64 {
    r.clamp(1.0 - eps, 1.0 + eps)
}

/// Loss and diagnostics for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoStats {
    pub loss: f64,
    pub mean_kl: f64,
    /// Share of tokens where the clipped branch is strictly smaller.
    pub clip_fraction: f64,
    pub tokens: usize,
}

fn check_group(group: &[TokenLogProbs], advantages: &[f64], cfg: &GrpoConfig) -> Result<()> {
    if group.is_empty() {
        return Err(Error::EmptyInput("GRPO group has no sequences".into()));
    }
    if group.len() != advantages.len() {
        return Err(Error::LengthMismatch { left: group.len(), right: advantages.len() });
    }
    if let Some(a) = advantages.iter().find(|a| !a.is_finite()) {
        return Err(Error::NonFinite(format!("advantage {a}")));
    }
    if cfg.clip_eps.is_nan() || cfg.clip_eps <= 0.0 || cfg.kl_beta.is_nan() || cfg.kl_beta < 0.0 {
        return Err(Error::Config(format!("bad GRPO config {cfg:?}")));
    }
    group.iter().try_for_each(TokenLogProbs::validate)
}

pub fn grpo_stats(group: &[TokenLogProbs], advantages: &[f64], cfg: &GrpoConfig) -> Result<GrpoStats> {
    check_group(group, advantages, cfg)?;
    let mut objective = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped = 0usize;
    let mut tokens = 0usize;
    for (seq, &adv) in group.iter().zip(advantages) {
        let mut seq_sum = 0.0;
        for t in 0..seq.len() {
            let r = (seq.new_lp[t] - seq.old_lp[t]).exp();
            let unclipped = r * adv;
            let clipped_val = clip(r, cfg.clip_eps) * adv;
            if clipped_val < unclipped {
                clipped += 1;
            }
            let kl = kl_term(seq.ref_lp[t], seq.new_lp[t]);
            kl_sum += kl;
            seq_sum += unclipped.min(clipped_val) - cfg.kl_beta * kl;
        }
        objective += seq_sum / seq.len() as f64;
        tokens += seq.len();
    }
    let loss = -(objective / group.len() as f64);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss}")));
    }
    Ok(GrpoStats { loss, mean_kl: kl_sum / tokens as f64, clip_fraction: clipped as f64 / tokens as f64, tokens })
}

pub fn grpo_loss(group: &[TokenLogProbs], advantages: &[f64], cfg: &GrpoConfig) -> Result<f64> {
    grpo_stats(group, advantages, cfg).map(|s| s.loss)
}

/// `d loss / d new_lp[g][t]`.
///
/// At a tie between the two branches (ratio inside the clip range) the
/// unclipped gradient is used; both branches coincide there.
pub fn grpo_loss_grad(group: &[TokenLogProbs], advantages: &[f64], cfg: &GrpoConfig) -> Result<Vec<Vec<f64>>> {
    check_group(group, advantages, cfg)?;
    let g = group.len() as f64;
    Ok(group
        .iter()
        .zip(advantages)
        .map(|(seq, &adv)| {
            let scale = -1.0 / (g * seq.len() as f64);
            (0..seq.len())
                .map(|t| {
                    let r = (seq.new_lp[t] - seq.old_lp[t]).exp();
                    let d_surr = if clip(r, cfg.clip_eps) * adv < r * adv { 0.0 } else { r * adv };
                    let rho = (seq.ref_lp[t] - seq.new_lp[t]).exp();
                    let d_kl = 1.0 - rho;
                    scale * (d_surr - cfg.kl_beta * d_kl)
                })
                .collect()
        })
        .collect())
}
