//! Group-relative normalization of the 4-d reward and scalar advantages.

use crate::embedding::{FrameSource, TextEmbedder, TokenEmbedder};
use crate::error::{Error, Result};
use crate::lexical::CueThresholds;
use crate::pcg::{pcg, LikelihoodProvider, PcgInputs};
use crate::semantic::semantic_reward;
use crate::structure::{format_reward, Completion, ReferenceOutput};
use crate::visual::{visual_reward, AlignmentConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Denominator stabilizer for the per-dimension z-score.
pub const ZSCORE_EPS: f64 = 1e-6;

/// Dimension names in storage order.
pub const DIMENSIONS: [&str; 4] = ["sem", "fmt", "vis", "pcg"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub sem: f64,
    pub fmt: f64,
    pub vis: f64,
    pub pcg: f64,
}

impl RewardVector {
    pub fn to_array(self) -> [f64; 4] {
        [self.sem, self.fmt, self.vis, self.pcg]
    }

    pub fn from_array([sem, fmt, vis, pcg]: [f64; 4]) -> Self {
        Self { sem, fmt, vis, pcg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub sem: f64,
    pub fmt: f64,
    pub vis: f64,
    pub pcg: f64,
}

impl Default for WeightVector {
    fn default() -> Self {
        Self { sem: 1.0, fmt: 1.0, vis: 0.8, pcg: 0.8 }
    }
}

impl WeightVector {
    pub fn to_array(self) -> [f64; 4] {
        [self.sem, self.fmt, self.vis, self.pcg]
    }
}

/// Scored group; immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupBatch {
    rewards: Vec<RewardVector>,
    normalized: Vec<[f64; 4]>,
    advantages: Vec<f64>,
}

impl GroupBatch {
    pub fn from_rewards(rewards: Vec<RewardVector>, weights: &WeightVector, eps: f64) -> Result<Self> {
        let raw: Vec<[f64; 4]> = rewards.iter().map(|r| r.to_array()).collect();
        let normalized = zscore_normalize_with_eps(&raw, eps)?;
        let advantages = advantages(&normalized, weights);
        Ok(Self { rewards, normalized, advantages })
    }

    pub fn size(&self) -> usize {
        self.rewards.len()
    }

    pub fn rewards(&self) -> &[RewardVector] {
        &self.rewards
    }

    pub fn raw(&self) -> Vec<[f64; 4]> {
        self.rewards.iter().map(|r| r.to_array()).collect()
    }

    pub fn normalized(&self) -> &[[f64; 4]] {
        &self.normalized
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }
}

pub fn zscore_normalize(rewards: &[[f64; 4]]) -> Result<Vec<[f64; 4]>> {
    zscore_normalize_with_eps(rewards, ZSCORE_EPS)
}

/// `(r - mean) / (population_std + eps)` per dimension.
pub fn zscore_normalize_with_eps(rewards: &[[f64; 4]], eps: f64) -> Result<Vec<[f64; 4]>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::GroupTooSmall(g));
    }
    if let Some(x) = rewards.iter().flatten().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("reward {x}")));
    }
    let n = g as f64;
    let mut out = vec![[0.0; 4]; g];
    for k in 0..4 {
        // A constant column has mean equal to its value exactly; the
        // floating-point sum/n need not reproduce it, so short-circuit.
        if rewards.iter().all(|r| r[k] == rewards[0][k]) {
            continue;
        }
        let mean = rewards.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
        let denom = var.sqrt() + eps;
        for (o, r) in out.iter_mut().zip(rewards) {
            o[k] = (r[k] - mean) / denom;
        }
    }
    Ok(out)
}

pub fn advantages(normalized: &[[f64; 4]], w: &WeightVector) -> Vec<f64> {
    let w = w.to_array();
    normalized.iter().map(|row| row.iter().zip(&w).map(|(x, wk)| x * wk).sum()).collect()
}

/// Hyperparameters for one scoring pass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoringConfig {
    pub alignment: AlignmentConfig,
    pub thresholds: CueThresholds,
    pub weights: WeightVector,
    pub zscore_eps: Option<f64>,
}

/// Backends the four rewards draw on.
#[derive(Clone)]
pub struct RewardModels {
    pub frames: Arc<dyn FrameSource>,
    pub text: Arc<dyn TextEmbedder>,
    pub tokens: Arc<dyn TokenEmbedder>,
    pub likelihood: Arc<dyn LikelihoodProvider>,
}

/// Inputs shared by every completion of a group.
#[derive(Debug, Clone, Copy)]
pub struct GroupContext<'a> {
    pub clip_id: &'a str,
    pub reference: &'a ReferenceOutput,
    /// Rendered prompt context given to the reference policy.
    pub prompt_context: &'a str,
}

fn tag(index: usize, dimension: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::Reward { index, dimension, source: Box::new(e) }
}

/// Raw 4-d reward of a single completion against pre-loaded frames.
pub fn raw_rewards(
    index: usize,
    completion: &Completion,
    frames: &crate::embedding::EmbeddingMatrix,
    ctx: &GroupContext<'_>,
    cfg: &ScoringConfig,
    models: &RewardModels,
) -> Result<RewardVector> {
    let sem = semantic_reward(completion.answer.as_deref(), ctx.reference.answer.as_deref(), models.tokens.as_ref())
        .map_err(tag(index, "sem"))?;
    let fmt = format_reward(&completion.raw).total;
    let vis = visual_reward(frames, completion.perception.as_deref(), &cfg.alignment, models.text.as_ref())
        .map_err(tag(index, "vis"))?;
    let pcg = match ctx.reference.answer.as_deref() {
        Some(gt) => pcg(
            &PcgInputs {
                prompt_context: ctx.prompt_context,
                perception: completion.perception.as_deref(),
                reasoning: completion.think.as_deref(),
                answer: completion.answer.as_deref(),
                gt_answer: gt,
            },
            &cfg.thresholds,
            models.likelihood.as_ref(),
        )
        .map_err(tag(index, "pcg"))?,
        None => 0.0,
    };
    Ok(RewardVector { sem, fmt, vis, pcg })
}

/// Scores every completion, then normalizes and weights within the group.
pub fn score_group(
    completions: &[Completion],
    ctx: &GroupContext<'_>,
    cfg: &ScoringConfig,
    models: &RewardModels,
) -> Result<GroupBatch> {
    if completions.len() < 2 {
        return Err(Error::GroupTooSmall(completions.len()));
    }
    cfg.alignment.validate()?;
    cfg.thresholds.validate()?;
    let frames = models.frames.load_frames(ctx.clip_id)?;
    let results: Vec<Result<RewardVector>> =
        completions.par_iter().enumerate().map(|(i, c)| raw_rewards(i, c, &frames, ctx, cfg, models)).collect();
    let rewards = results.into_iter().collect::<Result<Vec<_>>>()?;
    GroupBatch::from_rewards(rewards, &cfg.weights, cfg.zscore_eps.unwrap_or(ZSCORE_EPS))
}
