//! Toy softmax policy used to validate the analytic GRPO gradient.
//!
//! Every position of every sequence owns an independent logit vector, so
//! `new_lp[g][t] = log_softmax(logits[g][t])[action[g][t]]` and
//! `d new_lp / d logit_v = 1[v == action] - softmax_v`.

use super::{grpo_loss, grpo_loss_grad, grpo_stats, GrpoConfig, TokenLogProbs};
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub grpo: GrpoConfig,
    /// Central-difference step.
    pub step: f64,
    pub group_size: usize,
    pub max_len: usize,
    pub vocab: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { grpo: GrpoConfig::default(), step: 1e-5, group_size: 4, max_len: 5, vocab: 6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub params: usize,
    pub loss: f64,
    pub clip_fraction: f64,
    pub max_abs_error: f64,
    /// `max |a - n| / max(|a|, |n|, 1e-6)` over all logits.
    pub max_rel_error: f64,
}

/// Denominator floor for relative errors of near-zero gradient entries.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Keeps ratios at least this far from the clip kinks so finite
/// differences never straddle a non-differentiable point.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub logits: Vec<Vec<Vec<f64>>>,
    pub actions: Vec<Vec<usize>>,
    pub old_lp: Vec<Vec<f64>>,
    pub ref_lp: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
    pub cfg: GrpoConfig,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

fn jitter(rng: &mut ChaCha8Rng, logits: &[f64], scale: f64) -> Vec<f64> {
    logits.iter().map(|x| x + rng.random_range(-scale..scale)).collect()
}

impl ToyProblem {
    pub fn random(seed: u64, cfg: &GradCheckConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut logits = Vec::new();
        let mut actions = Vec::new();
        let mut old_lp = Vec::new();
        let mut ref_lp = Vec::new();
        for _ in 0..cfg.group_size {
            let len = rng.random_range(1..=cfg.max_len);
            let (mut lg, mut ac, mut ol, mut rl) = (vec![], vec![], vec![], vec![]);
            for _ in 0..len {
                let l: Vec<f64> = (0..cfg.vocab).map(|_| rng.random_range(-2.0..2.0)).collect();
                let a = rng.random_range(0..cfg.vocab);
                let new = log_softmax(&l)[a];
                let old = loop {
                    let o = log_softmax(&jitter(&mut rng, &l, 0.6))[a];
                    let r = (new - o).exp();
                    let eps = cfg.grpo.clip_eps;
                    if (r - (1.0 - eps)).abs() > KINK_MARGIN && (r - (1.0 + eps)).abs() > KINK_MARGIN {
                        break o;
                    }
                };
                rl.push(log_softmax(&jitter(&mut rng, &l, 0.5))[a]);
                ol.push(old);
                lg.push(l);
                ac.push(a);
            }
            logits.push(lg);
            actions.push(ac);
            old_lp.push(ol);
            ref_lp.push(rl);
        }
        let advantages = (0..cfg.group_size).map(|_| rng.random_range(-1.5..1.5)).collect();
        Self { logits, actions, old_lp, ref_lp, advantages, cfg: cfg.grpo }
    }

    pub fn params(&self) -> usize {
        self.logits.iter().flatten().map(Vec::len).sum()
    }

    fn sequences(&self, logits: &[Vec<Vec<f64>>]) -> Vec<TokenLogProbs> {
        logits
            .iter()
            .zip(&self.actions)
            .zip(self.old_lp.iter().zip(&self.ref_lp))
            .map(|((lg, ac), (ol, rl))| TokenLogProbs {
                new_lp: lg.iter().zip(ac).map(|(l, &a)| log_softmax(l)[a]).collect(),
                old_lp: ol.clone(),
                ref_lp: rl.clone(),
            })
            .collect()
    }

    pub fn sequences_now(&self) -> Vec<TokenLogProbs> {
        self.sequences(&self.logits)
    }

    pub fn loss_at(&self, logits: &[Vec<Vec<f64>>]) -> Result<f64> {
        grpo_loss(&self.sequences(logits), &self.advantages, &self.cfg)
    }

    /// Chain rule through the softmax: `dL/dlogit = dL/dnew_lp * (onehot - p)`.
    pub fn analytic_grad(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        let d_lp = grpo_loss_grad(&self.sequences_now(), &self.advantages, &self.cfg)?;
        Ok(self
            .logits
            .iter()
            .zip(&self.actions)
            .zip(&d_lp)
            .map(|((lg, ac), dg)| {
                lg.iter()
                    .zip(ac)
                    .zip(dg)
                    .map(|((l, &a), &d)| {
                        log_softmax(l)
                            .iter()
                            .enumerate()
                            .map(|(v, lp)| d * (f64::from(u8::from(v == a)) - lp.exp()))
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }

    pub fn numeric_grad(&self, step: f64) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut work = self.logits.clone();
        let mut out = self.logits.clone();
        for g in 0..work.len() {
            for t in 0..work[g].len() {
                for v in 0..work[g][t].len() {
                    let x = work[g][t][v];
                    work[g][t][v] = x + step;
                    let up = self.loss_at(&work)?;
                    work[g][t][v] = x - step;
                    let down = self.loss_at(&work)?;
                    work[g][t][v] = x;
                    out[g][t][v] = (up - down) / (2.0 * step);
                }
            }
        }
        Ok(out)
    }
}

/// Compares analytic and central-difference gradients on a random problem.
pub fn toy_policy_grad_check(seed: u64, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let problem = ToyProblem::random(seed, cfg);
    check_problem(seed, &problem, cfg.step)
}

pub fn check_problem(seed: u64, problem: &ToyProblem, step: f64) -> Result<GradCheckReport> {
    let analytic = problem.analytic_grad()?;
    let numeric = problem.numeric_grad(step)?;
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for (a, n) in analytic.iter().flatten().flatten().zip(numeric.iter().flatten().flatten()) {
        let err = (a - n).abs();
        max_abs = max_abs.max(err);
        max_rel = max_rel.max(err / a.abs().max(n.abs()).max(REL_ERROR_FLOOR));
    }
    let stats = grpo_stats(&problem.sequences_now(), &problem.advantages, &problem.cfg)?;
    Ok(GradCheckReport {
        seed,
        params: problem.params(),
        loss: stats.loss,
        clip_fraction: stats.clip_fraction,
        max_abs_error: max_abs,
        max_rel_error: max_rel,
    })
}
