//! Perceptual–cognitive gain reward.
//!
//! The reward is the gain in mean log-likelihood of the ground-truth answer
//! under a frozen reference policy when the (copy-cleaned) perception and
//! reasoning blocks are appended to the context, minus the copy penalty:
//!
//! ```text
//! r = GT-LL(gt | ctx ⊕ z) - GT-LL(gt | ctx) - copy_penalty
//! z = perception ⊕ kept reasoning sentences
//! ```
//!
//! Tokenization of the ground-truth answer belongs to the likelihood
//! backend; the kit only sends strings and receives log-probabilities.

use crate::embedding::text_hash;
use crate::error::{Error, Result};
use crate::lexical::{clean_and_penalize, normalize, CueThresholds};
use crate::remote::{HttpClient, RemoteConfig};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

/// Separator between the context and each appended block.
pub const BLOCK_SEPARATOR: &str = "\n";

/// What a likelihood backend returns for one (context, target) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetLogProbs {
    /// Per-token natural-log probabilities.
    Tokens { tokens: Vec<String>, logprobs: Vec<f64> },
    /// Already-averaged form, as served by the remote service.
    Summary { token_count: usize, mean_logprob: f64 },
}

pub trait LikelihoodProvider: Send + Sync {
    fn backend_id(&self) -> &str;
    fn target_logprobs(&self, context: &str, target: &str) -> Result<TargetLogProbs>;
}

impl<F> LikelihoodProvider for F
where
    F: Fn(&str, &str) -> Result<TargetLogProbs> + Send + Sync,
{
    fn backend_id(&self) -> &str {
        "closure"
    }

    fn target_logprobs(&self, context: &str, target: &str) -> Result<TargetLogProbs> {
        self(context, target)
    }
}

fn check_logprob(x: f64) -> Result<()> {
    if !x.is_finite() || x > 0.0 {
        return Err(Error::Backend(format!("invalid log-probability {x}")));
    }
    Ok(())
}

/// Mean of per-token log-probabilities.
pub fn mean_logprob(logprobs: &[f64]) -> Result<f64> {
    if logprobs.is_empty() {
        return Err(Error::EmptyInput("ground-truth token list is empty".into()));
    }
    logprobs.iter().try_for_each(|&x| check_logprob(x))?;
    Ok(logprobs.iter().sum::<f64>() / logprobs.len() as f64)
}

/// Mean per-token log-likelihood of `target` given `context`.
pub fn gt_loglik(context: &str, target: &str, provider: &dyn LikelihoodProvider) -> Result<f64> {
    if target.trim().is_empty() {
        return Err(Error::EmptyInput("ground-truth answer is empty".into()));
    }
    match provider.target_logprobs(context, target)? {
        TargetLogProbs::Tokens { tokens, logprobs } => {
            if tokens.len() != logprobs.len() {
                return Err(Error::LengthMismatch { left: tokens.len(), right: logprobs.len() });
            }
            mean_logprob(&logprobs)
        }
        TargetLogProbs::Summary { token_count, mean_logprob } => {
            if token_count == 0 {
                return Err(Error::EmptyInput("ground-truth token list is empty".into()));
            }
            check_logprob(mean_logprob)?;
            Ok(mean_logprob)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgInputs<'a> {
    /// Already rendered prompt context (system prompt, profiles, history).
    pub prompt_context: &'a str,
    pub perception: Option<&'a str>,
    pub reasoning: Option<&'a str>,
    pub answer: Option<&'a str>,
    /// Ground-truth answer text; the backend tokenizes it.
    pub gt_answer: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcgBreakdown {
    pub reward: f64,
    pub loglik_with_block: f64,
    pub loglik_context: f64,
    pub copy_penalty: f64,
    pub cleaned_block: String,
}

fn join_blocks<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    parts.into_iter().filter(|p| !p.trim().is_empty()).collect::<Vec<_>>().join(BLOCK_SEPARATOR)
}

pub fn pcg_detailed(
    inputs: &PcgInputs<'_>,
    th: &CueThresholds,
    provider: &dyn LikelihoodProvider,
) -> Result<PcgBreakdown> {
    if inputs.gt_answer.trim().is_empty() {
        return Err(Error::EmptyInput("ground-truth answer is empty".into()));
    }
    let clean = clean_and_penalize(inputs.reasoning, inputs.answer, th);
    let block = join_blocks(inputs.perception.into_iter().chain(clean.kept_sentences.iter().map(String::as_str)));

    let (loglik_context, loglik_with_block) = if block.is_empty() {
        let base = gt_loglik(inputs.prompt_context, inputs.gt_answer, provider)?;
        (base, base)
    } else {
        let augmented = join_blocks([inputs.prompt_context, block.as_str()]);
        let (base, aug) = rayon::join(
            || gt_loglik(inputs.prompt_context, inputs.gt_answer, provider),
            || gt_loglik(&augmented, inputs.gt_answer, provider),
        );
        (base?, aug?)
    };
    let gain = if block.is_empty() { 0.0 } else { loglik_with_block - loglik_context };

    Ok(PcgBreakdown {
        reward: gain - clean.copy_penalty,
        loglik_with_block,
        loglik_context,
        copy_penalty: clean.copy_penalty,
        cleaned_block: block,
    })
}

pub fn pcg(inputs: &PcgInputs<'_>, th: &CueThresholds, provider: &dyn LikelihoodProvider) -> Result<f64> {
    pcg_detailed(inputs, th, provider).map(|b| b.reward)
}

/// One fixture record. Either `logprobs` (with optional `tokens`) or the
/// `token_count`/`mean_logprob` pair must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LikelihoodRecord {
    pub context_hash: String,
    pub target_hash: String,
    #[serde(flatten)]
    pub value: TargetLogProbs,
}

/// Lookup-table provider keyed by (hash(context), hash(target)).
#[derive(Debug, Clone, Default)]
pub struct FixtureLikelihood {
    table: HashMap<(String, String), TargetLogProbs>,
}

impl FixtureLikelihood {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let mut out = Self::new();
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        for line in file.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: LikelihoodRecord = serde_json::from_str(&line)?;
            out.table.insert((r.context_hash, r.target_hash), r.value);
        }
        Ok(out)
    }

    pub fn insert(&mut self, context: &str, target: &str, value: TargetLogProbs) {
        self.table.insert((text_hash(context), text_hash(target)), value);
    }
}

impl LikelihoodProvider for FixtureLikelihood {
    fn backend_id(&self) -> &str {
        "fixture-likelihood"
    }

    fn target_logprobs(&self, context: &str, target: &str) -> Result<TargetLogProbs> {
        self.table
            .get(&(text_hash(context), text_hash(target)))
            .cloned()
            .ok_or_else(|| Error::FixtureMissing(format!("log-probs for target {target:?}")))
    }
}

/// Deterministic stand-in for a reference policy.
///
/// Each normalized target token gets probability
/// `lambda * count_in_context / context_len + (1 - lambda) / vocab`,
/// so context that mentions answer words raises the likelihood.
#[derive(Debug, Clone)]
pub struct UnigramLikelihood {
    pub vocab_size: f64,
    pub lambda: f64,
}

impl Default for UnigramLikelihood {
    fn default() -> Self {
        Self { vocab_size: 32_768.0, lambda: 0.5 }
    }
}

impl LikelihoodProvider for UnigramLikelihood {
    fn backend_id(&self) -> &str {
        "unigram"
    }

    fn target_logprobs(&self, context: &str, target: &str) -> Result<TargetLogProbs> {
        let tokens = normalize(target).into_vec();
        if tokens.is_empty() {
            return Err(Error::EmptyInput(format!("no tokens in target {target:?}")));
        }
        let ctx = normalize(context);
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in ctx.iter() {
            *counts.entry(t).or_default() += 1;
        }
        let lambda = if ctx.is_empty() { 0.0 } else { self.lambda };
        let logprobs = tokens
            .iter()
            .map(|t| {
                let freq = counts.get(t.as_str()).copied().unwrap_or(0) as f64 / ctx.len().max(1) as f64;
                (lambda * freq + (1.0 - lambda) / self.vocab_size).ln()
            })
            .collect();
        Ok(TargetLogProbs::Tokens { tokens, logprobs })
    }
}

#[derive(Debug, Serialize)]
struct GtllRequest<'a> {
    id: String,
    context: &'a str,
    target: &'a str,
}

#[derive(Debug, Deserialize)]
struct GtllResponse {
    id: String,
    token_count: usize,
    mean_logprob: f64,
}

/// Client for an external reference-policy service (`POST {endpoint}/gtll`).
pub struct RemoteLikelihood {
    client: HttpClient,
    id: String,
}

impl RemoteLikelihood {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        let id = format!("remote:{}", cfg.endpoint);
        Ok(Self { client: HttpClient::new(cfg)?, id })
    }
}

impl LikelihoodProvider for RemoteLikelihood {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn target_logprobs(&self, context: &str, target: &str) -> Result<TargetLogProbs> {
        let req = GtllRequest { id: self.client.next_id(), context, target };
        let resp: GtllResponse = self.client.post_json("/gtll", &req)?;
        if resp.id != req.id {
            return Err(Error::Backend(format!("response id {:?} does not match request {:?}", resp.id, req.id)));
        }
        Ok(TargetLogProbs::Summary { token_count: resp.token_count, mean_logprob: resp.mean_logprob })
    }
}
