//! Flat key-value configuration shared by all commands.
//!
//! The file is TOML with top-level keys only; unknown keys are rejected.
//! `clip_eps` and `kl_beta` have no defaults and must always be given.
//!
//! ```toml
//! clip_eps = 0.2
//! kl_beta = 0.04
//! variant = "sent_topk"
//! alpha = 0.2
//! ```

use crate::aggregate::{ScoringConfig, WeightVector, ZSCORE_EPS};
use crate::dataset::Continuity;
use crate::error::{Error, Result};
use crate::grpo::GrpoConfig;
use crate::lexical::CueThresholds;
use crate::remote::RemoteConfig;
use crate::visual::{AlignmentConfig, AlignmentVariant};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingBackend {
    /// Deterministic feature-hashing embedder.
    #[default]
    Hashing,
    /// Lookup tables read from `text_fixture` / `token_fixture`.
    Fixture,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodBackend {
    /// Deterministic context-unigram model.
    #[default]
    Unigram,
    Fixture,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KitConfig {
    #[serde(default = "w_sem")]
    pub w_sem: f64,
    #[serde(default = "w_fmt")]
    pub w_fmt: f64,
    #[serde(default = "w_vis")]
    pub w_vis: f64,
    #[serde(default = "w_pcg")]
    pub w_pcg: f64,
    #[serde(default = "alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub variant: AlignmentVariant,
    #[serde(default = "tau_low")]
    pub tau_low: f64,
    #[serde(default = "tau_high")]
    pub tau_high: f64,
    #[serde(default = "zscore_eps")]
    pub zscore_eps: f64,
    pub clip_eps: f64,
    pub kl_beta: f64,
    /// Required completions per record when set.
    #[serde(default)]
    pub group_size: Option<usize>,
    #[serde(default = "workers")]
    pub workers: usize,

    #[serde(default)]
    pub embedding_backend: EmbeddingBackend,
    #[serde(default = "embed_dim")]
    pub embed_dim: usize,
    #[serde(default)]
    pub text_fixture: Option<String>,
    #[serde(default)]
    pub token_fixture: Option<String>,
    #[serde(default)]
    pub embed_endpoint: Option<String>,

    #[serde(default)]
    pub likelihood_backend: LikelihoodBackend,
    #[serde(default)]
    pub likelihood_fixture: Option<String>,
    #[serde(default)]
    pub gtll_endpoint: Option<String>,

    #[serde(default = "timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "retries")]
    pub retries: u32,
    #[serde(default = "max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "batch_size")]
    pub batch_size: usize,

    #[serde(default = "tau_turn")]
    pub tau_turn: f64,
    #[serde(default = "tau_round")]
    pub tau_round: f64,
    #[serde(default = "test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn w_sem() -> f64 {
    WeightVector::default().sem
}
fn w_fmt() -> f64 {
    WeightVector::default().fmt
}
fn w_vis() -> f64 {
    WeightVector::default().vis
}
fn w_pcg() -> f64 {
    WeightVector::default().pcg
}
fn alpha() -> f64 {
    AlignmentConfig::default().alpha
}
fn tau_low() -> f64 {
    CueThresholds::default().tau_low
}
fn tau_high() -> f64 {
    CueThresholds::default().tau_high
}
fn zscore_eps() -> f64 {
    ZSCORE_EPS
}
fn workers() -> usize {
    4
}
fn embed_dim() -> usize {
    64
}
fn timeout_ms() -> u64 {
    30_000
}
fn retries() -> u32 {
    2
}
fn max_in_flight() -> usize {
    4
}
fn batch_size() -> usize {
    32
}
fn tau_turn() -> f64 {
    10.0
}
fn tau_round() -> f64 {
    20.0
}
fn test_fraction() -> f64 {
    0.1
}

impl KitConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::from_table(toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?, &[])
    }

    /// Parses `text`, applies `key=value` overrides (values in TOML syntax,
    /// bare words taken as strings), then validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_table(table, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    fn from_table(mut table: toml::Table, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.trim().to_string(), value);
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_sem, self.w_fmt, self.w_vis, self.w_pcg, self.zscore_eps];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("weights and zscore_eps must be finite".into()));
        }
        if self.zscore_eps <= 0.0 {
            return Err(Error::Config("zscore_eps must be positive".into()));
        }
        self.alignment().validate()?;
        self.thresholds().validate()?;
        self.grpo().validate()?;
        if matches!(self.group_size, Some(g) if g < 2) {
            return Err(Error::Config("group_size must be at least 2".into()));
        }
        if self.workers == 0 || self.embed_dim == 0 || self.max_in_flight == 0 || self.batch_size == 0 {
            return Err(Error::Config("workers, embed_dim, max_in_flight and batch_size must be positive".into()));
        }
        if !(self.tau_turn >= 0.0 && self.tau_round >= 0.0) {
            return Err(Error::Config("tau_turn and tau_round must be non-negative".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> WeightVector {
        WeightVector { sem: self.w_sem, fmt: self.w_fmt, vis: self.w_vis, pcg: self.w_pcg }
    }

    pub fn alignment(&self) -> AlignmentConfig {
        AlignmentConfig { alpha: self.alpha, variant: self.variant }
    }

    pub fn thresholds(&self) -> CueThresholds {
        CueThresholds { tau_low: self.tau_low, tau_high: self.tau_high }
    }

    pub fn grpo(&self) -> GrpoConfig {
        GrpoConfig { clip_eps: self.clip_eps, kl_beta: self.kl_beta }
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            alignment: self.alignment(),
            thresholds: self.thresholds(),
            weights: self.weights(),
            zscore_eps: Some(self.zscore_eps),
        }
    }

    pub fn continuity(&self) -> Result<Continuity> {
        Continuity::from_secs(self.tau_turn, self.tau_round)
    }

    pub fn remote(&self, endpoint: &str) -> RemoteConfig {
        RemoteConfig {
            endpoint: endpoint.to_string(),
            timeout_ms: self.timeout_ms,
            retries: self.retries,
            max_in_flight: self.max_in_flight,
            batch_size: self.batch_size,
        }
    }
}
