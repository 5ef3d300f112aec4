//! Reward stack for training vision-language role-play agents with GRPO.
//!
//! * [`structure`]: parse `<perception>/<think>/<answer>` completions and
//!   score their format.
//! * [`visual`]: scene–text alignment against precomputed frame embeddings.
//! * [`lexical`] and [`pcg`]: copy-sanitized perceptual–cognitive gain.
//! * [`semantic`]: clipped BERTScore-F1 against the reference answer.
//! * [`aggregate`]: per-dimension z-scores and weighted advantages.
//! * [`grpo`]: clipped-surrogate loss, KL estimator and a gradient check.
//! * [`dataset`]: subtitle parsing, dialogue sessions and leakage-safe samples.
//! * [`cli`]: batch commands used by the `ebm-rl` binary.
//!
//! Model backends sit behind the traits in [`embedding`] and [`pcg`]; the
//! deterministic [`embedding::HashingEmbedder`] and
//! [`pcg::UnigramLikelihood`] make every reward computable offline.

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod grpo;
pub mod lexical;
pub mod pcg;
pub mod remote;
pub mod semantic;
pub mod structure;
pub mod visual;

pub use error::{Error, Result};
