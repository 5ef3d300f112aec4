//! End-to-end scoring of one completion group: parse, four rewards,
//! group normalization, advantages.
//!
//! Run with `cargo run --example score_pipeline`.

use ebm_rl::aggregate::{score_group, GroupContext, RewardModels, ScoringConfig, DIMENSIONS};
use ebm_rl::embedding::{CachedTextEmbedder, DirFrameStore, HashingEmbedder};
use ebm_rl::pcg::UnigramLikelihood;
use ebm_rl::structure::{parse_completion, ReferenceOutput};
use ebm_rl::visual::AlignmentVariant;
use std::sync::Arc;

fn main() -> ebm_rl::Result<()> {
    let hashing = HashingEmbedder::new(64);
    let models = RewardModels {
        frames: Arc::new(DirFrameStore::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/frames"))),
        text: Arc::new(CachedTextEmbedder::new(hashing.clone())),
        tokens: Arc::new(hashing),
        likelihood: Arc::new(UnigramLikelihood::default()),
    };
    let reference = ReferenceOutput::parse(
        "<perception>A girl climbs wet stairs.</perception><think>He knows.</think>\
         <answer>Two hundred and twelve, I counted them as a boy.</answer>",
    );
    let raw = [
        "<perception>A girl looks up a wet spiral staircase. An old keeper holds a lantern.</perception>\n\
         <think>The keeper grew up here. He would know the number.</think>\n\
         <answer>Two hundred and twelve. I counted them when I was a boy.</answer>",
        "<perception>A great lamp turns behind thick glass.</perception>\n\
         <think>He says two hundred and twelve, I counted them as a boy.</think>\n\
         <answer>Two hundred and twelve, I counted them as a boy.</answer>",
        "Too many to count, child.",
        "<perception>Fog rolls over dark water.</perception><think>Guess.</think><answer>About two hundred.</answer>",
    ];
    let completions: Vec<_> = raw.iter().map(|r| parse_completion(r)).collect();
    let ctx = GroupContext {
        clip_id: "lighthouse_stairs",
        reference: &reference,
        prompt_context: "GIRL: How many steps are there?",
    };
    let mut cfg = ScoringConfig::default();
    cfg.alignment.variant = AlignmentVariant::SentTopk;

    let batch = score_group(&completions, &ctx, &cfg, &models)?;
    println!("dimensions {DIMENSIONS:?}");
    for (g, (r, a)) in batch.rewards().iter().zip(batch.advantages()).enumerate() {
        println!("g{g}: sem {:.3}  fmt {:+.1}  vis {:.3}  pcg {:+.3}  ->  A = {a:+.4}", r.sem, r.fmt, r.vis, r.pcg);
    }
    Ok(())
}
