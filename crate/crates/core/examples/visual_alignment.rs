//! Compare the CLIP-Max and Sentence-Top-K visual rewards on a fixture clip.
//!
//! Frames come from `fixtures/frames`; sentences are embedded with the
//! same deterministic hashing embedder that produced them.
//!
//! Run with `cargo run --example visual_alignment`.

use ebm_rl::embedding::{load_frame_embeddings, DirFrameStore, HashingEmbedder};
use ebm_rl::visual::{clip_max, clip_sent_topk, split_sentences, top_k_count, AlignmentConfig, AlignmentVariant};

fn main() -> ebm_rl::Result<()> {
    let store = DirFrameStore::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/frames"));
    let frames = load_frame_embeddings("harbor_dusk", &store)?;
    let embedder = HashingEmbedder::new(frames.dim());
    let cfg = AlignmentConfig { alpha: 0.2, variant: AlignmentVariant::SentTopk };
    println!(
        "clip harbor_dusk: N = {} frames, d = {}, K = {}",
        frames.rows(),
        frames.dim(),
        top_k_count(cfg.alpha, frames.rows())
    );

    let perceptions = [
        "A ferry rounds the stone breakwater. Seagulls circle above a small harbor.",
        "A ferry rounds the stone breakwater. A red car drives through a desert.",
        "Snow falls on a mountain village. Children build a snowman.",
    ];
    for p in perceptions {
        println!("\n{p}");
        for s in split_sentences(p) {
            println!("  sentence: {s}");
        }
        let max = clip_max(&frames, Some(p), &embedder)?;
        let topk = clip_sent_topk(&frames, Some(p), &cfg, &embedder)?;
        println!("  clip_max = {max:.4}   sent_topk = {topk:.4}");
    }
    Ok(())
}
