//! Clipped BERTScore-F1 between a generated and a reference answer.
//!
//! Run with `cargo run --example semantic_reward`.

use ebm_rl::embedding::{EmbeddingMatrix, HashingEmbedder};
use ebm_rl::semantic::{bertscore_prf, semantic_reward, TokenEmbeddings};

fn main() -> ebm_rl::Result<()> {
    // Two candidate tokens against one reference token, hand-built vectors.
    let reference = TokenEmbeddings::new(vec!["yes".into()], EmbeddingMatrix::from_rows("ref", vec![vec![1.0, 0.0]])?)?;
    let candidate = TokenEmbeddings::new(
        vec!["sure".into(), "thing".into()],
        EmbeddingMatrix::from_rows("cand", vec![vec![0.8, 0.6], vec![0.4, 0.84f64.sqrt()]])?,
    )?;
    let s = bertscore_prf(&candidate, &reference)?;
    println!("hand-built: P = {:.4}  R = {:.4}  F1 = {:.4}", s.precision, s.recall, s.f1);

    let embedder = HashingEmbedder::new(64);
    let gt = "Too early. The frost will take them.";
    for answer in [
        "Too early. The frost will take them.",
        "Too early, the frost will take them.",
        "The frost will get them, it is too early.",
        "Any ladder is fine.",
    ] {
        let r = semantic_reward(Some(answer), Some(gt), &embedder)?;
        println!("r_sem = {r:.4}  {answer:?}");
    }
    println!("missing answer -> {}", semantic_reward(None, Some(gt), &embedder)?);
    Ok(())
}
