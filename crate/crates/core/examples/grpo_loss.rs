//! GRPO clipped-surrogate loss, KL estimate and clip statistics.
//!
//! Run with `cargo run --example grpo_loss`.

use ebm_rl::grpo::{grpo_loss, grpo_loss_grad, grpo_stats, kl_term, GrpoConfig, TokenLogProbs};

fn main() -> ebm_rl::Result<()> {
    let cfg = GrpoConfig::new(0.2, 0.0)?;
    let seq = TokenLogProbs { new_lp: vec![1.5f64.ln()], old_lp: vec![0.0], ref_lp: vec![1.5f64.ln()] };
    println!("r = 1.5, A = +1 -> loss {}", grpo_loss(std::slice::from_ref(&seq), &[1.0], &cfg)?);
    println!("r = 1.5, A = -1 -> loss {}", grpo_loss(&[seq], &[-1.0], &cfg)?);

    println!("\nKL estimator rho - ln rho - 1:");
    for d in [-1.0, -0.1, 0.0, 0.1, 1.0] {
        println!("  ref - new = {d:+.1} -> {:.6}", kl_term(d, 0.0));
    }

    let cfg = GrpoConfig::new(0.2, 0.04)?;
    let group = vec![
        TokenLogProbs {
            new_lp: vec![-0.9, -1.2, -0.3],
            old_lp: vec![-1.0, -1.0, -0.4],
            ref_lp: vec![-1.1, -1.0, -0.5],
        },
        TokenLogProbs { new_lp: vec![-2.0, -0.2], old_lp: vec![-1.5, -0.4], ref_lp: vec![-1.8, -0.3] },
    ];
    let adv = [0.8, -0.8];
    let s = grpo_stats(&group, &adv, &cfg)?;
    println!(
        "\ngroup of 2: loss {:.6}  mean KL {:.6}  clip fraction {:.3}  tokens {}",
        s.loss, s.mean_kl, s.clip_fraction, s.tokens
    );
    for (g, row) in grpo_loss_grad(&group, &adv, &cfg)?.iter().enumerate() {
        println!("  d loss / d new_lp[{g}] = {row:.5?}");
    }
    Ok(())
}
