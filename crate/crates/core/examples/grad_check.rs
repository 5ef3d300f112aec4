//! Finite-difference check of the analytic GRPO gradient on a toy softmax
//! policy.
//!
//! Run with `cargo run --release --example grad_check [seeds]`.

use ebm_rl::grpo::{toy_policy_grad_check, GradCheckConfig};

fn main() -> ebm_rl::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cfg = GradCheckConfig::default();
    println!(
        "group {} x len <= {} x vocab {}, step {:e}, eps {}, beta {}",
        cfg.group_size, cfg.max_len, cfg.vocab, cfg.step, cfg.grpo.clip_eps, cfg.grpo.kl_beta
    );
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let r = toy_policy_grad_check(seed, &cfg)?;
        worst = worst.max(r.max_rel_error);
        println!(
            "seed {seed:>3}: params {:>3}  loss {:+.6}  clipped {:.2}  max abs err {:.2e}  max rel err {:.2e}",
            r.params, r.loss, r.clip_fraction, r.max_abs_error, r.max_rel_error
        );
    }
    println!("worst relative error: {worst:.2e}");
    Ok(())
}
