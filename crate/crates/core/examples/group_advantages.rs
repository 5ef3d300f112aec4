//! Per-dimension z-score normalization and weighted advantages for a group.
//!
//! Run with `cargo run --example group_advantages`.

use ebm_rl::aggregate::{GroupBatch, RewardVector, WeightVector, ZSCORE_EPS};

fn main() -> ebm_rl::Result<()> {
    let rewards = vec![
        RewardVector { sem: 0.91, fmt: 5.0, vis: 0.42, pcg: 0.35 },
        RewardVector { sem: 0.95, fmt: 5.0, vis: 0.18, pcg: -0.60 },
        RewardVector { sem: 0.00, fmt: -5.0, vis: 0.00, pcg: -1.00 },
        RewardVector { sem: 0.40, fmt: 5.0, vis: 0.30, pcg: 0.05 },
    ];
    let weights = WeightVector::default();
    let batch = GroupBatch::from_rewards(rewards, &weights, ZSCORE_EPS)?;

    println!("weights (sem, fmt, vis, pcg) = {:?}\n", weights.to_array());
    println!("{:>3} {:>30}   {:>40}   {:>8}", "g", "raw", "normalized", "A_g");
    for (g, ((raw, norm), adv)) in batch.raw().iter().zip(batch.normalized()).zip(batch.advantages()).enumerate() {
        let fmt = |v: &[f64; 4]| v.iter().map(|x| format!("{x:+.3}")).collect::<Vec<_>>().join(" ");
        println!("{g:>3} {:>30}   {:>40}   {adv:+8.4}", fmt(raw), fmt(norm));
    }

    let same = vec![RewardVector { sem: 0.5, fmt: 5.0, vis: 0.3, pcg: 0.1 }; 3];
    let flat = GroupBatch::from_rewards(same, &weights, ZSCORE_EPS)?;
    println!("\nidentical completions -> advantages {:?}", flat.advantages());
    Ok(())
}
