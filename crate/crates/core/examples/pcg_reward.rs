//! Perception-conditioned gain: how much a cleaned reasoning block raises
//! the reference policy's likelihood of the ground-truth answer.
//!
//! Run with `cargo run --example pcg_reward`.

use ebm_rl::lexical::CueThresholds;
use ebm_rl::pcg::{pcg_detailed, FixtureLikelihood, PcgInputs, TargetLogProbs, UnigramLikelihood};

fn main() -> ebm_rl::Result<()> {
    let th = CueThresholds::default();
    let gt = "The one that does not wobble.";
    let context = "ANNA: Which one, the tall one?";

    let unigram = UnigramLikelihood::default();
    let cases = [
        (
            "grounded",
            Some("A man carries a ladder that does not wobble."),
            Some("Ben wants the one he trusts. It must not wobble."),
        ),
        ("copying", Some("A man carries a ladder."), Some("He will say the one that does not wobble.")),
        ("unrelated", Some("Morning light through branches."), Some("Ben is tired.")),
        ("empty", None, None),
    ];
    println!("unigram reference policy:");
    for (name, perception, reasoning) in cases {
        let b = pcg_detailed(
            &PcgInputs { prompt_context: context, perception, reasoning, answer: Some(gt), gt_answer: gt },
            &th,
            &unigram,
        )?;
        println!(
            "  {name:<10} reward {:+.4}  gain {:+.4}  penalty {:.3}  block {:?}",
            b.reward,
            b.loglik_with_block - b.loglik_context,
            b.copy_penalty,
            b.cleaned_block
        );
    }

    // A fixture provider with hand-set values: the block raises the mean
    // log-likelihood from -2.0 to -1.5 and nothing is copied.
    let perception = "A ladder leans on a pear tree.";
    let reasoning = "Ben trusts only sturdy things.";
    let mut fx = FixtureLikelihood::new();
    let summary = |m| TargetLogProbs::Summary { token_count: 6, mean_logprob: m };
    fx.insert(context, gt, summary(-2.0));
    fx.insert(&format!("{context}\n{perception}\n{reasoning}"), gt, summary(-1.5));
    let b = pcg_detailed(
        &PcgInputs {
            prompt_context: context,
            perception: Some(perception),
            reasoning: Some(reasoning),
            answer: Some(gt),
            gt_answer: gt,
        },
        &th,
        &fx,
    )?;
    println!("\nfixture reference policy: reward {} (penalty {})", b.reward, b.copy_penalty);
    Ok(())
}
