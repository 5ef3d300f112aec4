//! Detect answer leakage in reasoning and compute the copy penalty.
//!
//! Run with `cargo run --example copy_sanitization`.

use ebm_rl::lexical::{answer_recall_rouge_l, clean_and_penalize, detect_cue, ngram_overlap, normalize, CueThresholds};
use ebm_rl::visual::split_sentences;

fn main() {
    let th = CueThresholds::default();
    let answer = "Two hundred and twelve, I counted them as a boy.";
    let reasoning = "The keeper has lived here since childhood. \
                     He would say: two hundred and twelve, I counted them. \
                     The girl is curious about the tower!";

    let a = normalize(answer);
    println!("answer tokens: {:?}\n", a.as_slice());
    for s in split_sentences(reasoning) {
        let t = normalize(&s);
        println!("{s}");
        println!(
            "  4-gram {}  3-gram {}  R_L {:.3}  cue {}",
            ngram_overlap(&t, &a, 4),
            ngram_overlap(&t, &a, 3),
            answer_recall_rouge_l(&t, &a),
            detect_cue(&t, &a, &th)
        );
    }

    let r = clean_and_penalize(Some(reasoning), Some(answer), &th);
    println!("\nflags: {:?}", r.flags);
    println!("copy penalty: {}", r.copy_penalty);
    println!("kept sentences: {:?}", r.kept_sentences);

    let empty = clean_and_penalize(None, Some(answer), &th);
    println!("\nno reasoning at all -> penalty {}", empty.copy_penalty);
}
