//! Parse structured completions and score their format.
//!
//! Run with `cargo run --example format_reward`.

use ebm_rl::structure::{format_reward, parse_completion};

fn main() {
    let cases = [
        (
            "well-formed",
            "<perception>A ferry rounds the breakwater.</perception>\n<think>Tom is teasing.</think>\n<answer>Only if you stop filming.</answer>",
        ),
        ("tagless", "Only if you stop filming."),
        (
            "out of order",
            "<answer>Fine.</answer><think>short</think><perception>a pier</perception>",
        ),
        (
            "missing think",
            "<perception>a pier</perception><answer>Fine.</answer>",
        ),
        (
            "trailing text",
            "<perception>a pier</perception><think>t</think><answer>Fine.</answer> ok?",
        ),
    ];

    println!("{:<14} {:>6} {:>6} {:>6} {:>6}", "case", "tag", "order", "bound", "total");
    for (name, raw) in cases {
        let s = format_reward(raw);
        println!("{name:<14} {:>6.1} {:>6.1} {:>6.1} {:>6.1}", s.tag_score, s.order_score, s.boundary_score, s.total);
    }

    let c = parse_completion(cases[0].1);
    println!("\nparsed segments of the well-formed completion:");
    println!("  perception: {:?}", c.perception);
    println!("  think:      {:?}", c.think);
    println!("  answer:     {:?}", c.answer);
}
