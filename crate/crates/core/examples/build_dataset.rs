//! Build dialogue sessions and leakage-free training samples from the
//! fixture subtitle corpus, then split by session.
//!
//! Run with `cargo run --example build_dataset`.

use ebm_rl::dataset::{process_film, split_by_session, Continuity, SessionSplit};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

fn main() -> ebm_rl::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/srt");
    let roles: BTreeMap<String, Vec<BTreeMap<String, String>>> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("roles.json"))?)?;
    let limits = Continuity::default();

    let mut all = Vec::new();
    for (film, pairs) in &roles {
        let srt = std::fs::read_to_string(dir.join(format!("{film}.srt")))?;
        let speakers: HashMap<usize, String> = match std::fs::read_to_string(dir.join(format!("{film}.speakers.json")))
        {
            Ok(s) => serde_json::from_str(&s)?,
            Err(_) => HashMap::new(),
        };
        let pairs: Vec<(String, String)> = pairs.iter().map(|p| (p["user"].clone(), p["assistant"].clone())).collect();
        let out = process_film(film, &srt, &speakers, &pairs, &limits)?;
        for w in &out.warnings {
            println!("warning: {w}");
        }
        for s in &out.sessions {
            let span = (s.lines[0].start(), s.lines.last().unwrap().end());
            println!("{}  rounds {}  [{:.3}s, {:.3}s]", s.session_id, s.rounds(), span.0, span.1);
        }
        all.extend(out.samples);
    }

    println!("\n{} samples; first one:", all.len());
    let first = &all[0];
    for l in &first.history {
        println!("  {}: {}", l.speaker, l.text);
    }
    println!("  -> target {}: {}", first.target.speaker, first.target.text);
    println!("  clip [{:.3}, {:.3}], target starts {:.3}", first.clip_start(), first.clip_end(), first.target.start());

    let split = split_by_session(&all, 0.2, 7)?;
    println!(
        "\nsplit (seed 7): train {} samples / {} sessions, test {} samples / {} sessions, overlap {}",
        split.train.len(),
        SessionSplit::session_ids(&split.train).len(),
        split.test.len(),
        SessionSplit::session_ids(&split.test).len(),
        split.overlap()
    );
    Ok(())
}
