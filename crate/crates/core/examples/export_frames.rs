//! Write frame-embedding files for a caption manifest.
//!
//! Each frame vector is the hashing-embedder sentence vector of its
//! caption, so text mentioning a frame's content aligns with it. This is
//! how `fixtures/frames` is produced:
//!
//! ```text
//! cargo run --example export_frames -- fixtures/scenes.json fixtures/frames
//! ```

use ebm_rl::embedding::{DirFrameStore, FrameFile, FrameSource, HashingEmbedder};
use std::collections::BTreeMap;
use std::path::PathBuf;

fn main() -> ebm_rl::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let mut args = std::env::args().skip(1);
    let scenes = args.next().map(PathBuf::from).unwrap_or_else(|| root.join("fixtures/scenes.json"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("ebm-rl-frames"));
    let dim: usize = args.next().and_then(|d| d.parse().ok()).unwrap_or(64);

    let captions: BTreeMap<String, Vec<String>> = serde_json::from_str(&std::fs::read_to_string(&scenes)?)?;
    let embedder = HashingEmbedder::new(dim);
    std::fs::create_dir_all(&out)?;
    let store = DirFrameStore::new(&out);
    for (clip_id, caps) in &captions {
        let file = FrameFile {
            clip_id: clip_id.clone(),
            dim,
            frames: caps.iter().map(|c| embedder.sentence_vector(c)).collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        std::fs::write(store.path_for(clip_id), text)?;
        let back = store.load_frames(clip_id)?;
        println!("{clip_id}: {} frames x {} -> {}", back.rows(), back.dim(), store.path_for(clip_id).display());
    }
    Ok(())
}
