use super::{EmbeddingMatrix, FrameSource};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// On-disk frame embedding file, one per clip: `<root>/<clip_id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFile {
    pub clip_id: String,
    pub dim: usize,
    pub frames: Vec<Vec<f64>>,
}

impl FrameFile {
    pub fn into_matrix(self) -> Result<EmbeddingMatrix> {
        if let Some(bad) = self.frames.iter().find(|r| r.len() != self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, got: bad.len() });
        }
        EmbeddingMatrix::from_rows(self.clip_id, self.frames)
    }
}

/// Reads frame files from a directory.
#[derive(Debug, Clone)]
pub struct DirFrameStore {
    root: PathBuf,
}

impl DirFrameStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_for(&self, clip_id: &str) -> PathBuf {
        self.root.join(format!("{clip_id}.json"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

fn valid_clip_id(clip_id: &str) -> bool {
    !clip_id.is_empty()
        && !clip_id.starts_with('.')
        && clip_id.chars().all(|c| c.is_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl FrameSource for DirFrameStore {
    fn load_frames(&self, clip_id: &str) -> Result<EmbeddingMatrix> {
        if !valid_clip_id(clip_id) {
            return Err(Error::ClipNotFound(clip_id.to_string()));
        }
        let path = self.path_for(clip_id);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::ClipNotFound(clip_id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let file: FrameFile = serde_json::from_slice(&bytes)?;
        if file.clip_id != clip_id {
            return Err(Error::InvalidMatrix(format!("{} declares clip_id {:?}", path.display(), file.clip_id)));
        }
        file.into_matrix()
    }
}

/// In-memory frame store.
#[derive(Debug, Clone, Default)]
pub struct MemoryFrameStore {
    clips: HashMap<String, EmbeddingMatrix>,
}

impl MemoryFrameStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, clip_id: &str, rows: Vec<Vec<f64>>) -> Result<()> {
        let m = EmbeddingMatrix::from_rows(clip_id, rows)?;
        self.clips.insert(clip_id.to_string(), m);
        Ok(())
    }
}

impl FrameSource for MemoryFrameStore {
    fn load_frames(&self, clip_id: &str) -> Result<EmbeddingMatrix> {
        self.clips.get(clip_id).cloned().ok_or_else(|| Error::ClipNotFound(clip_id.to_string()))
    }
}

pub fn load_frame_embeddings(clip_id: &str, store: &dyn FrameSource) -> Result<EmbeddingMatrix> {
    store.load_frames(clip_id)
}
