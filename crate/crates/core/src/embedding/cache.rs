use super::TextEmbedder;
use crate::error::Result;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

type Entries = HashMap<(String, String), Arc<Vec<f64>>>;

/// Memoizes a [`TextEmbedder`] keyed by (backend id, exact text bytes).
///
/// Misses are computed outside the lock; the first value inserted for a key
/// wins, so concurrent callers always observe the same vector.
pub struct CachedTextEmbedder<E> {
    inner: E,
    entries: Mutex<Entries>,
}

impl<E: TextEmbedder> CachedTextEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, entries: Mutex::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    fn key(&self, text: &str) -> (String, String) {
        (self.inner.backend_id().to_string(), text.to_string())
    }
}

impl<E: TextEmbedder> TextEmbedder for CachedTextEmbedder<E> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut misses: Vec<&str> = {
            let entries = self.entries.lock().unwrap();
            texts.iter().copied().filter(|t| !entries.contains_key(&self.key(t))).collect()
        };
        misses.sort_unstable();
        misses.dedup();

        if !misses.is_empty() {
            let fresh = self.inner.embed_raw(&misses)?;
            let mut entries = self.entries.lock().unwrap();
            for (text, v) in misses.iter().zip(fresh) {
                entries.entry(self.key(text)).or_insert_with(|| Arc::new(v));
            }
        }

        let entries = self.entries.lock().unwrap();
        Ok(texts.iter().map(|t| entries[&self.key(t)].as_ref().clone()).collect())
    }
}
