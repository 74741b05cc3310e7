//! Fixture corpus loading and the caching/prefetching source wrapper.
//!
//! A corpus directory holds one JSON document per article
//! (`{title, text, links: [titles]}`) plus `_index.json` mapping lowercase
//! search phrases to ranked title lists.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::Deserialize;

use edukg_core::source::{ArticleRef, ArticleSource, FetchedArticle, InMemorySource, SourceError};

pub const INDEX_FILE: &str = "_index.json";

/// Loads a corpus directory into an in-memory source.
pub fn load_corpus(dir: &Path) -> Result<InMemorySource> {
    #[derive(Deserialize)]
    struct ArticleDoc {
        title: String,
        text: String,
        #[serde(default)]
        links: Vec<String>,
    }

    let mut source = InMemorySource::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus dir {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    let mut count = 0usize;
    for entry in entries {
        let path = entry.path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        if path.file_name().is_some_and(|n| n == INDEX_FILE) {
            continue;
        }
        let bytes =
            std::fs::read(&path).with_context(|| format!("reading article {}", path.display()))?;
        let doc: ArticleDoc = serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing article {}", path.display()))?;
        source.add_article(doc.title, doc.text, doc.links);
        count += 1;
    }
    anyhow::ensure!(count > 0, "corpus dir {} holds no articles", dir.display());

    let index_path = dir.join(INDEX_FILE);
    if index_path.exists() {
        let bytes = std::fs::read(&index_path)
            .with_context(|| format!("reading {}", index_path.display()))?;
        let index: std::collections::BTreeMap<String, Vec<String>> = serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing {}", index_path.display()))?;
        for (phrase, titles) in index {
            source.add_search_entry(phrase, titles);
        }
    }
    log::info!("corpus: loaded {count} articles from {}", dir.display());
    Ok(source)
}

/// Memoizes search and fetch results and can warm them concurrently before
/// a build. Failures are passed through uncached so transient errors stay
/// retryable.
pub struct CachedSource<S> {
    inner: S,
    searches: Mutex<std::collections::BTreeMap<String, Vec<ArticleRef>>>,
    fetches: Mutex<std::collections::BTreeMap<String, FetchedArticle>>,
}

impl<S: ArticleSource + Sync> CachedSource<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            searches: Mutex::new(Default::default()),
            fetches: Mutex::new(Default::default()),
        }
    }

    /// Warms the caches for a set of concept phrases with bounded fan-out:
    /// each phrase is searched and its best hit fetched. Errors are ignored
    /// here; the build surfaces them when it actually needs the article.
    pub fn prefetch_phrases(&self, phrases: &[String], fanout: usize) {
        if phrases.is_empty() {
            return;
        }
        let queue: Mutex<VecDeque<&String>> = Mutex::new(phrases.iter().collect());
        let workers = fanout.max(1).min(phrases.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let phrase = match queue.lock().expect("queue poisoned").pop_front() {
                        Some(p) => p,
                        None => break,
                    };
                    let Ok(hits) = self.search(phrase) else {
                        continue;
                    };
                    let best = hits
                        .iter()
                        .find(|h| h.title.eq_ignore_ascii_case(phrase))
                        .or_else(|| hits.first());
                    if let Some(hit) = best {
                        let _ = self.fetch(&hit.title);
                    }
                });
            }
        });
    }
}

impl<S: ArticleSource> ArticleSource for CachedSource<S> {
    fn search(&self, phrase: &str) -> Result<Vec<ArticleRef>, SourceError> {
        let key = phrase.to_lowercase();
        if let Some(hit) = self.searches.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let hits = self.inner.search(phrase)?;
        self.searches
            .lock()
            .expect("cache poisoned")
            .insert(key, hits.clone());
        Ok(hits)
    }

    fn fetch(&self, title: &str) -> Result<FetchedArticle, SourceError> {
        let key = title.to_lowercase();
        if let Some(hit) = self.fetches.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let article = self.inner.fetch(title)?;
        self.fetches
            .lock()
            .expect("cache poisoned")
            .insert(key, article.clone());
        Ok(article)
    }
}
