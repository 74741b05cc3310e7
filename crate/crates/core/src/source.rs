//! Article source abstraction: where concept articles come from.
//!
//! The engine only ever talks to an [`ArticleSource`]; a fixture corpus and a
//! live wiki client both sit behind it. [`InMemorySource`] is the in-memory
//! implementation the fixture corpus loads into, also used directly by tests.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

/// A reference to an article that discusses a concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleRef {
    /// Canonical article title.
    pub title: String,
    /// Source-specific identifier.
    pub article_id: String,
    /// Short summary (typically the article's first sentence or lead).
    pub summary_text: String,
    /// Titles of articles this one links to, deduplicated, self excluded.
    pub link_titles: Vec<String>,
}

impl ArticleRef {
    /// Builds a reference, deduplicating links (order-preserving) and
    /// dropping self-references.
    pub fn new(
        title: impl Into<String>,
        article_id: impl Into<String>,
        summary_text: impl Into<String>,
        link_titles: Vec<String>,
    ) -> Self {
        let title = title.into();
        let mut seen = alloc::collections::BTreeSet::new();
        let links = link_titles
            .into_iter()
            .filter(|t| t != &title && seen.insert(t.clone()))
            .collect();
        Self {
            title,
            article_id: article_id.into(),
            summary_text: summary_text.into(),
            link_titles: links,
        }
    }
}

/// A fully fetched article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedArticle {
    pub title: String,
    pub text: String,
    pub link_titles: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SourceError {
    #[error("article {title:?} not found")]
    NotFound { title: String },
    /// Transient failure; the caller may retry.
    #[error("article source unavailable: {message}")]
    Unavailable { message: String },
}

impl SourceError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SourceError::Unavailable { .. })
    }
}

/// Deterministic, read-only view over an article universe.
pub trait ArticleSource {
    /// Ranked article references matching a phrase. Empty when nothing
    /// matches (not an error).
    fn search(&self, phrase: &str) -> Result<Vec<ArticleRef>, SourceError>;

    /// Full article text plus its outgoing links.
    fn fetch(&self, title: &str) -> Result<FetchedArticle, SourceError>;
}

impl<T: ArticleSource + ?Sized> ArticleSource for &T {
    fn search(&self, phrase: &str) -> Result<Vec<ArticleRef>, SourceError> {
        (**self).search(phrase)
    }
    fn fetch(&self, title: &str) -> Result<FetchedArticle, SourceError> {
        (**self).fetch(title)
    }
}

impl<T: ArticleSource + ?Sized> ArticleSource for alloc::boxed::Box<T> {
    fn search(&self, phrase: &str) -> Result<Vec<ArticleRef>, SourceError> {
        (**self).search(phrase)
    }
    fn fetch(&self, title: &str) -> Result<FetchedArticle, SourceError> {
        (**self).fetch(title)
    }
}

/// An article stored in an [`InMemorySource`].
#[derive(Debug, Clone)]
pub struct StoredArticle {
    pub title: String,
    pub text: String,
    pub links: Vec<String>,
}

/// In-memory article universe with an optional phrase → ranked-titles search
/// index. Lookups fall back to case-insensitive exact title match when the
/// index has no entry for a phrase.
#[derive(Debug, Clone, Default)]
pub struct InMemorySource {
    articles: BTreeMap<String, StoredArticle>,
    /// Lowercased title → canonical title.
    titles_ci: BTreeMap<String, String>,
    /// Lowercased phrase → ranked canonical titles.
    search_index: BTreeMap<String, Vec<String>>,
}

impl InMemorySource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_article(
        &mut self,
        title: impl Into<String>,
        text: impl Into<String>,
        links: Vec<String>,
    ) {
        let title = title.into();
        self.titles_ci.insert(title.to_lowercase(), title.clone());
        self.articles.insert(
            title.clone(),
            StoredArticle {
                title,
                text: text.into(),
                links,
            },
        );
    }

    pub fn add_search_entry(&mut self, phrase: impl Into<String>, titles: Vec<String>) {
        self.search_index
            .insert(phrase.into().to_lowercase(), titles);
    }

    pub fn article_count(&self) -> usize {
        self.articles.len()
    }

    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.articles.keys().map(String::as_str)
    }

    fn make_ref(&self, stored: &StoredArticle) -> ArticleRef {
        ArticleRef::new(
            stored.title.clone(),
            stored.title.to_lowercase().replace(' ', "_"),
            crate::text::first_sentence(&stored.text),
            stored.links.clone(),
        )
    }
}

impl ArticleSource for InMemorySource {
    fn search(&self, phrase: &str) -> Result<Vec<ArticleRef>, SourceError> {
        let key = phrase.to_lowercase();
        if let Some(titles) = self.search_index.get(&key) {
            return Ok(titles
                .iter()
                .filter_map(|t| self.articles.get(t))
                .map(|a| self.make_ref(a))
                .collect());
        }
        if let Some(canonical) = self.titles_ci.get(&key) {
            let stored = &self.articles[canonical];
            return Ok(alloc::vec![self.make_ref(stored)]);
        }
        Ok(Vec::new())
    }

    fn fetch(&self, title: &str) -> Result<FetchedArticle, SourceError> {
        let canonical =
            self.titles_ci
                .get(&title.to_lowercase())
                .ok_or_else(|| SourceError::NotFound {
                    title: title.to_string(),
                })?;
        let stored = &self.articles[canonical];
        let article_ref = self.make_ref(stored);
        Ok(FetchedArticle {
            title: stored.title.clone(),
            text: stored.text.clone(),
            link_titles: article_ref.link_titles,
        })
    }
}
