//! Core engine for graph retrieval-augmented question generation and
//! answering over educational knowledge graphs.
//!
//! The crate is `no_std` (with `alloc`) by design: everything in here is pure
//! computation over in-memory data. All I/O — article sources, embedding and
//! chat providers, files, HTTP — is abstracted behind traits that a host crate
//! implements. The companion `edukg-engine` crate supplies the file formats,
//! the live clients, the HTTP service, and the CLI.
//!
//! Layout:
//! - [`graph`]: typed property-graph store (EduKG + per-learner PKG overlays)
//!   with snapshot persistence.
//! - [`ingest`]: slide decks → LM/Slide/MC/RC graph construction.
//! - [`keyphrase`]: co-occurrence-graph keyphrase ranking for main concepts.
//! - [`embed`] and [`index`]: paragraph chunking, embeddings, and slide-scoped
//!   cosine top-k retrieval over paragraph nodes.
//! - [`gateway`]: chat-completion abstraction, the three prompt templates, and
//!   their response parsers.
//! - [`qgen`]: PKG-based question generation (generate, dedup, re-rank).
//! - [`qa`]: EduKG-based extractive question answering with citations and a
//!   related-concept fallback.
//! - [`eval`]: rubric/accuracy record aggregation and report rendering.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod embed;
pub mod eval;
pub mod gateway;
pub mod graph;
pub mod index;
pub mod ingest;
pub mod keyphrase;
pub mod qa;
pub mod qgen;
pub mod source;
pub mod text;

mod stopwords;

pub use embed::{cosine, Embedding, EmbeddingProvider, HashEmbedder};
pub use gateway::{ChatProvider, ChatRequest, ScriptedProvider};
pub use graph::{EdgeKind, KnowledgeGraph, Node, NodeId, NodeKind, PkgView};
pub use index::ScoredParagraph;
pub use ingest::SlideDeck;
pub use qa::{AnswerSet, AnswerStatus, AnswerWithCitation};
pub use qgen::GeneratedQuestion;
pub use source::{ArticleRef, ArticleSource, FetchedArticle, InMemorySource};
