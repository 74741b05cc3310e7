//! Host crate for the graph RAG engine: configuration, live provider
//! clients, the fixture corpus loader, the wiki article source, snapshot
//! persistence, the HTTP service, and the CLI subcommand implementations.
//! All algorithmic work lives in `edukg-core`; this crate owns the I/O.

pub mod config;
pub mod corpus;
pub mod engine;
pub mod evalcmd;
pub mod http;
pub mod providers;
pub mod wiki;
