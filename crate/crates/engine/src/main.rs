use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use edukg_engine::config::ServiceConfig;
use edukg_engine::engine::Engine;
use edukg_engine::evalcmd::run_eval;
use edukg_engine::http::router;

/// Graph RAG engine for slide-deck learning materials: builds a knowledge
/// graph per deck, tracks per-learner not-understood concepts, recommends
/// questions, and answers them extractively with citations.
#[derive(Parser)]
#[command(name = "engine", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Ingest a deck file and persist its knowledge-graph snapshot.
    Ingest {
        /// Deck document (deck-v1 JSON).
        deck: PathBuf,
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Answer one question against an ingested material.
    Ask {
        #[arg(long)]
        material: String,
        #[arg(long)]
        slide: usize,
        #[arg(long)]
        question: String,
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Aggregate evaluation record files into report tables.
    Eval {
        /// One or more record files (rubric or accuracy, by header).
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Also write the machine-readable report here.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve { config } => serve(&config),
        Command::Ingest { deck, config } => ingest(&deck, &config),
        Command::Ask {
            material,
            slide,
            question,
            config,
        } => ask(&material, slide, &question, &config),
        Command::Eval { records, out } => {
            run_eval(&records, out.as_deref())?;
            Ok(())
        }
    }
}

fn load_engine(config_path: &std::path::Path) -> Result<Arc<Engine>> {
    let config = ServiceConfig::from_file(config_path)?;
    Engine::from_config(config)
}

fn serve(config_path: &std::path::Path) -> Result<()> {
    let engine = load_engine(config_path)?;
    let addr = engine.config.listen_addr.clone();
    let app = router(engine);
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        log::info!("serving on {addr}");
        axum::serve(listener, app).await.context("server stopped")
    })
}

fn ingest(deck: &std::path::Path, config_path: &std::path::Path) -> Result<()> {
    let engine = load_engine(config_path)?;
    let bytes = std::fs::read(deck).with_context(|| format!("reading deck {}", deck.display()))?;
    let summary = engine.ingest_deck(&bytes).map_err(anyhow::Error::new)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn ask(material: &str, slide: usize, question: &str, config_path: &std::path::Path) -> Result<()> {
    let engine = load_engine(config_path)?;
    let answer = engine
        .ask(material, slide, question)
        .map_err(anyhow::Error::new)?;
    println!("{}", serde_json::to_string_pretty(&answer)?);
    Ok(())
}
