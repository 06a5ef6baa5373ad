//! Compress a paragraph against a real OpenAI-compatible endpoint.
//!
//! ```text
//! LLM_API_KEY=... cargo run --example live_http -- [BASE_URL] [CHAT_MODEL] [EMBED_MODEL]
//! ```
//!
//! Responses are cached in `.gptsm-cache`, so a second run is free.

use std::sync::Arc;

use gptsm::cache_store::{CacheStore, DEFAULT_CACHE_DIR};
use gptsm::llm_gateway::{Gateway, HttpChat, HttpConfig, HttpEmbeddings, DEFAULT_API_KEY_ENV};
use gptsm::pipeline::{self, PipelineConfig};
use gptsm::renderers::{render, Format, RenderPlan};
use gptsm::text_model::segment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if std::env::var_os(DEFAULT_API_KEY_ENV).is_none() {
        eprintln!("set {DEFAULT_API_KEY_ENV} to run this example");
        return Ok(());
    }
    let mut args = std::env::args().skip(1);
    let base = args.next().unwrap_or_else(|| "https://api.openai.com/v1".into());
    let chat_model = args.next().unwrap_or_else(|| "gpt-4".into());
    let embed_model = args.next().unwrap_or_else(|| "text-embedding-3-small".into());

    let config = || HttpConfig::new(base.clone()).with_key_from_env(DEFAULT_API_KEY_ENV);
    let gw = Gateway::new(
        Arc::new(HttpChat::new(config(), &chat_model)?),
        Arc::new(HttpEmbeddings::new(config(), &embed_model)?),
    )
    .with_cache(Arc::new(CacheStore::open(DEFAULT_CACHE_DIR)?));

    let doc = segment(include_str!("data/deforestation.txt"));
    let out = pipeline::run(&gw, &doc, &PipelineConfig::default())?;
    for f in &out.failures {
        eprintln!("paragraph {}: {}", f.paragraph_index, f.error);
    }
    for t in &out.traces {
        for (k, level) in t.level_texts.iter().enumerate() {
            println!("level {k}: {level}");
        }
    }
    print!("{}", render(&RenderPlan::new(&doc, &out.map), Format::Ansi));
    Ok(())
}
