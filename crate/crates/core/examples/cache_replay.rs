// Warm a response cache with a scripted backend, then replay the same run
// with the network disabled.

use std::sync::Arc;

use gptsm::cache_store::{self, CacheStore};
use gptsm::llm_gateway::{
    ChatBackend, EmbeddingBackend, Gateway, HashEmbedder, MockChat, MockScript, OfflineBackend,
};
use gptsm::pipeline::{self, PipelineConfig};
use gptsm::renderers::{render_json, RenderPlan};
use gptsm::text_model::segment;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("gptsm-cache-replay-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let doc = segment(include_str!("data/deforestation.txt"));
    let cfg = PipelineConfig::default();

    let chat = MockChat::Scripted(MockScript::from_json(include_str!("data/deforestation.mock.json"))?);
    let embed = HashEmbedder::default();
    let (chat_id, embed_id) = (chat.id(), embed.id());

    let warm = Gateway::new(Arc::new(chat), Arc::new(embed)).with_cache(Arc::new(CacheStore::open(&dir)?));
    let first = render_json(&RenderPlan::new(&doc, &pipeline::run(&warm, &doc, &cfg)?.map));
    let stats = warm.cache().expect("cache attached").stats();
    println!("warmed {} entries ({} bytes)", stats.entries, stats.bytes);

    let offline = Gateway::new(
        Arc::new(OfflineBackend {
            id: chat_id,
            cache: dir.clone(),
        }),
        Arc::new(OfflineBackend {
            id: embed_id,
            cache: dir.clone(),
        }),
    )
    .with_cache(Arc::new(CacheStore::open(&dir)?));
    let out = pipeline::run(&offline, &doc, &cfg)?;
    assert!(out.failures.is_empty());
    let second = render_json(&RenderPlan::new(&doc, &out.map));
    println!("offline replay identical: {}", first == second);

    let report = cache_store::verify(&dir)?;
    println!("verify: {} entries, {} bad lines", report.entries, report.bad_lines.len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
