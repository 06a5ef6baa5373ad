// Run the grammar-preserving and unconstrained variants on the same text
// and emit a two-column HTML page.

use gptsm::llm_gateway::{Gateway, MockScript, PromptKind};
use gptsm::pipeline::{self, PipelineConfig};
use gptsm::renderers::{render_compare_html, RenderPlan};
use gptsm::saliency_map::Method;
use gptsm::text_model::segment;

const TEXT: &str = "Rivers, it is said, carry silt a very long way downstream.";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut script = MockScript::new();
    script
        .insert(PromptKind::ShortenGp, TEXT, 1, vec!["Rivers carry silt a very long way downstream.".into()])
        .insert(PromptKind::ShortenGp, TEXT, 2, vec!["Rivers carry silt downstream.".into()])
        .insert(PromptKind::ShortenNgp, TEXT, 1, vec!["Rivers silt long downstream.".into()]);
    let gw = Gateway::scripted(script);
    let doc = segment(TEXT);

    let gp = pipeline::run(&gw, &doc, &PipelineConfig::for_method(Method::GpTsm))?;
    let ngp = pipeline::run(&gw, &doc, &PipelineConfig::for_method(Method::NgpTsm))?;
    println!("GP:  {:?}", gp.traces[0].level_texts);
    println!("NGP: {:?}", ngp.traces[0].level_texts);

    let html = render_compare_html(
        ("GP-TSM", &RenderPlan::new(&doc, &gp.map)),
        ("NGP-TSM", &RenderPlan::new(&doc, &ngp.map)),
    );
    let path = std::env::temp_dir().join("gptsm-compare.html");
    std::fs::write(&path, html)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
