// Replay a scripted four-round compression of the deforestation paragraph
// and print it with terminal colors.

use gptsm::compression_engine::{compress_paragraph, EngineConfig};
use gptsm::llm_gateway::{Gateway, MockScript};
use gptsm::renderers::{render, Format, RenderPlan};
use gptsm::saliency_map::{map_gp, OpacityConfig};
use gptsm::text_model::segment;

const TEXT: &str = include_str!("data/deforestation.txt");
const SCRIPT: &str = include_str!("data/deforestation.mock.json");

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let gw = Gateway::scripted(MockScript::from_json(SCRIPT)?);
    let doc = segment(TEXT);
    let trace = compress_paragraph(&gw, &doc.paragraphs[0], &EngineConfig::gp())?;

    println!("{} rounds", trace.rounds);
    for (k, text) in trace.level_texts.iter().enumerate() {
        println!("level {k} ({} units): {text}", trace.levels[k].len());
    }

    let map = map_gp(&[trace], &doc, &OpacityConfig::default())?;
    println!();
    print!("{}", render(&RenderPlan::new(&doc, &map), Format::Ansi));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
