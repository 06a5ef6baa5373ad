// Write the same saliency map as HTML, ANSI and JSON.

use std::fs;

use gptsm::llm_gateway::{Gateway, MockScript};
use gptsm::pipeline::{self, PipelineConfig};
use gptsm::renderers::{items_text, parse_json, render, AnsiColors, Format, RenderPlan, Theme};
use gptsm::text_model::segment;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let text = include_str!("data/deforestation.txt");
    let doc = segment(text);
    let gw = Gateway::scripted(MockScript::from_json(include_str!("data/deforestation.mock.json"))?);
    let out = pipeline::run(&gw, &doc, &PipelineConfig::default())?;

    let dir = std::env::temp_dir().join("gptsm-render-formats");
    fs::create_dir_all(&dir)?;
    let light = RenderPlan::new(&doc, &out.map);
    let dark = RenderPlan::new(&doc, &out.map).with_theme(Theme::dark()).with_ansi(AnsiColors::Xterm256);
    for (name, plan, format) in [
        ("light.html", &light, Format::Html),
        ("dark.html", &dark, Format::Html),
        ("light.ansi", &light, Format::Ansi),
        ("dark.ansi", &dark, Format::Ansi),
        ("map.json", &light, Format::Json),
    ] {
        let body = render(plan, format);
        fs::write(dir.join(name), &body)?;
        println!("{:>6} bytes  {}", body.len(), dir.join(name).display());
    }

    // The JSON items carry the source text verbatim.
    let items = parse_json(&fs::read_to_string(dir.join("map.json"))?)?;
    assert_eq!(items_text(&items), text);
    println!("faded fraction {:.3}", out.faded_fraction);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
