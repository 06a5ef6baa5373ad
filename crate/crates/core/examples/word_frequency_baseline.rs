// The frequency baseline: frequent words fade, rare ones stay opaque.

use gptsm::saliency_map::{map_wf, Method, OpacityConfig};
use gptsm::text_model::segment;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let doc = segment(include_str!("data/deforestation.txt"));
    for target in [0.2, 0.35, 0.5] {
        let cfg = OpacityConfig {
            method: Method::WfTsm,
            wf_faded_fraction_target: Some(target),
            ..OpacityConfig::default()
        };
        let out = map_wf(&doc, &cfg);
        let faded: Vec<String> = doc.paragraphs[0]
            .units()
            .iter()
            .zip(&out.map.paragraphs[0].units)
            .filter(|(_, s)| s.opacity < 1.0)
            .map(|(u, s)| format!("{}@{:.2}", u.text, s.opacity))
            .collect();
        println!(
            "target {target:.2}: achieved {:.3}, threshold count {:?}",
            out.achieved, out.threshold
        );
        println!("  {}", faded.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
