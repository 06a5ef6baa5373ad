// Word-level diff and reversion of an LLM response onto the original.

use gptsm::diff_align::{diff, revert};
use gptsm::text_model::unit_words;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let original = unit_words("It also, as previously explained, involves a release of carbon.");
    let response = unit_words("It also causes a release of CO2.");

    for op in &diff(&original, &response).ops {
        println!(
            "{:<8?} {:?} -> {:?}",
            op.kind,
            &original[op.a.clone()],
            &response[op.b.clone()]
        );
    }

    // Inserted words are dropped, replaced spans restored.
    let rr = revert(&original, &response);
    println!("reverted:   {}", rr.reverted_words.join(" "));
    println!("positions:  {:?}", rr.kept_indices);
    println!("paraphrased response words: {}", rr.paraphrase_count);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
