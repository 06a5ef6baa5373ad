// Score a handful of shortened candidates and pick the best one.

use gptsm::candidate_scoring::{
    grammar_score, length_score, paraphrase_score, select_best, semantic_fidelity, CandidateScore, ScoredCandidate,
    ScoringConfig,
};
use gptsm::diff_align::revert;
use gptsm::llm_gateway::{Gateway, MockScript, PromptKind, ScriptTag};
use gptsm::text_model::{text_digest, unit_words};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let original = "Rivers, it is said, carry silt a very long way downstream.";
    let candidates = [
        "Rivers carry silt a very long way downstream.",
        "Rivers carry silt downstream.",
        "Streams carry silt a very long way downstream.",
        "Rivers carry a way.",
    ];

    // Grades come from a scripted backend: "A" for all but the last.
    let mut script = MockScript::new();
    script.insert(
        PromptKind::GrammarGrade,
        original,
        1,
        vec!["A".into(), "A".into(), "A".into(), "C".into()],
    );
    let gw = Gateway::scripted(script);
    let cfg = ScoringConfig::default();
    let words = unit_words(original);

    let mut scored = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let rr = revert(&words, &unit_words(c));
        let tag = ScriptTag {
            paragraph_digest: text_digest(original),
            round: 1,
            candidate: i,
        };
        let score = CandidateScore::new(
            semantic_fidelity(&gw, original, c)?,
            length_score(words.len(), rr.reverted_words.len(), &cfg),
            paraphrase_score(rr.paraphrase_count),
            Some(grammar_score(&gw, c, Some(tag))?),
        );
        println!(
            "{:.3} = mean(fid {:.3}, len {:.3}, para {:.3}, gram {:.1})  {c}",
            score.overall,
            score.semantic_fidelity,
            score.length_score,
            score.paraphrase_score,
            score.grammar_score.unwrap_or(f64::NAN)
        );
        scored.push(ScoredCandidate {
            words: rr.reverted_words,
            score,
        });
    }
    let best = select_best(&scored).expect("candidates");
    println!("best: {}", candidates[best]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
