//! Heuristic quality score for post-reversion candidates.
//!
//! Four components, each in `[0, 1]`, averaged without weights: semantic
//! fidelity to the original paragraph, closeness of the length ratio to the
//! target, an inverse paraphrase count, and an LLM grammar grade (omitted in
//! NGP mode).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm_gateway::{parse_grade, ChatRequest, Gateway, GatewayError, PromptKind, ScriptTag};

pub const DEFAULT_TARGET_LENGTH_RATIO: f64 = 0.85;

/// Grade used when the reply cannot be parsed twice in a row.
pub const NEUTRAL_GRADE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
#[error("target length ratio must lie in (0, 1], got {0}")]
pub struct InvalidTargetRatio(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub target_length_ratio: f64,
    pub include_grammar: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            target_length_ratio: DEFAULT_TARGET_LENGTH_RATIO,
            include_grammar: true,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), InvalidTargetRatio> {
        let t = self.target_length_ratio;
        if t > 0.0 && t <= 1.0 {
            Ok(())
        } else {
            Err(InvalidTargetRatio(t))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub semantic_fidelity: f64,
    pub length_score: f64,
    pub paraphrase_score: f64,
    pub grammar_score: Option<f64>,
    pub overall: f64,
}

impl CandidateScore {
    pub fn new(semantic_fidelity: f64, length_score: f64, paraphrase_score: f64, grammar_score: Option<f64>) -> Self {
        let (sum, n) = match grammar_score {
            Some(g) => (semantic_fidelity + length_score + paraphrase_score + g, 4.0),
            None => (semantic_fidelity + length_score + paraphrase_score, 3.0),
        };
        CandidateScore {
            semantic_fidelity,
            length_score,
            paraphrase_score,
            grammar_score,
            overall: sum / n,
        }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity mapped from `[-1, 1]` onto `[0, 1]`.
pub fn fidelity_from_embeddings(a: &[f64], b: &[f64]) -> f64 {
    ((cosine(a, b) + 1.0) / 2.0).clamp(0.0, 1.0)
}

pub fn semantic_fidelity(gw: &Gateway, original: &str, candidate: &str) -> Result<f64, GatewayError> {
    let a = gw.embed(original)?;
    let b = gw.embed(candidate)?;
    Ok(fidelity_from_embeddings(&a.0, &b.0))
}

/// Linear tent peaked at the target ratio: `max(0, 1 - |r - t| / t)`.
pub fn length_score(prev_word_count: usize, cand_word_count: usize, cfg: &ScoringConfig) -> f64 {
    assert!(prev_word_count >= 1, "previous level must have at least one word");
    let r = cand_word_count as f64 / prev_word_count as f64;
    let t = cfg.target_length_ratio;
    (1.0 - (r - t).abs() / t).max(0.0)
}

pub fn paraphrase_score(paraphrase_count: usize) -> f64 {
    1.0 / (1.0 + paraphrase_count as f64)
}

/// Asks the chat backend to grade `candidate` A/B/C. An unparseable reply is
/// retried once (as a fresh sample) before falling back to [`NEUTRAL_GRADE`].
pub fn grammar_score(gw: &Gateway, candidate: &str, tag: Option<ScriptTag>) -> Result<f64, GatewayError> {
    let mut req = ChatRequest::new(PromptKind::GrammarGrade, candidate)
        .with_samples(1)
        .with_temperature(0.0);
    req.tag = tag;
    for attempt in 0..2 {
        let reply = gw.complete_from(&req, attempt)?;
        if let Some(g) = parse_grade(&reply[0]) {
            return Ok(g);
        }
    }
    Ok(NEUTRAL_GRADE)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub words: Vec<String>,
    pub score: CandidateScore,
}

/// Index of the best candidate: highest overall, then fewer words, then the
/// earliest position. `None` for an empty list.
pub fn select_best(candidates: &[ScoredCandidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &candidates[b];
                c.score.overall > cur.score.overall
                    || (c.score.overall == cur.score.overall && c.words.len() < cur.words.len())
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}
