//! The per-paragraph recursive shortening loop.
//!
//! Each round asks the chat backend for `sample_count` shortenings of the
//! current level, reverts insertions and substitutions, drops candidates
//! that delete nothing, scores the rest and keeps the best one as the next
//! level. The loop ends when no candidate deletes anything or the round cap
//! is reached.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate_scoring::{
    grammar_score, length_score, paraphrase_score, select_best, semantic_fidelity, CandidateScore,
    ScoredCandidate, ScoringConfig,
};
use crate::diff_align::{label_positions, revert, RoundLabel};
use crate::llm_gateway::{
    ChatRequest, Gateway, GatewayError, PromptKind, ScriptTag, DEFAULT_SAMPLE_COUNT, DEFAULT_TEMPERATURE,
};
use crate::text_model::{unit_words, Document, Paragraph};

pub const DEFAULT_MAX_ROUNDS: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Grammar-preserving prompt and grammar grading.
    Gp,
    /// Prompt without the readability clause and no grammar grading.
    Ngp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub sample_count: usize,
    pub max_rounds: u32,
    pub mode: Mode,
    pub temperature: f64,
    pub scoring: ScoringConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::gp()
    }
}

impl EngineConfig {
    pub fn gp() -> Self {
        EngineConfig {
            sample_count: DEFAULT_SAMPLE_COUNT,
            max_rounds: DEFAULT_MAX_ROUNDS,
            mode: Mode::Gp,
            temperature: DEFAULT_TEMPERATURE,
            scoring: ScoringConfig::default(),
        }
    }

    pub fn ngp() -> Self {
        EngineConfig::gp().with_mode(Mode::Ngp)
    }

    /// Switches mode; NGP always disables grammar grading.
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self.scoring.include_grammar = mode == Mode::Gp;
        self
    }

    pub fn prompt_kind(&self) -> PromptKind {
        match self.mode {
            Mode::Gp => PromptKind::ShortenGp,
            Mode::Ngp => PromptKind::ShortenNgp,
        }
    }

    fn include_grammar(&self) -> bool {
        self.mode == Mode::Gp && self.scoring.include_grammar
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("paragraph {0} has no words")]
    EmptyParagraph(usize),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Record of one paragraph's compression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub paragraph_index: usize,
    /// `levels[0]` holds the paragraph's units; `levels[k]` the chosen
    /// post-reversion units of round `k`.
    pub levels: Vec<Vec<String>>,
    /// Original unit positions present at each level.
    pub positions: Vec<Vec<usize>>,
    /// Each level printed with the original whitespace.
    pub level_texts: Vec<String>,
    pub per_round_scores: Vec<CandidateScore>,
    pub rounds: u32,
}

impl LevelTrace {
    /// A trace with no compression rounds.
    pub fn unchanged(p: &Paragraph) -> Self {
        let units = p.unit_words();
        LevelTrace {
            paragraph_index: p.index,
            positions: vec![(0..units.len()).collect()],
            levels: vec![units],
            level_texts: vec![p.text()],
            per_round_scores: Vec::new(),
            rounds: 0,
        }
    }

    /// Round label of every unit of the original paragraph.
    pub fn labels(&self) -> Vec<RoundLabel> {
        label_positions(self.levels[0].len(), &self.positions[1..])
    }
}

struct Survivor {
    sample: usize,
    words: Vec<String>,
    positions: Vec<usize>,
    text: String,
    paraphrase_count: usize,
}

/// Runs the recursive shortening loop on one paragraph.
pub fn compress_paragraph(gw: &Gateway, p: &Paragraph, cfg: &EngineConfig) -> Result<LevelTrace, EngineError> {
    if p.is_empty() {
        return Err(EngineError::EmptyParagraph(p.index));
    }
    let mut trace = LevelTrace::unchanged(p);
    let original_text = trace.level_texts[0].clone();
    let digest = p.digest();
    let include_grammar = cfg.include_grammar();

    for round in 1..=cfg.max_rounds {
        let current = trace.levels.last().expect("level 0 always present");
        let current_pos = trace.positions.last().expect("level 0 always present");
        let current_text = trace.level_texts.last().expect("level 0 always present");
        let tag = ScriptTag {
            paragraph_digest: digest.clone(),
            round,
            candidate: 0,
        };
        let req = ChatRequest::new(cfg.prompt_kind(), current_text.as_str())
            .with_samples(cfg.sample_count)
            .with_temperature(cfg.temperature)
            .with_tag(tag.clone());
        let responses = gw.complete(&req)?;

        let mut survivors: Vec<Survivor> = Vec::new();
        for (sample, resp) in responses.iter().enumerate() {
            let rr = revert(current, &unit_words(resp));
            // Zero deletions after reversion is a refusal; an empty result is
            // treated the same way.
            if rr.reverted_words.len() == current.len() || rr.reverted_words.is_empty() {
                continue;
            }
            let positions: Vec<usize> = rr.kept_indices.iter().map(|&j| current_pos[j]).collect();
            survivors.push(Survivor {
                sample,
                text: p.render_subset(&positions),
                words: rr.reverted_words,
                positions,
                paraphrase_count: rr.paraphrase_count,
            });
        }
        if survivors.is_empty() {
            break;
        }

        let mut scored = Vec::with_capacity(survivors.len());
        let mut graded: Vec<(&str, f64)> = Vec::new();
        for s in &survivors {
            let fidelity = semantic_fidelity(gw, &original_text, &s.text)?;
            let length = length_score(current.len(), s.words.len(), &cfg.scoring);
            let paraphrase = paraphrase_score(s.paraphrase_count);
            let grammar = if include_grammar {
                // identical candidates share one grading request
                match graded.iter().find(|(t, _)| *t == s.text) {
                    Some(&(_, g)) => Some(g),
                    None => {
                        let tag = ScriptTag {
                            candidate: s.sample,
                            ..tag.clone()
                        };
                        let g = grammar_score(gw, &s.text, Some(tag))?;
                        graded.push((&s.text, g));
                        Some(g)
                    }
                }
            } else {
                None
            };
            scored.push(ScoredCandidate {
                words: s.words.clone(),
                score: CandidateScore::new(fidelity, length, paraphrase, grammar),
            });
        }
        let best = select_best(&scored).expect("survivors is non-empty");
        let chosen = &survivors[best];
        trace.per_round_scores.push(scored[best].score);
        trace.levels.push(chosen.words.clone());
        trace.positions.push(chosen.positions.clone());
        trace.level_texts.push(chosen.text.clone());
        trace.rounds = round;
    }
    Ok(trace)
}

#[derive(Debug)]
pub struct ParagraphFailure {
    pub paragraph_index: usize,
    pub error: EngineError,
}

#[derive(Debug, Default)]
pub struct DocumentTraces {
    /// One trace per paragraph, in document order.
    pub traces: Vec<LevelTrace>,
    /// Paragraphs whose compression failed; their traces have zero rounds.
    pub failures: Vec<ParagraphFailure>,
}

impl DocumentTraces {
    pub fn has_offline_miss(&self) -> bool {
        self.failures.iter().any(|f| {
            matches!(
                f.error,
                EngineError::Gateway(GatewayError::OfflineMiss { .. })
            )
        })
    }
}

/// Compresses every paragraph, up to `workers` at a time. Results come back
/// in paragraph order; a failed paragraph keeps a zero-round trace.
pub fn compress_document(gw: &Gateway, doc: &Document, cfg: &EngineConfig, workers: usize) -> DocumentTraces {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let n = doc.paragraphs.len();
    let results: Vec<Mutex<Option<Result<LevelTrace, EngineError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let run = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= n {
            break;
        }
        let p = &doc.paragraphs[i];
        let r = if p.is_empty() {
            Ok(LevelTrace::unchanged(p))
        } else {
            compress_paragraph(gw, p, cfg)
        };
        *results[i].lock().expect("result slot poisoned") = Some(r);
    };
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        run();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(run);
            }
        });
    }

    let mut out = DocumentTraces::default();
    for (p, slot) in doc.paragraphs.iter().zip(results) {
        match slot.into_inner().expect("result slot poisoned").expect("every paragraph processed") {
            Ok(t) => out.traces.push(t),
            Err(error) => {
                out.traces.push(LevelTrace::unchanged(p));
                out.failures.push(ParagraphFailure {
                    paragraph_index: p.index,
                    error,
                });
            }
        }
    }
    out
}
