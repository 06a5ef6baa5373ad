//! Per-unit opacity from compression traces, plus the word-frequency baseline.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compression_engine::LevelTrace;
use crate::diff_align::{align_levels, NestingViolation, RoundLabel};
use crate::text_model::{Document, Glue, Paragraph};

pub const DEFAULT_FLOOR: f64 = 0.30;
pub const DEFAULT_WF_TARGET: f64 = 0.5;
pub const DEFAULT_WF_BANDS: u32 = 3;
/// How far the word-frequency baseline may overshoot its target fraction.
pub const WF_OVERSHOOT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum SaliencyError {
    #[error(transparent)]
    Nesting(#[from] NestingViolation),
    #[error("trace for paragraph {0} does not match the document")]
    TraceMismatch(usize),
    #[error("expected {expected} traces, got {got}")]
    TraceCount { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GpTsm,
    NgpTsm,
    WfTsm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpacityConfig {
    pub floor: f64,
    pub method: Method,
    /// Fraction of words the frequency baseline should fade; `None` means
    /// [`DEFAULT_WF_TARGET`].
    pub wf_faded_fraction_target: Option<f64>,
    pub wf_bands: u32,
}

impl Default for OpacityConfig {
    fn default() -> Self {
        OpacityConfig {
            floor: DEFAULT_FLOOR,
            method: Method::GpTsm,
            wf_faded_fraction_target: None,
            wf_bands: DEFAULT_WF_BANDS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSaliency {
    pub label: RoundLabel,
    pub opacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParagraphSaliency {
    /// Number of distinct fade levels (compression rounds, or frequency bands).
    pub rounds: u32,
    /// Parallel to the paragraph's units.
    pub units: Vec<UnitSaliency>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub floor: f64,
    pub paragraphs: Vec<ParagraphSaliency>,
}

/// Linear ladder: round 1 sits at the floor, kept words at 1.0.
pub fn opacity_for(label: RoundLabel, total_rounds: u32, floor: f64) -> f64 {
    match label {
        RoundLabel::Kept => 1.0,
        RoundLabel::RemovedAtRound(r) => {
            debug_assert!(r >= 1 && r <= total_rounds, "round {r} outside 1..={total_rounds}");
            floor + (r - 1) as f64 * (1.0 - floor) / total_rounds as f64
        }
    }
}

fn paragraph_saliency(labels: Vec<RoundLabel>, rounds: u32, floor: f64) -> ParagraphSaliency {
    ParagraphSaliency {
        rounds,
        units: labels
            .into_iter()
            .map(|label| UnitSaliency {
                label,
                opacity: opacity_for(label, rounds, floor),
            })
            .collect(),
    }
}

fn trace_labels(trace: &LevelTrace, p: &Paragraph) -> Result<Vec<RoundLabel>, SaliencyError> {
    let units = p.unit_words();
    if trace.paragraph_index != p.index || trace.levels.first() != Some(&units) {
        return Err(SaliencyError::TraceMismatch(p.index));
    }
    if trace.levels.len() != trace.rounds as usize + 1 {
        return Err(SaliencyError::TraceMismatch(p.index));
    }
    let positions_agree = trace.positions.len() == trace.levels.len()
        && trace.positions.iter().zip(&trace.levels).all(|(pos, words)| {
            pos.len() == words.len()
                && pos.windows(2).all(|w| w[0] < w[1])
                && pos.iter().zip(words).all(|(&i, w)| units.get(i) == Some(w))
        });
    if positions_agree {
        Ok(trace.labels())
    } else {
        Ok(align_levels(&trace.levels)?)
    }
}

/// Opacity for compression traces (GP-TSM and NGP-TSM).
pub fn map_gp(traces: &[LevelTrace], doc: &Document, cfg: &OpacityConfig) -> Result<SaliencyMap, SaliencyError> {
    if traces.len() != doc.paragraphs.len() {
        return Err(SaliencyError::TraceCount {
            expected: doc.paragraphs.len(),
            got: traces.len(),
        });
    }
    let paragraphs = doc
        .paragraphs
        .iter()
        .zip(traces)
        .map(|(p, t)| Ok(paragraph_saliency(trace_labels(t, p)?, t.rounds, cfg.floor)))
        .collect::<Result<_, SaliencyError>>()?;
    Ok(SaliencyMap {
        floor: cfg.floor,
        paragraphs,
    })
}

/// A fully opaque map (every unit kept).
pub fn map_opaque(doc: &Document, floor: f64) -> SaliencyMap {
    SaliencyMap {
        floor,
        paragraphs: doc
            .paragraphs
            .iter()
            .map(|p| paragraph_saliency(vec![RoundLabel::Kept; p.units().len()], 0, floor))
            .collect(),
    }
}

fn is_word_unit(text: &str, glue: Glue) -> bool {
    glue == Glue::Free && text.chars().any(char::is_alphanumeric)
}

/// Fraction of word units (not punctuation) rendered below full opacity.
pub fn faded_fraction(doc: &Document, map: &SaliencyMap) -> f64 {
    let mut words = 0usize;
    let mut faded = 0usize;
    for (p, ps) in doc.paragraphs.iter().zip(&map.paragraphs) {
        for (u, s) in p.units().iter().zip(&ps.units) {
            if is_word_unit(&u.text, u.glue) {
                words += 1;
                if s.opacity < 1.0 {
                    faded += 1;
                }
            }
        }
    }
    if words == 0 {
        0.0
    } else {
        faded as f64 / words as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WfOutcome {
    pub map: SaliencyMap,
    pub target: f64,
    /// Faded fraction actually achieved.
    pub achieved: f64,
    /// Smallest count that is faded; `None` when nothing is faded.
    pub threshold: Option<usize>,
}

/// Word-frequency baseline: frequent words fade, rare words stay opaque.
///
/// Counts are taken over the document's lowercased word units. Fading every
/// word whose count is at least `c` yields a faded fraction `f(c)`; the
/// threshold is the `c` (or none) whose fraction is closest to the target
/// among those overshooting it by at most [`WF_OVERSHOOT_TOLERANCE`]. Faded
/// frequency classes are split into `wf_bands` bands, the most frequent band
/// sitting at the floor. Punctuation follows the word of its token.
pub fn map_wf(doc: &Document, cfg: &OpacityConfig) -> WfOutcome {
    let target = cfg.wf_faded_fraction_target.unwrap_or(DEFAULT_WF_TARGET);
    let para_units: Vec<_> = doc.paragraphs.iter().map(Paragraph::units).collect();

    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut total = 0usize;
    for u in para_units.iter().flatten() {
        if is_word_unit(&u.text, u.glue) {
            *counts.entry(u.text.to_lowercase()).or_default() += 1;
            total += 1;
        }
    }

    // word units per frequency class, most frequent first
    let mut class_mass: Vec<(usize, usize)> = Vec::new();
    {
        let mut by_count: HashMap<usize, usize> = HashMap::new();
        for &c in counts.values() {
            *by_count.entry(c).or_default() += c;
        }
        class_mass.extend(by_count);
        class_mass.sort_by_key(|c| std::cmp::Reverse(c.0));
    }

    let mut best_k = 0usize;
    let mut best_f = 0.0f64;
    let mut cum = 0usize;
    for (k, &(_, mass)) in class_mass.iter().enumerate() {
        cum += mass;
        let f = cum as f64 / total as f64;
        if f > target + WF_OVERSHOOT_TOLERANCE + 1e-12 {
            break;
        }
        if (f - target).abs() < (best_f - target).abs() {
            best_k = k + 1;
            best_f = f;
        }
    }
    let faded_classes: Vec<usize> = class_mass[..best_k].iter().map(|&(c, _)| c).collect();
    let bands = cfg.wf_bands.max(1);
    let band_of = |count: usize| -> Option<u32> {
        let i = faded_classes.iter().position(|&c| c == count)?;
        Some(1 + (i as u64 * bands as u64 / faded_classes.len() as u64) as u32)
    };

    let paragraphs = doc
        .paragraphs
        .iter()
        .zip(&para_units)
        .map(|(p, units)| {
            let mut token_label = vec![RoundLabel::Kept; p.tokens.len()];
            for u in units {
                if is_word_unit(&u.text, u.glue) {
                    if let Some(b) = band_of(counts[&u.text.to_lowercase()]) {
                        token_label[u.token] = RoundLabel::RemovedAtRound(b);
                    }
                }
            }
            let labels = units.iter().map(|u| token_label[u.token]).collect();
            paragraph_saliency(labels, bands, cfg.floor)
        })
        .collect();

    let map = SaliencyMap {
        floor: cfg.floor,
        paragraphs,
    };
    WfOutcome {
        achieved: faded_fraction(doc, &map),
        threshold: faded_classes.last().copied(),
        map,
        target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_model::segment;

    const EPS: f64 = 1e-12;

    #[test]
    fn opacity_ladder() {
        assert_eq!(opacity_for(RoundLabel::Kept, 0, 0.3), 1.0);
        assert_eq!(opacity_for(RoundLabel::Kept, 4, 0.3), 1.0);
        assert!((opacity_for(RoundLabel::RemovedAtRound(1), 4, 0.3) - 0.30).abs() < EPS);
        assert!((opacity_for(RoundLabel::RemovedAtRound(4), 4, 0.3) - 0.825).abs() < EPS);
        assert!((opacity_for(RoundLabel::RemovedAtRound(2), 2, 0.3) - 0.65).abs() < EPS);
    }

    fn trace(p: &Paragraph, levels: &[&str]) -> LevelTrace {
        let units = p.unit_words();
        let mut levels: Vec<Vec<String>> = levels
            .iter()
            .map(|l| crate::text_model::unit_words(l))
            .collect();
        levels.insert(0, units.clone());
        LevelTrace {
            paragraph_index: p.index,
            rounds: levels.len() as u32 - 1,
            positions: vec![],
            level_texts: vec![],
            per_round_scores: vec![],
            levels,
        }
    }

    #[test]
    fn zero_round_trace_is_opaque() {
        let doc = segment("one two three");
        let t = LevelTrace::unchanged(&doc.paragraphs[0]);
        let map = map_gp(&[t], &doc, &OpacityConfig::default()).unwrap();
        assert!(map.paragraphs[0].units.iter().all(|u| u.opacity == 1.0));
    }

    #[test]
    fn two_round_labels() {
        let doc = segment("a b c");
        let t = trace(&doc.paragraphs[0], &["a c", "a"]);
        let map = map_gp(&[t], &doc, &OpacityConfig::default()).unwrap();
        let op: Vec<f64> = map.paragraphs[0].units.iter().map(|u| u.opacity).collect();
        assert_eq!(op[0], 1.0);
        assert!((op[1] - 0.3).abs() < EPS);
        assert!((op[2] - (0.3 + 0.7 / 2.0)).abs() < EPS);
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let doc = segment("a b c");
        let other = segment("x y z");
        let t = LevelTrace::unchanged(&other.paragraphs[0]);
        assert_eq!(
            map_gp(&[t], &doc, &OpacityConfig::default()),
            Err(SaliencyError::TraceMismatch(0))
        );
        let t = trace(&doc.paragraphs[0], &["a c", "a d"]);
        assert!(matches!(
            map_gp(&[t], &doc, &OpacityConfig::default()),
            Err(SaliencyError::Nesting(_))
        ));
    }

    fn wf(text: &str, target: f64) -> WfOutcome {
        let cfg = OpacityConfig {
            method: Method::WfTsm,
            wf_faded_fraction_target: Some(target),
            ..OpacityConfig::default()
        };
        map_wf(&segment(text), &cfg)
    }

    #[test]
    fn wf_all_distinct_fades_nothing() {
        let out = wf("alpha beta gamma delta", 0.5);
        assert_eq!(out.achieved, 0.0);
        assert_eq!(out.threshold, None);
    }

    #[test]
    fn wf_overshooting_class_is_not_faded() {
        let out = wf("a a a b", 0.5);
        assert_eq!(out.achieved, 0.0);
    }

    #[test]
    fn wf_exact_class() {
        let out = wf("a a b c", 0.5);
        assert_eq!(out.achieved, 0.5);
        let op: Vec<f64> = out.map.paragraphs[0].units.iter().map(|u| u.opacity).collect();
        assert_eq!(op, vec![0.3, 0.3, 1.0, 1.0]);
    }

    #[test]
    fn wf_case_and_punctuation_folded() {
        // "The", "the." and "the" are one word; the period follows its word
        let out = wf("The cat saw the. dog the", 0.5);
        assert_eq!(out.threshold, Some(3));
        let units = &out.map.paragraphs[0].units;
        // units: The cat saw the . dog the
        assert!(units[3].opacity < 1.0);
        assert_eq!(units[4].opacity, units[3].opacity);
        assert_eq!(units[1].opacity, 1.0);
    }

    #[test]
    fn wf_bands_monotone_in_frequency() {
        // counts: a=4, b=3, c=2, d=1 x4 singletons
        let out = wf("a a a a b b b c c d e f g", 0.75);
        let units = &out.map.paragraphs[0].units;
        let op = |w: &str| {
            let i = segment("a a a a b b b c c d e f g").paragraphs[0]
                .unit_words()
                .iter()
                .position(|x| x == w)
                .unwrap();
            units[i].opacity
        };
        assert!(op("a") <= op("b") && op("b") <= op("c") && op("c") <= op("d"));
        assert!((op("a") - 0.3).abs() < EPS);
    }
}
