//! Word-level sequence alignment.
//!
//! [`diff`] is a Ratcliff/Obershelp matcher in the style of Python's
//! `difflib.SequenceMatcher` with junk handling switched off: find the
//! longest common contiguous block, recurse on both sides, then turn the
//! matching blocks into an opcode script. On top of it sit response
//! reversion ([`revert`]) and the cross-level labeling used for opacity
//! ([`align_levels`]).

use std::collections::HashMap;
use std::hash::Hash;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Equal,
    Delete,
    Insert,
    Replace,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opcode {
    pub kind: OpKind,
    pub a: Range<usize>,
    pub b: Range<usize>,
}

impl Opcode {
    fn new(kind: OpKind, a: Range<usize>, b: Range<usize>) -> Self {
        Opcode { kind, a, b }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpcodeScript {
    pub ops: Vec<Opcode>,
}

impl OpcodeScript {
    /// Replays the script against `a`, splicing in `b`'s inserted and
    /// replacing spans. The result equals `b` for any script produced by
    /// [`diff`]`(a, b)`.
    pub fn apply<T: Clone>(&self, a: &[T], b: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(b.len());
        for op in &self.ops {
            match op.kind {
                OpKind::Equal => out.extend_from_slice(&a[op.a.clone()]),
                OpKind::Delete => {}
                OpKind::Insert | OpKind::Replace => out.extend_from_slice(&b[op.b.clone()]),
            }
        }
        out
    }

    /// Number of matched elements.
    pub fn matched(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| op.kind == OpKind::Equal)
            .map(|op| op.a.len())
            .sum()
    }

    pub fn is_pure_deletion(&self) -> bool {
        self.ops
            .iter()
            .all(|op| matches!(op.kind, OpKind::Equal | OpKind::Delete))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Match {
    a: usize,
    b: usize,
    size: usize,
}

struct Matcher<'s, T> {
    a: &'s [T],
    b2j: HashMap<&'s T, Vec<usize>>,
}

impl<'s, T: Eq + Hash> Matcher<'s, T> {
    fn new(a: &'s [T], b: &'s [T]) -> Self {
        let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
        for (j, x) in b.iter().enumerate() {
            b2j.entry(x).or_default().push(j);
        }
        Matcher { a, b2j }
    }

    /// Longest block with `a[i..i+k] == b[j..j+k]` inside the given window.
    /// Ties go to the smallest `i`, then the smallest `j`.
    fn longest_match(&self, alo: usize, ahi: usize, blo: usize, bhi: usize) -> Match {
        let mut best = Match {
            a: alo,
            b: blo,
            size: 0,
        };
        // j2len[j] = length of the match ending at a[i-1], b[j]
        let mut j2len: HashMap<usize, usize> = HashMap::new();
        for i in alo..ahi {
            let mut next: HashMap<usize, usize> = HashMap::new();
            if let Some(js) = self.b2j.get(&self.a[i]) {
                for &j in js {
                    if j < blo {
                        continue;
                    }
                    if j >= bhi {
                        break;
                    }
                    let k = j.checked_sub(1).and_then(|p| j2len.get(&p)).copied().unwrap_or(0) + 1;
                    next.insert(j, k);
                    if k > best.size {
                        best = Match {
                            a: i + 1 - k,
                            b: j + 1 - k,
                            size: k,
                        };
                    }
                }
            }
            j2len = next;
        }
        best
    }

    fn matching_blocks(&self, la: usize, lb: usize) -> Vec<Match> {
        let mut queue = vec![(0, la, 0, lb)];
        let mut blocks = Vec::new();
        while let Some((alo, ahi, blo, bhi)) = queue.pop() {
            let m = self.longest_match(alo, ahi, blo, bhi);
            if m.size == 0 {
                continue;
            }
            if alo < m.a && blo < m.b {
                queue.push((alo, m.a, blo, m.b));
            }
            if m.a + m.size < ahi && m.b + m.size < bhi {
                queue.push((m.a + m.size, ahi, m.b + m.size, bhi));
            }
            blocks.push(m);
        }
        blocks.sort_by_key(|m| (m.a, m.b));

        // Merge blocks that abut in both sequences.
        let mut merged: Vec<Match> = Vec::with_capacity(blocks.len() + 1);
        for m in blocks {
            match merged.last_mut() {
                Some(prev) if prev.a + prev.size == m.a && prev.b + prev.size == m.b => {
                    prev.size += m.size;
                }
                _ => merged.push(m),
            }
        }
        merged.push(Match {
            a: la,
            b: lb,
            size: 0,
        });
        merged
    }
}

/// Aligns `a` against `b` and returns the edit script turning `a` into `b`.
pub fn diff<T: Eq + Hash>(a: &[T], b: &[T]) -> OpcodeScript {
    let matcher = Matcher::new(a, b);
    let mut ops = Vec::new();
    let (mut i, mut j) = (0, 0);
    for m in matcher.matching_blocks(a.len(), b.len()) {
        let kind = match (i < m.a, j < m.b) {
            (true, true) => Some(OpKind::Replace),
            (true, false) => Some(OpKind::Delete),
            (false, true) => Some(OpKind::Insert),
            (false, false) => None,
        };
        if let Some(kind) = kind {
            ops.push(Opcode::new(kind, i..m.a, j..m.b));
        }
        i = m.a + m.size;
        j = m.b + m.size;
        if m.size > 0 {
            ops.push(Opcode::new(OpKind::Equal, m.a..i, m.b..j));
        }
    }
    OpcodeScript { ops }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReversionResult {
    pub reverted_words: Vec<String>,
    /// Index into `original` of each reverted word.
    pub kept_indices: Vec<usize>,
    /// Response-side words in insert and replace spans, counted before reversion.
    pub paraphrase_count: usize,
}

/// Undoes everything in `response` that is not a deletion from `original`:
/// substitutions are replaced by the original words and insertions dropped.
pub fn revert<S: AsRef<str>>(original: &[S], response: &[S]) -> ReversionResult {
    let a: Vec<&str> = original.iter().map(AsRef::as_ref).collect();
    let b: Vec<&str> = response.iter().map(AsRef::as_ref).collect();
    let script = diff(&a, &b);
    let mut kept_indices = Vec::with_capacity(a.len());
    let mut paraphrase_count = 0;
    for op in &script.ops {
        match op.kind {
            OpKind::Equal => kept_indices.extend(op.a.clone()),
            OpKind::Replace => {
                kept_indices.extend(op.a.clone());
                paraphrase_count += op.b.len();
            }
            OpKind::Insert => paraphrase_count += op.b.len(),
            OpKind::Delete => {}
        }
    }
    ReversionResult {
        reverted_words: kept_indices.iter().map(|&i| a[i].to_string()).collect(),
        kept_indices,
        paraphrase_count,
    }
}

/// The round at which a word of the original paragraph was cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundLabel {
    Kept,
    RemovedAtRound(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("level {level} is not a subsequence of level {}", .level - 1)]
pub struct NestingViolation {
    pub level: usize,
}

/// Indices into `a` of a subsequence embedding of `b`, as chosen by [`diff`].
/// `None` when the script contains anything but equal and delete spans.
pub fn embed_subsequence<T: Eq + Hash>(a: &[T], b: &[T]) -> Option<Vec<usize>> {
    let script = diff(a, b);
    if !script.is_pure_deletion() {
        return None;
    }
    Some(
        script
            .ops
            .iter()
            .filter(|op| op.kind == OpKind::Equal)
            .flat_map(|op| op.a.clone())
            .collect(),
    )
}

/// Leftmost greedy embedding of `b` in `a`, or `None` if `b` is not a
/// subsequence of `a`.
pub fn greedy_embedding<T: PartialEq>(a: &[T], b: &[T]) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    for x in b {
        while i < a.len() && a[i] != *x {
            i += 1;
        }
        if i == a.len() {
            return None;
        }
        out.push(i);
        i += 1;
    }
    Some(out)
}

/// Labels positions `0..len` given, for each level after the first, the
/// ascending original positions still present. Positions missing from
/// level `k` but present in level `k - 1` were removed in round `k`.
pub fn label_positions(len: usize, later_levels: &[Vec<usize>]) -> Vec<RoundLabel> {
    let mut labels = vec![RoundLabel::Kept; len];
    let mut present = vec![true; len];
    for (k, level) in later_levels.iter().enumerate() {
        let mut now = vec![false; len];
        for &p in level {
            now[p] = true;
        }
        for p in 0..len {
            if present[p] && !now[p] {
                labels[p] = RoundLabel::RemovedAtRound(k as u32 + 1);
            }
        }
        present = now;
    }
    labels
}

/// Labels every word of `levels[0]` with the round that removed it.
///
/// Each step uses the injection chosen by [`diff`]. Ratcliff/Obershelp
/// does not always recover a subsequence as a pure deletion, so when it
/// fails the leftmost greedy embedding is used instead; only a level that is
/// not a subsequence at all is a [`NestingViolation`].
pub fn align_levels<S: AsRef<str>>(levels: &[Vec<S>]) -> Result<Vec<RoundLabel>, NestingViolation> {
    let Some(first) = levels.first() else {
        return Ok(Vec::new());
    };
    // positions[j] = original index of word j of the current level
    let mut positions: Vec<usize> = (0..first.len()).collect();
    let mut later = Vec::with_capacity(levels.len().saturating_sub(1));
    for (k, pair) in levels.windows(2).enumerate() {
        let a: Vec<&str> = pair[0].iter().map(AsRef::as_ref).collect();
        let b: Vec<&str> = pair[1].iter().map(AsRef::as_ref).collect();
        let inj = embed_subsequence(&a, &b)
            .or_else(|| greedy_embedding(&a, &b))
            .ok_or(NestingViolation { level: k + 1 })?;
        positions = inj.iter().map(|&j| positions[j]).collect();
        later.push(positions.clone());
    }
    Ok(label_positions(first.len(), &later))
}
