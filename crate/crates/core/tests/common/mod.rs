#![allow(dead_code)]

use gptsm::llm_gateway::{MockScript, PromptKind};
use gptsm::text_model::Paragraph;
use rand::seq::IndexedRandom;
use rand::Rng;
use regex::Regex;

/// The five levels of the deforestation paragraph, longest first.
pub const DEFORESTATION: [&str; 5] = [
    "Deforestation almost invariably speeds up the loss of nutrients into watercourses. It also, as previously explained, involves a release of carbon into the atmosphere. Forests thus play a clear and critical role in helping to protect the capacity of the land to support life by increasing the retention of nutrients and in helping to stabilize the atmosphere by storing carbon.",
    "Deforestation almost invariably speeds up the loss of nutrients. It also involves a release of carbon into the atmosphere. Forests thus play a clear and critical role in helping to protect the capacity of the land to support life by increasing nutrients and in helping to stabilize the atmosphere.",
    "Deforestation speeds up the loss of nutrients. It also involves a release of carbon. Forests thus play a clear and critical role in helping to protect the capacity of the land to support life and stabilize the atmosphere.",
    "Deforestation speeds up the loss of nutrients. It also involves a release of carbon. Forests play a clear and critical role in helping to protect the land and stabilize the atmosphere.",
    "Deforestation speeds up the loss of nutrients. It also involves a release of carbon. Forests play a critical role in helping to protect the land and stabilize the atmosphere.",
];

/// Script whose shortening of level `k` is level `k + 1`; the final level is
/// refused through the echo fallback.
pub fn deforestation_script(kind: PromptKind) -> MockScript {
    let mut s = MockScript::new();
    for (round, level) in DEFORESTATION[1..].iter().enumerate() {
        s.insert(kind, DEFORESTATION[0], round as u32 + 1, vec![level.to_string()]);
    }
    s
}

const WORDS: &[&str] = &[
    "the", "a", "of", "river", "stone", "quickly", "never", "green", "it's", "don't", "co-op", "naïve",
    "über", "東京", "x", "42", "3.14", "e.g.", "U.S.", "and", "but", "whose", "mmm",
];
const LEADS: &[&str] = &["", "", "", "\"", "(", "[", "'", "«", "<", "&"];
const TRAILS: &[&str] = &["", "", "", "", ",", ".", ";", ":", "!", "?", ")", "\"", "...", "'", "»", ">", "&amp;"];
const SPACES: &[&str] = &[" ", " ", " ", "  ", "\t", "\n", " \u{a0}", "\u{3000}", "\r\n"];
const BREAKS: &[&str] = &["\n\n", "\n\n\n", "\r\n\r\n", " \n \n ", "\n\t\n"];
const ODD: &[&str] = &["--", "—", "…", "<b>", "&lt;", "\"\"", "*", "🙂", "\u{200b}", "%"];

pub fn random_token(rng: &mut impl Rng) -> String {
    if rng.random_bool(0.06) {
        return ODD.choose(rng).unwrap().to_string();
    }
    format!(
        "{}{}{}",
        LEADS.choose(rng).unwrap(),
        WORDS.choose(rng).unwrap(),
        TRAILS.choose(rng).unwrap()
    )
}

/// Random text with unusual whitespace, punctuation, markup characters and
/// non-ASCII script; may be empty or whitespace only.
pub fn random_document(rng: &mut impl Rng) -> String {
    let mut out = String::new();
    if rng.random_bool(0.2) {
        out.push_str(SPACES.choose(rng).unwrap());
    }
    let paragraphs = rng.random_range(0..5);
    for p in 0..paragraphs {
        if p > 0 {
            out.push_str(BREAKS.choose(rng).unwrap());
        }
        let n = rng.random_range(1..25);
        for t in 0..n {
            if t > 0 {
                out.push_str(SPACES.choose(rng).unwrap());
            }
            out.push_str(&random_token(rng));
        }
    }
    if rng.random_bool(0.3) {
        out.push_str(["\n", " ", "\n\n", "\t \n"].choose(rng).unwrap());
    }
    out
}

/// Page text of an HTML rendering: the article bodies with tags removed and
/// entities decoded.
pub fn strip_html(html: &str) -> Vec<String> {
    let article = Regex::new(r#"(?s)<article class="gptsm-doc">(.*?)</article>"#).unwrap();
    let tag = Regex::new(r"<[^>]*>").unwrap();
    article
        .captures_iter(html)
        .map(|c| {
            tag.replace_all(&c[1], "")
                .replace("&lt;", "<")
                .replace("&gt;", ">")
                .replace("&quot;", "\"")
                .replace("&#39;", "'")
                .replace("&amp;", "&")
        })
        .collect()
}

pub fn strip_ansi(s: &str) -> String {
    Regex::new("\x1b\\[[0-9;]*m").unwrap().replace_all(s, "").into_owned()
}

/// Text of the units whose opacity is at least `threshold`, printed with the
/// paragraph's whitespace.
pub fn skim(p: &Paragraph, opacities: &[f64], threshold: f64) -> String {
    let keep: Vec<usize> = (0..opacities.len()).filter(|&i| opacities[i] >= threshold).collect();
    p.render_subset(&keep)
}

/// Random nested deletion script for `p`: each round keeps a random subset
/// of the previous level. Some responses paraphrase a word, which reversion
/// must undo. Returns the script and the number of scripted rounds.
pub fn random_nested_script(p: &Paragraph, kind: PromptKind, rng: &mut impl Rng) -> (MockScript, Vec<String>) {
    let n = p.units().len();
    let mut keep: Vec<usize> = (0..n).collect();
    let mut script = MockScript::new();
    let mut texts = Vec::new();
    let text = p.text();
    let mut round = 1;
    while keep.len() > 1 && round <= 6 {
        let drop = rng.random_range(1..=keep.len().div_ceil(3));
        for _ in 0..drop {
            let i = rng.random_range(0..keep.len());
            keep.remove(i);
        }
        let level = p.render_subset(&keep);
        let mut responses = vec![level.clone()];
        if rng.random_bool(0.5) {
            responses.push(format!("{level} entirely"));
        }
        script.insert(kind, &text, round, responses);
        texts.push(level);
        round += 1;
    }
    (script, texts)
}
