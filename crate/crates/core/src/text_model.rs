//! Lossless decomposition of plain text into paragraphs, tokens and units.
//!
//! A [`Token`] is a maximal run of non-whitespace characters together with
//! the whitespace that followed it. Paragraphs are separated by blank lines.
//! Every piece of the source text lands in exactly one place (document
//! leading whitespace, a token, a token suffix or a paragraph separator), so
//! [`reconstruct`] always returns the input byte for byte.
//!
//! Tokens are further split into [`Unit`]s for alignment: leading and
//! trailing punctuation runs become their own units so that an LLM response
//! which drops `watercourses` from `nutrients into watercourses.` while keeping
//! the period still reads as a pure deletion.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub suffix: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub index: usize,
    pub tokens: Vec<Token>,
    /// Whitespace between the last token and the next paragraph (or end of input).
    pub trailing_separator: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub source_text: String,
    /// Whitespace preceding the first token.
    pub leading: String,
    pub paragraphs: Vec<Paragraph>,
}

/// How a unit attaches to its neighbours when a subset of units is printed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Glue {
    /// A word (or a token made only of punctuation).
    Free,
    /// Leading punctuation such as `(` or `"`; binds to the following unit.
    Right,
    /// Trailing punctuation such as `.` or `,`; binds to the preceding unit.
    Left,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Unit {
    pub text: String,
    pub glue: Glue,
    /// Index of the owning token within its paragraph.
    pub token: usize,
}

pub fn is_space(c: char) -> bool {
    // char::is_whitespace follows the Unicode White_Space property.
    c.is_whitespace()
}

fn is_blank_line_run(ws: &str) -> bool {
    ws.bytes().filter(|&b| b == b'\n').count() >= 2
}

/// Splits `source_text` into a [`Document`].
pub fn segment(source_text: &str) -> Document {
    let mut rest = source_text;
    let lead_len = rest.find(|c: char| !is_space(c)).unwrap_or(rest.len());
    let leading = rest[..lead_len].to_string();
    rest = &rest[lead_len..];

    let mut paragraphs = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    while !rest.is_empty() {
        let word_len = rest.find(is_space).unwrap_or(rest.len());
        let text = rest[..word_len].to_string();
        rest = &rest[word_len..];
        let ws_len = rest.find(|c: char| !is_space(c)).unwrap_or(rest.len());
        let ws = &rest[..ws_len];
        rest = &rest[ws_len..];

        if rest.is_empty() || is_blank_line_run(ws) {
            tokens.push(Token {
                text,
                suffix: String::new(),
            });
            paragraphs.push(Paragraph {
                index: paragraphs.len(),
                tokens: std::mem::take(&mut tokens),
                trailing_separator: ws.to_string(),
            });
        } else {
            tokens.push(Token {
                text,
                suffix: ws.to_string(),
            });
        }
    }

    Document {
        source_text: source_text.to_string(),
        leading,
        paragraphs,
    }
}

pub fn reconstruct(doc: &Document) -> String {
    let mut out = doc.leading.clone();
    for p in &doc.paragraphs {
        out.push_str(&p.text());
        out.push_str(&p.trailing_separator);
    }
    out
}

/// Splits one whitespace-free token into units.
pub fn split_token(text: &str) -> Vec<(String, Glue)> {
    let is_word = |c: char| c.is_alphanumeric();
    let Some(start) = text.find(is_word) else {
        return vec![(text.to_string(), Glue::Free)];
    };
    let end = text
        .char_indices()
        .rev()
        .find(|&(_, c)| is_word(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(text.len());
    let mut out = Vec::with_capacity(3);
    if start > 0 {
        out.push((text[..start].to_string(), Glue::Right));
    }
    out.push((text[start..end].to_string(), Glue::Free));
    if end < text.len() {
        out.push((text[end..].to_string(), Glue::Left));
    }
    out
}

/// Unit strings of arbitrary text (an LLM response, say), ignoring paragraph
/// structure.
pub fn unit_words(text: &str) -> Vec<String> {
    text.split(is_space)
        .filter(|w| !w.is_empty())
        .flat_map(split_token)
        .map(|(t, _)| t)
        .collect()
}

impl Paragraph {
    /// The paragraph's text without its trailing separator.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(&t.text);
            s.push_str(&t.suffix);
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn units(&self) -> Vec<Unit> {
        let mut out = Vec::new();
        for (ti, tok) in self.tokens.iter().enumerate() {
            for (text, glue) in split_token(&tok.text) {
                out.push(Unit {
                    text,
                    glue,
                    token: ti,
                });
            }
        }
        out
    }

    pub fn unit_words(&self) -> Vec<String> {
        self.units().into_iter().map(|u| u.text).collect()
    }

    /// Hex SHA-256 of the paragraph text; used to key mock scripts.
    pub fn digest(&self) -> String {
        text_digest(&self.text())
    }

    /// Prints the units at `keep` (ascending unit indices), using the
    /// original whitespace between surviving tokens. Keeping every unit
    /// reproduces [`Paragraph::text`].
    pub fn render_subset(&self, keep: &[usize]) -> String {
        let units = self.units();
        let mut out = String::new();
        // (token index, glue of the last emitted unit)
        let mut last: Option<(usize, Glue)> = None;
        for &ui in keep {
            let u = &units[ui];
            match last {
                Some((tok, last_glue)) if tok != u.token && u.glue != Glue::Left && last_glue != Glue::Right => {
                    out.push_str(&self.tokens[tok].suffix);
                }
                _ => {}
            }
            out.push_str(&u.text);
            last = Some((u.token, u.glue));
        }
        out
    }
}

pub fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Document {
    pub fn non_empty_paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.paragraphs.iter().filter(|p| !p.is_empty())
    }
}
