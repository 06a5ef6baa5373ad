//! Output formats for a saliency-annotated document.
//!
//! All three formats keep every byte of the source text: stripping the
//! styling (tags, escape sequences, or the JSON structure) gives back the
//! input exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diff_align::RoundLabel;
use crate::saliency_map::SaliencyMap;
use crate::text_model::Document;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const BLACK: Rgb = Rgb(0, 0, 0);
    pub const WHITE: Rgb = Rgb(255, 255, 255);

    /// `self` drawn at `opacity` over `background`.
    pub fn blend(self, background: Rgb, opacity: f64) -> Rgb {
        let mix = |f: u8, b: u8| (f as f64 * opacity + b as f64 * (1.0 - opacity)).round() as u8;
        Rgb(
            mix(self.0, background.0),
            mix(self.1, background.1),
            mix(self.2, background.2),
        )
    }

    fn css(self) -> String {
        format!("rgb({},{},{})", self.0, self.1, self.2)
    }

    /// Nearest xterm-256 color: the grayscale ramp for grays, the 6x6x6
    /// cube otherwise.
    pub fn xterm256(self) -> u8 {
        let Rgb(r, g, b) = self;
        if r == g && g == b {
            return match r {
                0..=3 => 16,
                248..=255 => 231,
                v => 232 + ((v as f64 - 8.0) / 10.0).round().clamp(0.0, 23.0) as u8,
            };
        }
        let q = |v: u8| ((v as f64 / 255.0) * 5.0).round() as u8;
        16 + 36 * q(r) + 6 * q(g) + q(b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theme {
    pub foreground: Rgb,
    pub background: Rgb,
    pub font_family: Option<String>,
}

impl Default for Theme {
    fn default() -> Self {
        Theme {
            foreground: Rgb::BLACK,
            background: Rgb::WHITE,
            font_family: None,
        }
    }
}

impl Theme {
    pub fn dark() -> Self {
        Theme {
            foreground: Rgb::WHITE,
            background: Rgb::BLACK,
            font_family: None,
        }
    }

    pub fn color_for(&self, opacity: f64) -> Rgb {
        self.foreground.blend(self.background, opacity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Html,
    Ansi,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AnsiColors {
    #[default]
    TrueColor,
    Xterm256,
}

#[derive(Clone, Debug)]
pub struct RenderPlan<'a> {
    pub doc: &'a Document,
    pub map: &'a SaliencyMap,
    pub theme: Theme,
    pub ansi: AnsiColors,
}

/// One styled piece of text. An item with empty `text` carries whitespace
/// that precedes the first word of the document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderItem {
    pub text: String,
    pub suffix: String,
    pub round_label: RoundLabel,
    pub opacity: f64,
}

impl<'a> RenderPlan<'a> {
    pub fn new(doc: &'a Document, map: &'a SaliencyMap) -> Self {
        assert_eq!(
            doc.paragraphs.len(),
            map.paragraphs.len(),
            "saliency map must cover every paragraph"
        );
        RenderPlan {
            doc,
            map,
            theme: Theme::default(),
            ansi: AnsiColors::default(),
        }
    }

    pub fn with_theme(mut self, theme: Theme) -> Self {
        self.theme = theme;
        self
    }

    pub fn with_ansi(mut self, ansi: AnsiColors) -> Self {
        self.ansi = ansi;
        self
    }

    /// Paragraphs of render items; unit suffixes carry the original
    /// whitespace, the last unit of a paragraph carries the separator.
    pub fn items(&self) -> Vec<Vec<RenderItem>> {
        let mut out = Vec::with_capacity(self.doc.paragraphs.len());
        for (p, ps) in self.doc.paragraphs.iter().zip(&self.map.paragraphs) {
            let units = p.units();
            assert_eq!(units.len(), ps.units.len(), "map must be parallel to units");
            let mut items = Vec::with_capacity(units.len());
            for (i, (u, s)) in units.iter().zip(&ps.units).enumerate() {
                let last_of_token = units.get(i + 1).is_none_or(|n| n.token != u.token);
                let suffix = if i + 1 == units.len() {
                    p.trailing_separator.clone()
                } else if last_of_token {
                    p.tokens[u.token].suffix.clone()
                } else {
                    String::new()
                };
                items.push(RenderItem {
                    text: u.text.clone(),
                    suffix,
                    round_label: s.label,
                    opacity: s.opacity,
                });
            }
            out.push(items);
        }
        if !self.doc.leading.is_empty() {
            let lead = RenderItem {
                text: String::new(),
                suffix: self.doc.leading.clone(),
                round_label: RoundLabel::Kept,
                opacity: 1.0,
            };
            match out.first_mut() {
                Some(first) => first.insert(0, lead),
                None => out.push(vec![lead]),
            }
        }
        out
    }
}

pub fn render(plan: &RenderPlan<'_>, format: Format) -> String {
    match format {
        Format::Html => render_html(plan),
        Format::Ansi => render_ansi(plan),
        Format::Json => render_json(plan),
    }
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const TOGGLE_ID: &str = "gptsm-full";

fn html_head(title: &str, theme: &Theme, extra_css: &str) -> String {
    let font = theme.font_family.as_deref().unwrap_or("Georgia, 'Times New Roman', serif");
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n<style>\n\
body {{ background: {bg}; color: {fg}; font-family: {font}; line-height: 1.6; margin: 2em auto; max-width: 46em; padding: 0 1em; }}\n\
.gptsm-doc p {{ white-space: pre-wrap; }}\n\
.gptsm-toggle {{ font-family: system-ui, sans-serif; font-size: 0.85em; }}\n\
#{TOGGLE_ID}:checked ~ * span {{ color: {fg} !important; }}\n{extra_css}</style>\n</head>\n<body>\n\
<input type=\"checkbox\" id=\"{TOGGLE_ID}\"><label class=\"gptsm-toggle\" for=\"{TOGGLE_ID}\">Show all text in full color</label>\n",
        title = escape_html(title),
        bg = theme.background.css(),
        fg = theme.foreground.css(),
        font = escape_html(font),
    )
}

/// The `<article>` holding the document body.
fn html_article(plan: &RenderPlan<'_>) -> String {
    let mut out = String::from("<article class=\"gptsm-doc\">");
    out.push_str(&escape_html(&plan.doc.leading));
    for (p, ps) in plan.doc.paragraphs.iter().zip(&plan.map.paragraphs) {
        out.push_str("<p>");
        let units = p.units();
        for (i, (u, s)) in units.iter().zip(&ps.units).enumerate() {
            let color = plan.theme.color_for(s.opacity);
            let _ = write!(out, "<span style=\"color:{}\">{}</span>", color.css(), escape_html(&u.text));
            let last_of_token = units.get(i + 1).is_none_or(|n| n.token != u.token);
            if last_of_token && i + 1 < units.len() {
                out.push_str(&escape_html(&p.tokens[u.token].suffix));
            }
        }
        out.push_str("</p>");
        out.push_str(&escape_html(&p.trailing_separator));
    }
    out.push_str("</article>");
    out
}

/// Self-contained HTML page. A CSS-only checkbox switches every word to
/// full color.
pub fn render_html(plan: &RenderPlan<'_>) -> String {
    let mut out = html_head("Text saliency view", &plan.theme, "");
    out.push_str(&html_article(plan));
    out.push_str("\n</body>\n</html>\n");
    out
}

/// Two renderings of the same document side by side.
pub fn render_compare_html(left: (&str, &RenderPlan<'_>), right: (&str, &RenderPlan<'_>)) -> String {
    let css = ".gptsm-cols { display: grid; grid-template-columns: 1fr 1fr; gap: 2em; max-width: none; }\n\
.gptsm-cols h2 { font-family: system-ui, sans-serif; font-size: 1em; }\n\
body { max-width: 96em; }\n";
    let mut out = html_head("Text saliency comparison", &left.1.theme, css);
    out.push_str("<div class=\"gptsm-cols\">\n");
    for (title, plan) in [left, right] {
        let _ = write!(
            out,
            "<section>\n<h2>{}</h2>\n{}\n</section>\n",
            escape_html(title),
            html_article(plan)
        );
    }
    out.push_str("</div>\n</body>\n</html>\n");
    out
}

fn ansi_color(plan: &RenderPlan<'_>, opacity: f64) -> String {
    let c = plan.theme.color_for(opacity);
    match plan.ansi {
        AnsiColors::TrueColor => format!("\x1b[38;2;{};{};{}m", c.0, c.1, c.2),
        AnsiColors::Xterm256 => format!("\x1b[38;5;{}m", c.xterm256()),
    }
}

pub const ANSI_RESET: &str = "\x1b[0m";

/// Terminal text with a foreground color per unit and a reset at the end
/// of every paragraph.
pub fn render_ansi(plan: &RenderPlan<'_>) -> String {
    let mut out = plan.doc.leading.clone();
    for (p, ps) in plan.doc.paragraphs.iter().zip(&plan.map.paragraphs) {
        let units = p.units();
        for (i, (u, s)) in units.iter().zip(&ps.units).enumerate() {
            out.push_str(&ansi_color(plan, s.opacity));
            out.push_str(&u.text);
            let last_of_token = units.get(i + 1).is_none_or(|n| n.token != u.token);
            if last_of_token && i + 1 < units.len() {
                out.push_str(&p.tokens[u.token].suffix);
            }
        }
        out.push_str(ANSI_RESET);
        out.push_str(&p.trailing_separator);
    }
    out
}

/// `[[{"text", "suffix", "round_label", "opacity"}, ...], ...]`, one inner
/// list per paragraph.
pub fn render_json(plan: &RenderPlan<'_>) -> String {
    serde_json::to_string(&plan.items()).expect("render items serialize")
}

pub fn parse_json(json: &str) -> Result<Vec<Vec<RenderItem>>, serde_json::Error> {
    serde_json::from_str(json)
}

/// Source text recovered from render items.
pub fn items_text(items: &[Vec<RenderItem>]) -> String {
    items
        .iter()
        .flatten()
        .flat_map(|i| [i.text.as_str(), i.suffix.as_str()])
        .collect()
}
