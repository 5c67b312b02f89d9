//! Hint decks: parsing, the static slideshow and server-side reveal gating.

pub mod markup;

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deploy::{placeholders, render, TemplateContext};
use crate::emulator::Emulator;
use markup::Block;

/// Placeholders a hint may use; filled in per project when served.
pub const HINT_PLACEHOLDERS: &[&str] = &["project_id", "level_name"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HintError {
    #[error("hint file: {0}")]
    Parse(String),
    #[error("hint {index}: {reason}")]
    BadHint { index: usize, reason: String },
    #[error("all {0} hints are already revealed")]
    AlreadyAtEnd(usize),
    #[error("unknown project `{0}`")]
    UnknownProject(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hint {
    pub title: String,
    /// Markup source.
    pub body: String,
    pub blocks: Vec<Block>,
}

impl Hint {
    pub fn html(&self) -> String {
        markup::to_html(&self.blocks)
    }

    pub fn plain_text(&self) -> String {
        markup::plain_text(&self.blocks)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HintDeck {
    pub level: String,
    pub hints: Vec<Hint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    hints: Option<Vec<RawHint>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHint {
    title: String,
    body: String,
}

/// The JSON shape of one hint in API responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintView {
    pub index: usize,
    pub title: String,
    pub body: String,
    pub html: String,
}

pub fn parse_hint_file(level: &str, text: &str) -> Result<HintDeck, HintError> {
    let raw: RawFile = serde_yaml::from_str(text).map_err(|e| HintError::Parse(e.to_string()))?;
    let raw = raw.hints.unwrap_or_default();
    if raw.is_empty() {
        return Err(HintError::Parse("a deck needs at least one hint".into()));
    }
    let mut hints = Vec::with_capacity(raw.len());
    for (i, h) in raw.into_iter().enumerate() {
        let index = i + 1;
        let bad = |reason: String| HintError::BadHint { index, reason };
        if h.title.trim().is_empty() {
            return Err(bad("title is empty".into()));
        }
        if markup::parse(&h.title).map_err(bad)?
            != vec![Block::Paragraph(vec![markup::Inline::Text(h.title.trim().to_string())])]
        {
            return Err(bad("titles are plain text".into()));
        }
        for key in placeholders(&h.body).map_err(|e| bad(e.to_string()))? {
            if !HINT_PLACEHOLDERS.contains(&key.as_str()) {
                return Err(bad(format!("unknown placeholder `{key}`")));
            }
        }
        let blocks = markup::parse(&h.body).map_err(bad)?;
        hints.push(Hint {
            title: h.title.trim().to_string(),
            body: h.body,
            blocks,
        });
    }
    Ok(HintDeck {
        level: level.to_string(),
        hints,
    })
}

impl HintDeck {
    pub fn len(&self) -> usize {
        self.hints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hints.is_empty()
    }

    /// Fills the hint placeholders for one player's project.
    pub fn instantiate(&self, project_id: &str) -> HintDeck {
        let level_name = self.level.rsplit('/').next().unwrap_or(&self.level);
        let ctx = TemplateContext {
            project_id: project_id.to_string(),
            nonce: String::new(),
            level_name: level_name.to_string(),
            extra: Default::default(),
        };
        let hints = self
            .hints
            .iter()
            .map(|h| {
                let body = render(&h.body, &ctx).expect("placeholders checked at parse time");
                let blocks = markup::parse(&body).unwrap_or_else(|_| h.blocks.clone());
                Hint {
                    title: h.title.clone(),
                    body,
                    blocks,
                }
            })
            .collect();
        HintDeck {
            level: self.level.clone(),
            hints,
        }
    }

    pub fn views(&self, count: usize) -> Vec<HintView> {
        self.hints
            .iter()
            .take(count)
            .enumerate()
            .map(|(i, h)| HintView {
                index: i + 1,
                title: h.title.clone(),
                body: h.body.clone(),
                html: h.html(),
            })
            .collect()
    }

    /// One self-contained HTML document with a slide per hint. Only the
    /// first slide shows until a slide is targeted by the previous/next
    /// links; no script is involved.
    pub fn render_slideshow(&self) -> String {
        let title = markup::escape(&self.level);
        let n = self.hints.len();
        let mut out = String::new();
        let _ = write!(
            out,
            "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Hints: {title}</title>\n<style>\n\
             body {{ font-family: sans-serif; max-width: 46rem; margin: 2rem auto; padding: 0 1rem; }}\n\
             .slide {{ display: none; border: 1px solid #ccc; border-radius: 6px; padding: 1rem 1.5rem; }}\n\
             .slide:first-of-type, .slide:target {{ display: block; }}\n\
             main:has(.slide:target) .slide:first-of-type:not(:target) {{ display: none; }}\n\
             pre {{ background: #f4f4f4; padding: .75rem; overflow-x: auto; }}\n\
             nav {{ display: flex; justify-content: space-between; margin-top: 1rem; }}\n\
             </style>\n</head>\n<body>\n<h1>Hints: {title}</h1>\n<main>\n"
        );
        for (i, h) in self.hints.iter().enumerate() {
            let k = i + 1;
            let _ = write!(
                out,
                "<section class=\"slide\" id=\"hint-{k}\">\n<h2>Hint {k} of {n}: {}</h2>\n<div class=\"hint-body\">\n{}</div>\n<nav>",
                markup::escape(&h.title),
                h.html()
            );
            if k > 1 {
                let _ = write!(out, "<a class=\"prev\" href=\"#hint-{}\">Previous</a>", k - 1);
            } else {
                out.push_str("<span></span>");
            }
            if k < n {
                let _ = write!(out, "<a class=\"next\" href=\"#hint-{}\">Next</a>", k + 1);
            }
            out.push_str("</nav>\n</section>\n");
        }
        out.push_str("</main>\n</body>\n</html>\n");
        out
    }
}

impl Emulator {
    pub fn hints_revealed(&self, project_id: &str, level_ref: &str) -> usize {
        self.projects
            .get(project_id)
            .map(|p| p.progress.level(level_ref).hints_revealed)
            .unwrap_or(0)
    }

    /// Reveals exactly one more hint and returns the new count.
    pub fn reveal_next_hint(&mut self, project_id: &str, level_ref: &str, total: usize) -> Result<usize, HintError> {
        let state = self
            .projects
            .get_mut(project_id)
            .ok_or_else(|| HintError::UnknownProject(project_id.to_string()))?;
        let entry = state.progress.level_mut(level_ref);
        if entry.hints_revealed >= total {
            return Err(HintError::AlreadyAtEnd(total));
        }
        entry.hints_revealed += 1;
        Ok(entry.hints_revealed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = r#"
hints:
  - title: Start
    body: List buckets in `{{ project_id }}`.
  - title: Read
    body: |
      Read the object:

      ```
      thunder objects cat b secret.txt
      ```
  - title: Done
    body: See [the docs](https://cloud.example/docs).
"#;

    #[test]
    fn three_in_order() {
        let deck = parse_hint_file("thunder/x", FILE).unwrap();
        let titles: Vec<&str> = deck.hints.iter().map(|h| h.title.as_str()).collect();
        assert_eq!(titles, vec!["Start", "Read", "Done"]);
        assert_eq!(
            deck.instantiate("proj-a").hints[0].plain_text(),
            "List buckets in proj-a."
        );
    }

    #[test]
    fn bad_files() {
        assert!(matches!(parse_hint_file("x", "hints:\n"), Err(HintError::Parse(_))));
        assert!(matches!(parse_hint_file("x", "hints: []\n"), Err(HintError::Parse(_))));
        assert!(matches!(
            parse_hint_file(
                "x",
                "hints:\n  - {title: a, body: ok}\n  - {title: b, body: \"<i>x</i>\"}\n"
            ),
            Err(HintError::BadHint { index: 2, .. })
        ));
        assert!(matches!(
            parse_hint_file("x", "hints:\n  - {title: a, body: \"{{ flag }}\"}\n"),
            Err(HintError::BadHint { index: 1, .. })
        ));
        assert!(matches!(
            parse_hint_file("x", "hints:\n  - {title: \"\", body: b}\n"),
            Err(HintError::BadHint { index: 1, .. })
        ));
    }

    #[test]
    fn slideshow_structure() {
        let deck = parse_hint_file("thunder/x", FILE).unwrap();
        let html = deck.render_slideshow();
        assert_eq!(html, deck.render_slideshow());
        assert_eq!(html.matches("<section class=\"slide\"").count(), 3);
        for k in 1..=3 {
            assert!(html.contains(&format!("id=\"hint-{k}\"")));
        }
        assert!(!html.contains("<script"));
        assert!(html.contains("<pre><code>thunder objects cat b secret.txt</code></pre>"));
        assert_eq!(html.matches("class=\"next\"").count(), 2);
        assert_eq!(html.matches("class=\"prev\"").count(), 2);
    }

    #[test]
    fn reveal_is_monotone_with_end() {
        let mut emu = Emulator::builder().seed(1).build();
        emu.create_project("proj-alpha1", "A").unwrap();
        for k in 1..=3 {
            assert_eq!(emu.reveal_next_hint("proj-alpha1", "thunder/x", 3).unwrap(), k);
        }
        assert_eq!(
            emu.reveal_next_hint("proj-alpha1", "thunder/x", 3),
            Err(HintError::AlreadyAtEnd(3))
        );
        assert_eq!(emu.hints_revealed("proj-alpha1", "thunder/x"), 3);
    }
}
