//! Restricted hint markup.
//!
//! - Paragraphs are separated by blank lines.
//! - A line of three backticks opens a code block; the next such line
//!   closes it. Code is shown verbatim.
//! - `` `code` `` is inline code.
//! - `[text](https://...)` is a link; only `http` and `https` targets.
//!
//! Anything that looks like an HTML tag outside code is rejected.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inline {
    Text(String),
    Code(String),
    Link { text: String, href: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    Paragraph(Vec<Inline>),
    Code(String),
}

const FENCE: &str = "```";

fn looks_like_tag(text: &str) -> bool {
    let bytes = text.as_bytes();
    bytes
        .windows(2)
        .any(|w| w[0] == b'<' && (w[1].is_ascii_alphabetic() || matches!(w[1], b'/' | b'!' | b'?')))
}

fn inlines(text: &str) -> Result<Vec<Inline>, String> {
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut rest = text;
    let flush = |buf: &mut String, out: &mut Vec<Inline>| -> Result<(), String> {
        if !buf.is_empty() {
            if looks_like_tag(buf) {
                return Err("raw HTML is not allowed".into());
            }
            out.push(Inline::Text(std::mem::take(buf)));
        }
        Ok(())
    };
    while let Some(c) = rest.chars().next() {
        match c {
            '`' => {
                let after = &rest[1..];
                let end = after.find('`').ok_or("unterminated inline code")?;
                if end == 0 {
                    return Err("empty inline code".into());
                }
                flush(&mut buf, &mut out)?;
                out.push(Inline::Code(after[..end].to_string()));
                rest = &after[end + 1..];
            }
            '[' => {
                let close = rest.find("](").ok_or("`[` without a link target")?;
                let text = &rest[1..close];
                let target = &rest[close + 2..];
                let end = target.find(')').ok_or("unterminated link target")?;
                let href = &target[..end];
                if !(href.starts_with("https://") || href.starts_with("http://")) {
                    return Err(format!("link target `{href}` must be http or https"));
                }
                if href.contains(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '<' | '>')) {
                    return Err(format!("link target `{href}` contains forbidden characters"));
                }
                if text.is_empty() || text.contains(['[', ']', '`']) {
                    return Err("link text must be plain, non-empty text".into());
                }
                flush(&mut buf, &mut out)?;
                if looks_like_tag(text) {
                    return Err("raw HTML is not allowed".into());
                }
                out.push(Inline::Link {
                    text: text.to_string(),
                    href: href.to_string(),
                });
                rest = &target[end + 1..];
            }
            _ => {
                buf.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    flush(&mut buf, &mut out)?;
    Ok(out)
}

pub fn parse(body: &str) -> Result<Vec<Block>, String> {
    let mut blocks = Vec::new();
    let mut para: Vec<&str> = Vec::new();
    let mut lines = body.lines();
    let end_para = |para: &mut Vec<&str>, blocks: &mut Vec<Block>| -> Result<(), String> {
        if !para.is_empty() {
            let joined = para.iter().map(|l| l.trim()).collect::<Vec<_>>().join(" ");
            blocks.push(Block::Paragraph(inlines(&joined)?));
            para.clear();
        }
        Ok(())
    };
    while let Some(line) = lines.next() {
        if line.trim_start().starts_with(FENCE) {
            if line.trim() != FENCE {
                return Err("code fences take no language tag".into());
            }
            end_para(&mut para, &mut blocks)?;
            let mut code = Vec::new();
            loop {
                match lines.next() {
                    None => return Err("unterminated code block".into()),
                    Some(l) if l.trim() == FENCE => break,
                    Some(l) => code.push(l),
                }
            }
            blocks.push(Block::Code(code.join("\n")));
        } else if line.trim().is_empty() {
            end_para(&mut para, &mut blocks)?;
        } else {
            para.push(line);
        }
    }
    end_para(&mut para, &mut blocks)?;
    if blocks.is_empty() {
        return Err("body is empty".into());
    }
    Ok(blocks)
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
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

pub fn to_html(blocks: &[Block]) -> String {
    let mut out = String::new();
    for b in blocks {
        match b {
            Block::Paragraph(items) => {
                out.push_str("<p>");
                for i in items {
                    match i {
                        Inline::Text(t) => out.push_str(&escape(t)),
                        Inline::Code(c) => {
                            let _ = write!(out, "<code>{}</code>", escape(c));
                        }
                        Inline::Link { text, href } => {
                            let _ = write!(
                                out,
                                "<a href=\"{}\" rel=\"noopener noreferrer\">{}</a>",
                                escape(href),
                                escape(text)
                            );
                        }
                    }
                }
                out.push_str("</p>\n");
            }
            Block::Code(code) => {
                let _ = writeln!(out, "<pre><code>{}</code></pre>", escape(code));
            }
        }
    }
    out
}

/// Text content with all markup removed: paragraphs and code blocks
/// separated by blank lines.
pub fn plain_text(blocks: &[Block]) -> String {
    blocks
        .iter()
        .map(|b| match b {
            Block::Paragraph(items) => items
                .iter()
                .map(|i| match i {
                    Inline::Text(t) | Inline::Code(t) => t.as_str(),
                    Inline::Link { text, .. } => text.as_str(),
                })
                .collect::<String>(),
            Block::Code(code) => code.clone(),
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}
