//! Hint deck checks over the shipped levels.

use serde_json::json;
use thunder_core::{ApiRequest, LevelRegistry};

use super::{create, json, PROJECT};

/// Every deck parses with at least four hints (eight for a2) and none
/// gives away a flag.
pub fn check_decks() -> Result<usize, String> {
    let reg = LevelRegistry::shipped();
    let mut decks = 0;
    for level in reg.iter() {
        if level.hints.len() < 4 {
            return Err(format!("{}: {} hints", level.reference(), level.hints.len()));
        }
        for h in &level.hints.hints {
            if h.plain_text().trim().is_empty() || h.body.contains("CTF{") {
                return Err(format!("{}: bad hint `{}`", level.reference(), h.title));
            }
        }
        decks += 1;
    }
    let a2 = reg.get("thunder/a2finance").map_err(|e| e.to_string())?;
    if a2.hints.len() < 8 {
        return Err("a2finance has fewer than eight hints".into());
    }
    Ok(decks)
}

/// The slideshow renders identically twice, one slide per hint, with no
/// script and no unfilled placeholder.
pub fn check_render() -> Result<(), String> {
    for level in LevelRegistry::shipped().iter() {
        let deck = level.hints.instantiate(PROJECT);
        let a = deck.render_slideshow();
        if a != deck.render_slideshow() {
            return Err(format!("{}: render is not deterministic", level.reference()));
        }
        if a.matches("<section class=\"slide\"").count() != deck.len() {
            return Err(format!("{}: slide count", level.reference()));
        }
        if a.contains("<script") || a.contains("{{") {
            return Err(format!("{}: script or placeholder in output", level.reference()));
        }
    }
    Ok(())
}

/// Reveal goes up by one per call to the total, then answers 409
/// `already_at_end`.
pub fn check_reveal() -> Result<(), String> {
    let mut p = super::platform(2);
    create(&mut p, "thunder/a2finance");
    let total = p
        .levels
        .get("thunder/a2finance")
        .map_err(|e| e.to_string())?
        .hints
        .len();
    let reveal = ApiRequest::post("/ctf/v1/hints/reveal").with_json(&json!({"level": "thunder/a2finance"}));
    for k in 1..=total {
        let r = p.handle(&reveal);
        if r.status != 200 {
            return Err(format!("reveal {k}: {} {}", r.status, r.body_text()));
        }
        let v = json(&r);
        if v["revealed"] != k || v["hints"].as_array().map(Vec::len) != Some(k) {
            return Err(format!("reveal {k}: {v}"));
        }
    }
    let r = p.handle(&reveal);
    if (r.status, r.error_code().as_deref()) != (409, Some("already_at_end")) {
        return Err(format!("past the end: {} {}", r.status, r.body_text()));
    }
    Ok(())
}
