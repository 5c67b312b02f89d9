mod common;

use common::hints::{check_decks, check_render, check_reveal};
use common::{create, json, ok, PROJECT};
use serde_json::json;
use thunder_core::hints::parse_hint_file;
use thunder_core::ApiRequest;

#[test]
fn shipped_decks_parse_and_are_large_enough() {
    assert_eq!(check_decks().unwrap(), 6);
}

#[test]
fn deck_preserves_file_order_and_text() {
    let text = include_str!("../levels/thunder/a1openbucket/hints.yaml");
    let deck = parse_hint_file("thunder/a1openbucket", text).unwrap();
    let raw: serde_yaml::Value = serde_yaml::from_str(text).unwrap();
    let raw = raw["hints"].as_sequence().unwrap();
    assert_eq!(deck.len(), raw.len());
    for (h, r) in deck.hints.iter().zip(raw) {
        assert_eq!(h.title, r["title"].as_str().unwrap().trim());
        assert_eq!(h.body, r["body"].as_str().unwrap());
    }
}

#[test]
fn slideshow_is_deterministic_and_complete() {
    check_render().unwrap();
}

#[test]
fn reveal_is_monotone_and_stops_at_the_end() {
    check_reveal().unwrap();
}

#[test]
fn reveal_over_the_api() {
    let mut p = common::platform(2);
    create(&mut p, "thunder/a2finance");
    let total = p.levels.get("thunder/a2finance").unwrap().hints.len();
    let view = json(&ok(&mut p, ApiRequest::get("/ctf/v1/hints?level=thunder/a2finance")));
    assert_eq!(view["project_id"], PROJECT);
    assert_eq!(view["total"], total);
    assert_eq!(view["revealed"], 0);
    assert!(view["hints"].as_array().unwrap().is_empty());
    for k in 1..=total {
        let v = json(&ok(
            &mut p,
            ApiRequest::post("/ctf/v1/hints/reveal").with_json(&json!({"level": "thunder/a2finance"})),
        ));
        assert_eq!(v["revealed"], k);
        let hints = v["hints"].as_array().unwrap();
        assert_eq!(hints.len(), k);
        assert_eq!(hints[k - 1]["index"], k);
        assert!(hints[k - 1]["html"].as_str().unwrap().starts_with('<'));
    }
    let r = p.handle(&ApiRequest::post("/ctf/v1/hints/reveal").with_json(&json!({"level": "thunder/a2finance"})));
    assert_eq!((r.status, r.error_code().as_deref()), (409, Some("already_at_end")));
    let again = json(&ok(
        &mut p,
        ApiRequest::get(&format!("/ctf/v1/hints?level=thunder/a2finance&project={PROJECT}")),
    ));
    assert_eq!(again["revealed"], total);
    let prog = json(&ok(
        &mut p,
        ApiRequest::get(&format!("/ctf/v1/progress?project={PROJECT}")),
    ));
    assert_eq!(prog["levels"]["thunder/a2finance"]["hints_revealed"], total);
}

#[test]
fn hints_are_filled_for_the_project() {
    let mut p = common::platform(2);
    create(&mut p, "thunder/a1openbucket");
    let v = json(&ok(
        &mut p,
        ApiRequest::post("/ctf/v1/hints/reveal").with_json(&json!({"level": "thunder/a1openbucket"})),
    ));
    let body = v["hints"][0]["body"].as_str().unwrap();
    assert!(!body.contains("{{"));
}

#[test]
fn hint_errors() {
    let mut p = common::platform(2);
    let r = p.handle(&ApiRequest::get("/ctf/v1/hints?level=thunder/a1openbucket"));
    assert_eq!(r.status, 400, "no project given and nothing active");
    let r = p.handle(&ApiRequest::get(
        "/ctf/v1/hints?level=thunder/a1openbucket&project=proj-ghost1",
    ));
    assert_eq!(r.status, 404);
    let r = p.handle(&ApiRequest::get(&format!(
        "/ctf/v1/hints?level=thunder/nope&project={PROJECT}"
    )));
    assert_eq!(r.status, 404);
}
