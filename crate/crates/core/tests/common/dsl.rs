//! Shared handler-language fixtures: a recording host, golden programs
//! and the limit boundaries.

use std::collections::BTreeMap;

use thunder_core::handler::{parse, run, EvalError, HandlerHost, Request, MAX_FETCHES, MAX_STATEMENTS};
use thunder_core::services::logging::Severity;

#[derive(Default)]
pub struct Host {
    pub calls: Vec<String>,
    pub logs: Vec<(Severity, String)>,
}

impl HandlerHost for Host {
    fn fetch(&mut self, url: &str, headers: &[(String, String)]) -> Result<String, String> {
        self.calls.push(format!("fetch {url} {headers:?}"));
        if url.contains("blocked") {
            Err(format!("host of `{url}` is not reachable"))
        } else {
            Ok(format!("<{url}>"))
        }
    }

    fn metadata(&mut self, path: &str) -> Result<String, String> {
        self.calls.push(format!("metadata {path}"));
        Ok(format!("md:{path}"))
    }

    fn log(&mut self, severity: Severity, message: &str) {
        self.logs.push((severity, message.to_string()));
    }
}

pub fn request() -> Request {
    Request {
        path: "/app/x".into(),
        params: [
            ("mode".to_string(), "b".to_string()),
            ("q".to_string(), "z".to_string()),
        ]
        .into(),
        headers: vec![
            ("Metadata-Flavor".into(), "Google".into()),
            ("X-Trace".into(), "7".into()),
        ],
    }
}

pub fn env() -> BTreeMap<String, String> {
    [("PW".to_string(), "s3cret".to_string())].into()
}

pub fn exec(src: &str) -> (Result<String, EvalError>, Host) {
    let program = parse(src).unwrap_or_else(|e| panic!("{src}: {e:?}"));
    let mut host = Host::default();
    let out = run(&program, &request(), &env(), &mut host);
    (out, host)
}

/// One program per production, with its expected result.
pub fn goldens() -> Vec<(&'static str, Result<&'static str, EvalError>)> {
    vec![
        (r#"respond("hi")"#, Ok("hi")),
        ("", Ok("")),
        (";;", Ok("")),
        ("# only a comment\n", Ok("")),
        (r#"respond("a\"b\\c\nd\te")"#, Ok("a\"b\\c\nd\te")),
        (r#"respond("a" + "b" + ("c" + "d"))"#, Ok("abcd")),
        (r#"respond(env("PW"))"#, Ok("s3cret")),
        (r#"respond("[" + env("NOPE") + "]")"#, Ok("[]")),
        (r#"respond(param("mode") + param("q"))"#, Ok("bz")),
        (r#"respond("[" + param("none") + "]")"#, Ok("[]")),
        (r#"respond(header("metadata-flavor"))"#, Ok("Metadata-Flavor: Google")),
        (r#"respond("[" + header("Nope") + "]")"#, Ok("[]")),
        (r#"respond(path())"#, Ok("/app/x")),
        (
            r#"respond(metadata("project/project-id"))"#,
            Ok("md:project/project-id"),
        ),
        (r#"respond(fetch("/a", ""))"#, Ok("</a>")),
        (r#"respond(env(param("which") + "PW"))"#, Ok("s3cret")),
        (r#"if "a" == "a" { respond("yes") } respond("no")"#, Ok("yes")),
        (r#"if "a" != "a" { respond("yes") } respond("no")"#, Ok("no")),
        (r#"if "a" == "b" { respond("1") } else { respond("2") }"#, Ok("2")),
        (
            r#"if param("mode") == "a" { respond("A") } else if param("mode") == "b" { respond("B") } else { respond("C") }"#,
            Ok("B"),
        ),
        (r#"if "x" == "x" { if "y" != "z" { respond("deep") } }"#, Ok("deep")),
        (r#"log("one"); respond("after log")"#, Ok("after log")),
        (r#"respond("first") respond("second")"#, Ok("first")),
        (
            r#"error("boom " + param("q"))"#,
            Err(EvalError::Raised("boom z".into())),
        ),
        (
            r#"respond(fetch("http://blocked/", ""))"#,
            Err(EvalError::Runtime("host of `http://blocked/` is not reachable".into())),
        ),
    ]
}

pub fn check_goldens() -> Result<usize, String> {
    let cases = goldens();
    for (src, want) in &cases {
        let (got, _) = exec(src);
        if got != want.clone().map(str::to_string) {
            return Err(format!("{src}: got {got:?}, want {want:?}"));
        }
    }
    Ok(cases.len())
}

pub fn logs(n: usize) -> String {
    "log(\"x\")\n".repeat(n)
}

fn expect(cond: bool, what: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn limited(out: &Result<String, EvalError>) -> bool {
    matches!(out, Err(EvalError::LimitExceeded(_)))
}

/// 1000 statements run; 1001 do not. An `if` counts itself plus the
/// statements of the branch it takes; untaken branches are free.
pub fn check_statement_limit() -> Result<(), String> {
    expect(MAX_STATEMENTS == 1000, "MAX_STATEMENTS is 1000")?;
    let (out, host) = exec(&logs(1000));
    expect(
        out == Ok(String::new()) && host.logs.len() == 1000,
        "1000 statements run",
    )?;
    let (out, host) = exec(&logs(1001));
    expect(limited(&out), "1001 statements exceed the limit")?;
    expect(host.logs.len() == 1001, "1000 INFO lines and one ERROR")?;
    expect(
        host.logs.last().map(|l| l.0) == Some(Severity::Error),
        "the last line is an ERROR",
    )?;
    let (out, _) = exec(&format!("if \"a\" == \"a\" {{ {} }}", logs(999)));
    expect(out == Ok(String::new()), "an if with 999 inside runs")?;
    let (out, _) = exec(&format!("if \"a\" == \"a\" {{ {} }}", logs(1000)));
    expect(limited(&out), "an if with 1000 inside exceeds the limit")?;
    let (out, _) = exec(&format!("if \"a\" == \"b\" {{ {} }} {}", logs(5000), logs(999)));
    expect(out == Ok(String::new()), "untaken branches are free")
}

/// Four fetch or metadata calls run; the fifth fails before reaching the
/// host.
pub fn check_fetch_limit() -> Result<(), String> {
    expect(MAX_FETCHES == 4, "MAX_FETCHES is 4")?;
    let four = r#"respond(fetch("/1", "") + metadata("a") + fetch("/3", "") + metadata("b"))"#;
    let (out, host) = exec(four);
    expect(
        out.as_deref() == Ok("</1>md:a</3>md:b") && host.calls.len() == 4,
        "four calls run",
    )?;
    let five = r#"respond(fetch("/1", "") + metadata("a") + fetch("/3", "") + metadata("b") + fetch("/5", ""))"#;
    let (out, host) = exec(five);
    expect(limited(&out), "five calls exceed the limit")?;
    expect(host.calls.len() == 4, "the fifth call never reaches the host")?;
    let (out, _) = exec(&format!(
        "{}respond(\"done\")",
        "if fetch(\"/x\", \"\") == \"\" { }\n".repeat(5)
    ));
    expect(limited(&out), "calls in conditions count")
}

/// Overwrites a5's function with one that returns its own token, invokes
/// it, and checks the result is the runtime account's credential.
pub fn check_a5_overwrite() -> Result<(), String> {
    use super::{activate, create, ok, platform, PROJECT};
    use thunder_core::iam::{Caller, TokenKind};
    use thunder_core::ApiRequest;
    let mut p = platform(5);
    let start = create(&mut p, "thunder/a5power");
    let handout = activate(&mut p, start["handout_key"].as_str().unwrap_or_default());
    ok(
        &mut p,
        ApiRequest::put(&format!("/functions/v1/projects/{PROJECT}/functions/a5-report/source"))
            .with_bearer(Some(&handout))
            .with_body(b"respond(metadata(\"instance/service-accounts/default/token?format=text\"))".to_vec()),
    );
    let stolen = p
        .handle(&ApiRequest::get(&format!("/fn/{PROJECT}/a5-report")))
        .body_text();
    let runtime = format!("a5-vm@{PROJECT}.iam.emucloud");
    match p.emulator.resolve(Some(&stolen)) {
        Caller::Principal(tok) if tok.kind == TokenKind::Access && tok.principal == runtime => Ok(()),
        other => Err(format!("the function returned `{stolen}`, which resolves to {other:?}")),
    }
}
