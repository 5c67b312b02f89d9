mod support;

use std::path::Path;
use std::sync::{Arc, Mutex};

use clap::Parser;
use support::{Player, PROJECT};
use tempfile::TempDir;
use thunder_cli::cli::Cli;
use thunder_cli::{run, server, Connector, Env, ExitCode};
use thunder_core::{ApiRequest, LevelRegistry, MetadataMode};

/// Splits a shell line into words, honoring double and single quotes.
fn shell_words(line: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut in_word = false;
    for c in line.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => cur.push(c),
            None if c == '"' || c == '\'' => {
                quote = Some(c);
                in_word = true;
            }
            None if c.is_whitespace() => {
                if in_word {
                    words.push(std::mem::take(&mut cur));
                    in_word = false;
                }
            }
            None => {
                cur.push(c);
                in_word = true;
            }
        }
    }
    if in_word {
        words.push(cur);
    }
    words
}

/// Every `thunder ...` command in a text: whole lines and inline code spans.
fn commands_in(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with("thunder ") {
            out.push(t.to_string());
            continue;
        }
        for (i, span) in t.split('`').enumerate() {
            if i % 2 == 1 && span.starts_with("thunder ") {
                out.push(span.to_string());
            }
        }
    }
    out
}

#[test]
fn every_shipped_command_parses() {
    let registry = LevelRegistry::shipped();
    let mut checked = 0;
    for level in registry.iter() {
        let mut texts = vec![level.intro.clone(), level.writeup.clone()];
        texts.extend(level.hints.hints.iter().map(|h| h.body.clone()));
        for text in texts {
            for cmd in commands_in(&text) {
                let cmd = cmd.replace("{{ project_id }}", PROJECT);
                let cmd = cmd.split(" > ").next().unwrap();
                let words = shell_words(cmd);
                if let Err(e) = Cli::try_parse_from(&words) {
                    panic!("{}: `{cmd}` does not parse: {e}", level.reference());
                }
                checked += 1;
            }
        }
    }
    assert!(checked >= 40, "only {checked} commands found");
}

#[test]
fn shell_words_honors_quotes() {
    assert_eq!(
        shell_words(r#"a --header "Metadata-Flavor: Google" 'x y'"#),
        vec!["a", "--header", "Metadata-Flavor: Google", "x y"]
    );
}

#[test]
fn exit_codes() {
    let p = Player::local(MetadataMode::Default);
    let err = p.fails(&["--project", PROJECT, "destroy"], ExitCode::Api).unwrap();
    assert!(err.contains("not_active"), "{err}");
    p.fails(&["frobnicate"], ExitCode::Usage).unwrap();
    p.fails(&["create"], ExitCode::Usage).unwrap();
    p.fails(&["objects", "cat", "only-bucket"], ExitCode::Usage).unwrap();
    p.fails(&["auth", "activate-key", "missing.json"], ExitCode::Usage)
        .unwrap();
    assert_eq!(p.run(&["--help"]).code, ExitCode::Success);
    assert_eq!(p.run(&["--version"]).code, ExitCode::Success);

    let home = TempDir::new().unwrap();
    let env = Env {
        home: home.path().to_path_buf(),
        addr: Some("127.0.0.1:1".into()),
        cwd: home.path().to_path_buf(),
    };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(["thunder", "list-levels"], &env, &Connector::Http, &mut out, &mut err);
    assert_eq!(code, ExitCode::Connectivity, "{}", String::from_utf8_lossy(&err));
}

#[test]
fn wrong_flag_exits_one() {
    let p = Player::local(MetadataMode::Default);
    p.ok(&["create", "thunder/a1openbucket", "--project", PROJECT]).unwrap();
    let err = p.fails(&["submit", "CTF{0000000000000000}"], ExitCode::Api).unwrap();
    assert!(err.contains("incorrect"), "{err}");
}

#[cfg(unix)]
#[test]
fn config_and_keys_are_private() {
    use std::os::unix::fs::PermissionsExt;
    let p = Player::local(MetadataMode::Default);
    let info = p.json(&["create", "thunder/a2finance", "--project", PROJECT]).unwrap();
    let account = info["handout_account"].as_str().unwrap();
    let key = format!("{}.json", account.split('@').next().unwrap());
    p.read(&key).unwrap();
    p.ok(&["auth", "activate-key", &key]).unwrap();
    let mode = |path: &Path| std::fs::metadata(path).unwrap().permissions().mode() & 0o777;
    assert_eq!(mode(&p.home().join("config.json")), 0o600);
    p.ok(&["keys", "generate", "me.key"]).unwrap();
    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.home().join("config.json")).unwrap()).unwrap();
    assert_eq!(config["project"], PROJECT);
    assert_eq!(config["account"], account);
    assert!(config["token"].is_string());
}

fn run_in(env: &Env, args: &[&str]) -> (ExitCode, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("thunder").chain(args.iter().copied());
    let code = run(argv, env, &Connector::Http, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned())
}

#[test]
fn address_precedence() {
    let shared = Arc::new(Mutex::new(support::platform(MetadataMode::Default)));
    let live = server::spawn("127.0.0.1:0", shared).unwrap().to_string();
    let dead = "127.0.0.1:1";
    let home = TempDir::new().unwrap();
    let env = |addr: Option<&str>| Env {
        home: home.path().to_path_buf(),
        addr: addr.map(str::to_string),
        cwd: home.path().to_path_buf(),
    };

    assert_eq!(
        run_in(&env(None), &["config", "set", "addr", dead]).0,
        ExitCode::Success
    );
    assert_eq!(run_in(&env(None), &["list-levels"]).0, ExitCode::Connectivity);
    // The environment beats the config file.
    assert_eq!(run_in(&env(Some(&live)), &["list-levels"]).0, ExitCode::Success);
    // The flag beats the environment.
    assert_eq!(
        run_in(&env(Some(dead)), &["--addr", &live, "list-levels"]).0,
        ExitCode::Success
    );
    assert_eq!(
        run_in(&env(Some(&live)), &["--addr", dead, "list-levels"]).0,
        ExitCode::Connectivity
    );

    assert_eq!(
        run_in(&env(None), &["config", "set", "addr", &live]).0,
        ExitCode::Success
    );
    assert_eq!(run_in(&env(None), &["list-levels"]).0, ExitCode::Success);
    assert_eq!(
        run_in(&env(None), &["config", "set", "colour", "red"]).0,
        ExitCode::Usage
    );
}

#[test]
fn json_output_is_the_api_body() {
    let p = Player::local(MetadataMode::Default);
    p.ok(&["create", "thunder/a1openbucket", "--project", PROJECT]).unwrap();
    let direct = |path: &str| {
        let resp = p.shared.lock().unwrap().handle(&ApiRequest::get(path));
        String::from_utf8(resp.body).unwrap()
    };
    let cases: &[(&[&str], String)] = &[
        (&["list-levels"], "/ctf/v1/levels".into()),
        (&["buckets", "list"], format!("/storage/v1/b?project={PROJECT}")),
        (&["progress"], format!("/ctf/v1/progress?project={PROJECT}")),
    ];
    for (args, path) in cases {
        let mut all = vec!["--json"];
        all.extend_from_slice(args);
        let out = p.run(&all);
        assert_eq!(out.code, ExitCode::Success, "{}", out.stderr);
        assert_eq!(out.text().trim_end(), direct(path).trim_end(), "{args:?}");
    }

    // Errors: the body on stdout, a summary on stderr.
    let bucket = p.ok(&["buckets", "list"]).unwrap().trim().to_string();
    let out = p.run(&["--json", "objects", "cat", &bucket, "x"]);
    assert_eq!(out.code, ExitCode::Api);
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["error"]["code"], "not_found");
    assert!(out.stderr.contains("not_found"), "{}", out.stderr);
}

#[test]
fn list_levels_shows_six() {
    let p = Player::local(MetadataMode::Default);
    let text = p.ok(&["list-levels", "--namespace", "thunder"]).unwrap();
    let rows: Vec<_> = text.lines().filter(|l| l.starts_with("thunder/")).collect();
    assert_eq!(rows.len(), 6, "{text}");
    let shown = p.ok(&["show-level", "thunder/a4error"]).unwrap();
    assert!(shown.contains("a4-status"), "{shown}");
}

#[test]
fn unknown_object_is_not_found() {
    let p = Player::local(MetadataMode::Default);
    p.ok(&["create", "thunder/a1openbucket", "--project", PROJECT]).unwrap();
    let bucket = p.ok(&["buckets", "list"]).unwrap().trim().to_string();
    let err = p
        .fails(&["objects", "cat", &bucket, "nope.txt"], ExitCode::Api)
        .unwrap();
    assert!(err.contains("not_found"), "{err}");
}

#[test]
fn test_permissions_and_denials() {
    let p = Player::local(MetadataMode::Default);
    p.ok(&["create", "thunder/a5power", "--project", PROJECT]).unwrap();
    p.ok(&["auth", "activate-key", "a5-access.json"]).unwrap();
    let perms = p.ok(&["iam", "test-permissions"]).unwrap();
    assert!(perms.contains("cloudfunctions.functions.update"), "{perms}");
    let err = p.fails(&["buckets", "list"], ExitCode::Api).unwrap();
    assert!(err.contains("storage.buckets.list"), "{err}");
}

#[test]
fn hints_via_cli() {
    let p = Player::local(MetadataMode::Default);
    p.ok(&["create", "thunder/a1openbucket", "--project", PROJECT]).unwrap();
    let first = p.ok(&["hints", "reveal", "--level", "thunder/a1openbucket"]).unwrap();
    assert!(!first.contains("CTF{"));
    let shown = p.json(&["hints", "show", "--level", "thunder/a1openbucket"]).unwrap();
    assert_eq!(shown["revealed"], 1, "{shown}");

    p.ok(&["hints", "site", "--out", "site"]).unwrap();
    let index = p.read("site/index.html").unwrap();
    assert!(index.contains("a1openbucket"));
    let page = p.read("site/thunder/a6container/index.html").unwrap();
    assert!(page.contains(PROJECT), "project id is filled in");
    assert!(!page.contains("{{"));
}

#[test]
fn raw_bytes_pass_through() {
    let p = Player::local(MetadataMode::Default);
    p.ok(&["create", "thunder/a3password", "--project", PROJECT]).unwrap();
    p.ok(&["auth", "activate-key", "a3-access.json"]).unwrap();
    let source = p.ok(&["functions", "source", "a3-login"]).unwrap();
    let direct = {
        let token = p.ok(&["auth", "print-token"]).unwrap();
        let req = ApiRequest::get(&format!("/functions/v1/projects/{PROJECT}/functions/a3-login/source"))
            .with_bearer(Some(token.trim()));
        p.shared.lock().unwrap().handle(&req)
    };
    assert_eq!(direct.status, 200, "{}", direct.body_text());
    assert_eq!(source.as_bytes(), &direct.body[..]);
}

#[test]
fn binary_serves_and_plays() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let home = TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_thunder");
    let thunder = |args: &[&str]| {
        std::process::Command::new(bin)
            .args(["--addr", &addr])
            .args(args)
            .env("THUNDER_HOME", home.path())
            .env_remove("EMUCLOUD_ADDR")
            .current_dir(home.path())
            .output()
            .unwrap()
    };
    let mut server = std::process::Command::new(bin)
        .args(["--addr", &addr, "serve"])
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let mut up = false;
    for _ in 0..100 {
        if thunder(&["list-levels"]).status.success() {
            up = true;
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let result = std::panic::catch_unwind(|| {
        assert!(up, "server did not come up");
        assert!(thunder(&["create", "thunder/a1openbucket"]).status.success());
        let bucket = String::from_utf8(thunder(&["buckets", "list"]).stdout).unwrap();
        let flag = thunder(&["objects", "cat", bucket.trim(), "secret.txt"]).stdout;
        let flag = String::from_utf8(flag).unwrap();
        let wrong = thunder(&["submit", "CTF{0000000000000000}"]);
        assert_eq!(wrong.status.code(), Some(1));
        assert!(thunder(&["submit", flag.trim()]).status.success());
        assert_eq!(thunder(&["bogus"]).status.code(), Some(3));
    });
    server.kill().unwrap();
    server.wait().unwrap();
    if let Err(e) = result {
        std::panic::resume_unwind(e);
    }
}
