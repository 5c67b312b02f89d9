//! Verb implementations. Each player verb maps onto API endpoints of the
//! server; `--json` prints the response body unchanged.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde_json::{json, Value};
use thunder_core::services::compute::KeyPair;
use thunder_core::{archive, ApiRequest, ApiResponse, LevelRegistry, MetadataMode};

use crate::cli::*;
use crate::config::{write_private, CliConfig, OutputMode, DEFAULT_ADDR, DEFAULT_PROJECT};
use crate::error::{CliError, ExitCode};
use crate::render::table;
use crate::server;
use crate::transport::{Connector, Transport};

/// Process environment the CLI depends on.
#[derive(Debug, Clone)]
pub struct Env {
    /// Directory holding `config.json`.
    pub home: PathBuf,
    /// `EMUCLOUD_ADDR`.
    pub addr: Option<String>,
    /// Relative paths on the command line are taken from here.
    pub cwd: PathBuf,
}

impl Env {
    /// `THUNDER_HOME` (default `~/.thunder`), `EMUCLOUD_ADDR` and the
    /// working directory.
    pub fn from_process() -> Env {
        let home = std::env::var_os("THUNDER_HOME")
            .filter(|h| !h.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| {
                std::env::var_os("HOME")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
                    .join(".thunder")
            });
        let addr = std::env::var("EMUCLOUD_ADDR").ok().filter(|a| !a.is_empty());
        let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
        Env { home, addr, cwd }
    }
}

/// Parses `args` (program name first) and runs the verb.
pub fn run<I, T>(args: I, env: &Env, connector: &Connector, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    use clap::error::ErrorKind;
    use clap::Parser;

    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    ExitCode::Success
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    ExitCode::Usage
                }
            };
        }
    };
    let config = match CliConfig::load(&env.home) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let addr = cli
        .addr
        .clone()
        .or_else(|| env.addr.clone())
        .or_else(|| config.api_address.clone())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string());
    let mut ctx = Ctx {
        env,
        json: cli.json || config.output == OutputMode::Json,
        config,
        transport: connector.connect(&addr),
        addr,
        project_flag: cli.project,
        token_flag: cli.token,
        out,
        err,
    };
    match ctx.dispatch(cli.command) {
        Ok(()) => ExitCode::Success,
        Err(e) => {
            ctx.report(&e);
            e.exit_code()
        }
    }
}

type Res = Result<(), CliError>;

struct Ctx<'a> {
    env: &'a Env,
    config: CliConfig,
    addr: String,
    project_flag: Option<String>,
    token_flag: Option<String>,
    json: bool,
    transport: Box<dyn Transport>,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~')
    .remove(b':')
    .remove(b'@');

fn seg(s: &str) -> String {
    utf8_percent_encode(s, SEGMENT).to_string()
}

/// Encodes each `/`-separated part of a multi-segment name.
fn segs(s: &str) -> String {
    s.split('/').map(seg).collect::<Vec<_>>().join("/")
}

fn pairs(items: &[String], sep: char, what: &str) -> Result<Vec<(String, String)>, CliError> {
    items
        .iter()
        .map(|item| {
            item.split_once(sep)
                .map(|(k, v)| (k.trim().to_string(), v.trim_start().to_string()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| CliError::Usage(format!("bad {what} `{item}`")))
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::file(path))
}

fn parse_json(resp: &ApiResponse) -> Result<Value, CliError> {
    serde_json::from_slice(&resp.body).map_err(|e| CliError::Api {
        status: resp.status,
        code: "bad_response".into(),
        message: format!("response is not JSON: {e}"),
        body: resp.body.clone(),
    })
}

fn s(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array().map(|a| a.iter().map(s).collect()).unwrap_or_default()
}

/// Joins archive paths under `dir`, refusing anything that would escape it.
fn safe_join(dir: &Path, archived: &str) -> Result<PathBuf, CliError> {
    let rel = Path::new(archived.trim_start_matches('/'));
    let ok = rel.components().count() > 0 && rel.components().all(|c| matches!(c, Component::Normal(_)));
    if !ok {
        return Err(CliError::Usage(format!("refusing to extract `{archived}`")));
    }
    Ok(dir.join(rel))
}

impl Ctx<'_> {
    fn line(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", text.as_ref());
    }

    fn raw(&mut self, bytes: &[u8]) {
        let _ = self.out.write_all(bytes);
    }

    fn report(&mut self, e: &CliError) {
        if let CliError::Api { body, .. } = e {
            if self.json && !body.is_empty() {
                self.raw(body);
            }
        }
        let _ = writeln!(self.err, "error: {e}");
    }

    fn path(&self, p: &Path) -> PathBuf {
        self.env.cwd.join(p)
    }

    fn project(&self) -> Result<String, CliError> {
        self.project_flag
            .clone()
            .or_else(|| self.config.project.clone())
            .ok_or_else(|| CliError::Usage("no project set; pass --project or run `thunder create`".into()))
    }

    fn token(&self) -> Option<String> {
        self.token_flag.clone().or_else(|| self.config.token.clone())
    }

    fn save(&self) -> Res {
        self.config.save(&self.env.home)
    }

    fn exchange(&self, req: ApiRequest) -> Result<ApiResponse, CliError> {
        let resp = self.transport.send(&req)?;
        if (200..300).contains(&resp.status) {
            return Ok(resp);
        }
        let parsed: Option<Value> = serde_json::from_slice(&resp.body).ok();
        let field = |k: &str| parsed.as_ref().and_then(|v| v["error"][k].as_str().map(str::to_string));
        Err(CliError::Api {
            status: resp.status,
            code: field("code").unwrap_or_else(|| format!("http_{}", resp.status)),
            message: field("message").unwrap_or_else(|| resp.body_text()),
            body: resp.body,
        })
    }

    /// Sends with the active credential.
    fn send(&self, req: ApiRequest) -> Result<ApiResponse, CliError> {
        let token = self.token();
        self.exchange(req.with_bearer(token.as_deref()))
    }

    /// JSON bodies: raw in json mode, else through `text`.
    fn emit(&mut self, resp: &ApiResponse, text: impl FnOnce(&mut Self, &Value)) -> Res {
        if self.json {
            self.raw(&resp.body);
            return Ok(());
        }
        let v = parse_json(resp)?;
        text(self, &v);
        Ok(())
    }

    fn dispatch(&mut self, command: Command) -> Res {
        match command {
            Command::Serve(args) => self.serve(args),
            Command::Create { level, key_out } => self.create(&level, key_out),
            Command::Destroy => {
                let resp = self.send(ApiRequest::post("/ctf/v1/destroy"))?;
                self.emit(&resp, |c, v| {
                    c.line(format!("Destroyed {} in {}", s(&v["level"]), s(&v["project_id"])))
                })
            }
            Command::ListLevels { namespace } => {
                let mut req = ApiRequest::get("/ctf/v1/levels");
                if let Some(ns) = namespace {
                    req.query.insert("namespace".into(), ns);
                }
                let resp = self.send(req)?;
                self.emit(&resp, |c, v| {
                    let mut rows = vec![vec!["LEVEL".into(), "HINTS".into(), "TITLE".into()]];
                    for l in v["levels"].as_array().into_iter().flatten() {
                        rows.push(vec![s(&l["level"]), s(&l["hints"]), s(&l["title"])]);
                    }
                    c.line(table(&rows));
                })
            }
            Command::ShowLevel { level } => {
                let (ns, name) = level
                    .split_once('/')
                    .ok_or_else(|| CliError::Usage(format!("level `{level}` must be namespace/name")))?;
                let resp = self.send(ApiRequest::get(&format!("/ctf/v1/levels/{}/{}", seg(ns), seg(name))))?;
                self.emit(&resp, |c, v| {
                    c.line(format!("{}: {}\n", s(&v["level"]), s(&v["title"])));
                    c.line(s(&v["intro"]).trim_end());
                    c.line(format!("\nWriteup:\n\n{}", s(&v["writeup"]).trim_end()));
                })
            }
            Command::Submit { flag, level } => self.submit(&flag, level),
            Command::Progress => {
                let mut req = ApiRequest::get("/ctf/v1/progress");
                req.query.insert("project".into(), self.project()?);
                let resp = self.send(req)?;
                self.emit(&resp, |c, v| {
                    let mut rows = vec![vec![
                        "LEVEL".into(),
                        "SOLVED".into(),
                        "SUBMISSIONS".into(),
                        "HINTS".into(),
                    ]];
                    for (level, p) in v["levels"].as_object().into_iter().flatten() {
                        rows.push(vec![
                            level.clone(),
                            if p["solved"] == true { "yes".into() } else { "no".into() },
                            p["submissions"].as_array().map_or(0, Vec::len).to_string(),
                            s(&p["hints_revealed"]),
                        ]);
                    }
                    c.line(table(&rows));
                })
            }
            Command::Hints(cmd) => self.hints(cmd),
            Command::Config(cmd) => self.config_cmd(cmd),
            Command::Auth(cmd) => self.auth(cmd),
            Command::Iam(cmd) => self.iam(cmd),
            Command::Buckets(BucketsCmd::List) => {
                let mut req = ApiRequest::get("/storage/v1/b");
                req.query.insert("project".into(), self.project()?);
                let resp = self.send(req)?;
                self.emit(&resp, |c, v| {
                    for b in strings(&v["items"]) {
                        c.line(b);
                    }
                })
            }
            Command::Objects(cmd) => self.objects(cmd),
            Command::Instances(cmd) => self.instances(cmd),
            Command::Keys(KeysCmd::Generate { file }) => self.keys_generate(&self.path(&file)),
            Command::Ssh { instance, key, exec } => self.ssh(&instance, &self.path(&key), exec.as_deref()),
            Command::Functions(cmd) => self.functions(cmd),
            Command::Logs(LogsCmd::Read { logger }) => {
                let mut req = ApiRequest::get(&format!("/logging/v1/projects/{}/entries", seg(&self.project()?)));
                if let Some(l) = logger {
                    req.query.insert("logger".into(), l);
                }
                let resp = self.send(req)?;
                self.emit(&resp, |c, v| {
                    for e in v["entries"].as_array().into_iter().flatten() {
                        c.line(format!(
                            "{} {} {}: {}",
                            s(&e["timestamp"]),
                            s(&e["severity"]),
                            s(&e["logger"]),
                            s(&e["message"])
                        ));
                    }
                })
            }
            Command::Repo(cmd) => self.repo(cmd),
            Command::Images(cmd) => self.images(cmd),
        }
    }

    fn serve(&mut self, args: ServeArgs) -> Res {
        let mode: MetadataMode = args.metadata_mode.parse().map_err(CliError::Usage)?;
        let addr = self
            .addr
            .trim_start_matches("http://")
            .trim_end_matches('/')
            .to_string();
        let platform = Arc::new(Mutex::new(server::platform(&addr, mode)));
        let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Connect {
            addr: addr.clone(),
            reason: e.to_string(),
        })?;
        let connect = |e: std::io::Error| CliError::Connect {
            addr: addr.clone(),
            reason: e.to_string(),
        };
        runtime.block_on(async {
            let listener = tokio::net::TcpListener::bind(&addr).await.map_err(connect)?;
            let local = listener.local_addr().map_err(connect)?;
            let _ = writeln!(
                self.err,
                "serving the emulated cloud on http://{local} (metadata mode: {mode:?})"
            );
            server::serve(listener, platform, async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(connect)
        })
    }

    fn create(&mut self, level: &str, key_out: Option<PathBuf>) -> Res {
        let project = self
            .project_flag
            .clone()
            .or_else(|| self.config.project.clone())
            .unwrap_or_else(|| DEFAULT_PROJECT.to_string());
        let resp = self
            .exchange(ApiRequest::post("/ctf/v1/create").with_json(&json!({"level": level, "project_id": project})))?;
        let info = parse_json(&resp)?;
        self.config.project = Some(project.clone());
        self.config.token = None;
        self.config.account = None;
        self.save()?;
        let mut key_path = None;
        if let Some(key) = info["handout_key"].as_str() {
            let account = s(&info["handout_account"]);
            let name = account.split('@').next().unwrap_or("handout");
            let path = self.path(&key_out.unwrap_or_else(|| PathBuf::from(format!("{name}.json"))));
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(CliError::file(parent))?;
            }
            write_private(&path, key.as_bytes())?;
            key_path = Some(path);
        }
        if self.json {
            self.raw(&resp.body);
            return Ok(());
        }
        self.line(format!("{}: {}", s(&info["level"]), s(&info["title"])));
        self.line(format!("Project: {project}\n"));
        self.line(s(&info["intro"]).trim_end());
        if let Some(path) = key_path {
            self.line(format!(
                "\nCredentials for {} were written to {}.\nActivate them with: thunder auth activate-key {}",
                s(&info["handout_account"]),
                path.display(),
                path.display()
            ));
        }
        let hints = format!(
            "http://{}{}",
            self.addr.trim_start_matches("http://"),
            s(&info["hints_url"])
        );
        self.line(format!("\nHints: {hints}"));
        Ok(())
    }

    fn active_level(&self) -> Result<(String, String), CliError> {
        let resp = self.exchange(ApiRequest::get("/ctf/v1/active"))?;
        let v = parse_json(&resp)?;
        Ok((s(&v["level"]), s(&v["project_id"])))
    }

    fn level_and_project(&self, level: Option<String>) -> Result<(String, Option<String>), CliError> {
        let project = self.project_flag.clone().or_else(|| self.config.project.clone());
        match level {
            Some(l) => Ok((l, project)),
            None => {
                let (l, p) = self.active_level()?;
                Ok((l, project.or(Some(p))))
            }
        }
    }

    fn submit(&mut self, flag: &str, level: Option<String>) -> Res {
        let (level, project) = self.level_and_project(level)?;
        let project = project.ok_or_else(|| CliError::Usage("no project set".into()))?;
        let resp = self.exchange(
            ApiRequest::post("/ctf/v1/validate")
                .with_json(&json!({"level": level, "project_id": project, "flag": flag.trim()})),
        )?;
        let v = parse_json(&resp)?;
        if v["result"] != "correct" {
            return Err(CliError::Api {
                status: resp.status,
                code: "incorrect".into(),
                message: format!("that is not the flag for {level}"),
                body: resp.body,
            });
        }
        if self.json {
            self.raw(&resp.body);
        } else {
            self.line(format!("correct: {level} solved"));
        }
        Ok(())
    }

    fn hints(&mut self, cmd: HintsCmd) -> Res {
        match cmd {
            HintsCmd::Show { level } => {
                let (level, project) = self.level_and_project(level)?;
                let mut req = ApiRequest::get("/ctf/v1/hints");
                req.query.insert("level".into(), level);
                if let Some(p) = project {
                    req.query.insert("project".into(), p);
                }
                let resp = self.exchange(req)?;
                self.emit(&resp, |c, v| {
                    c.line(format!(
                        "{} of {} hints revealed for {}",
                        s(&v["revealed"]),
                        s(&v["total"]),
                        s(&v["level"])
                    ));
                    for h in v["hints"].as_array().into_iter().flatten() {
                        c.line(format!(
                            "\nHint {}: {}\n\n{}",
                            s(&h["index"]),
                            s(&h["title"]),
                            s(&h["body"]).trim_end()
                        ));
                    }
                })
            }
            HintsCmd::Reveal { level } => {
                let (level, project) = self.level_and_project(level)?;
                let resp = self.exchange(
                    ApiRequest::post("/ctf/v1/hints/reveal").with_json(&json!({"level": level, "project_id": project})),
                )?;
                self.emit(&resp, |c, v| {
                    if let Some(h) = v["hints"].as_array().and_then(|a| a.last()) {
                        c.line(format!(
                            "Hint {} of {}: {}\n\n{}",
                            s(&h["index"]),
                            s(&v["total"]),
                            s(&h["title"]),
                            s(&h["body"]).trim_end()
                        ));
                    }
                })
            }
            HintsCmd::Site { out } => {
                let project = self
                    .project_flag
                    .clone()
                    .or_else(|| self.config.project.clone())
                    .unwrap_or_else(|| "your-project-id".to_string());
                let out = self.path(&out);
                let pages = write_hint_site(&out, &project)?;
                if self.json {
                    let list: Vec<String> = pages.iter().map(|p| p.display().to_string()).collect();
                    self.line(json!({ "pages": list }).to_string());
                } else {
                    self.line(format!("Wrote {} hint pages under {}", pages.len(), out.display()));
                }
                Ok(())
            }
        }
    }

    fn config_cmd(&mut self, cmd: ConfigCmd) -> Res {
        match cmd {
            ConfigCmd::Show => {
                let mut shown = self.config.clone();
                if let Some(t) = &shown.token {
                    shown.token = Some(format!("{}...", t.chars().take(8).collect::<String>()));
                }
                self.line(serde_json::to_string_pretty(&shown).expect("config serializes"));
                Ok(())
            }
            ConfigCmd::Set { key, value } => {
                match key.as_str() {
                    "addr" => self.config.api_address = Some(value),
                    "project" => self.config.project = Some(value),
                    "output" => {
                        self.config.output = match value.as_str() {
                            "text" => OutputMode::Text,
                            "json" => OutputMode::Json,
                            other => {
                                return Err(CliError::Usage(format!("output must be text or json, not `{other}`")))
                            }
                        }
                    }
                    other => {
                        return Err(CliError::Usage(format!(
                            "unknown setting `{other}` (addr, project, output)"
                        )))
                    }
                }
                self.save()
            }
        }
    }

    fn auth(&mut self, cmd: AuthCmd) -> Res {
        match cmd {
            AuthCmd::ActivateKey { file } => {
                let file = self.path(&file);
                let text = read_text(&file)?;
                let key: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: not a key file: {e}", file.display())))?;
                let (Some(email), Some(private_key)) = (key["client_email"].as_str(), key["private_key"].as_str())
                else {
                    return Err(CliError::Usage(format!(
                        "{}: missing client_email or private_key",
                        file.display()
                    )));
                };
                let resp = self.exchange(
                    ApiRequest::post("/iam/v1/token")
                        .with_json(&json!({"client_email": email, "private_key": private_key})),
                )?;
                let v = parse_json(&resp)?;
                self.config.token = Some(s(&v["access_token"]));
                self.config.account = Some(email.to_string());
                if self.config.project.is_none() {
                    self.config.project = key["project_id"].as_str().map(str::to_string);
                }
                self.save()?;
                let email = email.to_string();
                self.emit(&resp, |c, v| {
                    c.line(format!("Activated {email} (token valid for {}s)", s(&v["expires_in"])))
                })
            }
            AuthCmd::ActivateToken { token } => {
                let resp = self.exchange(ApiRequest::get("/iam/v1/tokeninfo").with_bearer(Some(&token)))?;
                let v = parse_json(&resp)?;
                self.config.token = Some(token);
                self.config.account = Some(s(&v["principal"]));
                if self.config.project.is_none() {
                    self.config.project = v["project_id"].as_str().map(str::to_string);
                }
                self.save()?;
                self.emit(&resp, |c, v| {
                    c.line(format!(
                        "Activated a token for {} (valid for {}s)",
                        s(&v["principal"]),
                        s(&v["expires_in"])
                    ))
                })
            }
            AuthCmd::PrintToken => {
                let token = self
                    .token()
                    .ok_or_else(|| CliError::Usage("no active credential; run `thunder auth activate-key`".into()))?;
                if self.json {
                    self.line(json!({ "access_token": token }).to_string());
                } else {
                    self.line(token);
                }
                Ok(())
            }
            AuthCmd::IdentityToken { audience } => {
                let resp =
                    self.send(ApiRequest::post("/iam/v1/identity-token").with_json(&json!({"audience": audience})))?;
                self.emit(&resp, |c, v| c.line(s(&v["token"])))
            }
        }
    }

    fn iam(&mut self, cmd: IamCmd) -> Res {
        let project = || self.project();
        match cmd {
            IamCmd::TestPermissions { permissions } => {
                let body = if permissions.is_empty() {
                    json!({})
                } else {
                    json!({ "permissions": permissions })
                };
                let path = format!("/iam/v1/projects/{}/testIamPermissions", seg(&project()?));
                let resp = self.send(ApiRequest::post(&path).with_json(&body))?;
                self.emit(&resp, |c, v| {
                    let held = strings(&v["permissions"]);
                    if held.is_empty() {
                        c.line("(no permissions)");
                    }
                    for p in held {
                        c.line(p);
                    }
                })
            }
            IamCmd::GetPolicy => {
                let resp = self.send(ApiRequest::get(&format!(
                    "/iam/v1/projects/{}/policy",
                    seg(&project()?)
                )))?;
                self.emit(&resp, |c, v| {
                    c.line(format!("etag: {}", s(&v["etag"])));
                    for b in v["bindings"].as_array().into_iter().flatten() {
                        c.line(format!("{}: {}", s(&b["role"]), strings(&b["members"]).join(", ")));
                    }
                })
            }
            IamCmd::SetPolicy { file } => {
                let file = self.path(&file);
                let text = read_text(&file)?;
                let policy: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: not a policy file: {e}", file.display())))?;
                let body = json!({ "bindings": policy["bindings"], "etag": policy["etag"] });
                let path = format!("/iam/v1/projects/{}/policy", seg(&project()?));
                let resp = self.send(ApiRequest::put(&path).with_json(&body))?;
                self.emit(&resp, |c, v| {
                    c.line(format!(
                        "Updated the IAM policy of {} (etag {})",
                        s(&v["project_id"]),
                        s(&v["etag"])
                    ))
                })
            }
            IamCmd::Roles => {
                let resp = self.send(ApiRequest::get("/iam/v1/roles"))?;
                self.emit(&resp, |c, v| {
                    for r in v["items"].as_array().into_iter().flatten() {
                        c.line(format!("{}: {}", s(&r["role"]), strings(&r["permissions"]).join(", ")));
                    }
                })
            }
        }
    }

    fn objects(&mut self, cmd: ObjectsCmd) -> Res {
        match cmd {
            ObjectsCmd::List { bucket } => {
                let resp = self.send(ApiRequest::get(&format!("/storage/v1/b/{}/o", seg(&bucket))))?;
                self.emit(&resp, |c, v| {
                    let mut rows = vec![vec!["NAME".into(), "SIZE".into(), "CONTENT-TYPE".into()]];
                    for o in v["items"].as_array().into_iter().flatten() {
                        rows.push(vec![s(&o["name"]), s(&o["size"]), s(&o["content_type"])]);
                    }
                    c.line(table(&rows));
                })
            }
            ObjectsCmd::Cat { bucket, name } => {
                let resp = self.send(ApiRequest::get(&format!(
                    "/storage/v1/b/{}/o/{}",
                    seg(&bucket),
                    segs(&name)
                )))?;
                self.raw(&resp.body);
                Ok(())
            }
        }
    }

    fn instances(&mut self, cmd: InstancesCmd) -> Res {
        let project = self.project()?;
        let list_path = format!("/compute/v1/projects/{}/instances", seg(&project));
        match cmd {
            InstancesCmd::List => {
                let resp = self.send(ApiRequest::get(&list_path))?;
                self.emit(&resp, |c, v| {
                    for i in v["items"].as_array().into_iter().flatten() {
                        c.line(format!(
                            "{}  {}  {}",
                            s(&i["name"]),
                            s(&i["zone"]),
                            s(&i["attached_service_account"])
                        ));
                        if let Some(image) = i["container_image"].as_str() {
                            c.line(format!("  container image: {image}"));
                            c.line(format!("  web server: thunder instances browse {} /", s(&i["name"])));
                        }
                        for (k, val) in i["metadata"].as_object().into_iter().flatten() {
                            for l in s(val).lines() {
                                c.line(format!("  metadata {k}: {l}"));
                            }
                        }
                    }
                })
            }
            InstancesCmd::AddSshKey { instance, user, key } => {
                let public = read_text(&self.path(&key))?.trim().to_string();
                let list = parse_json(&self.send(ApiRequest::get(&list_path))?)?;
                let existing = list["items"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .find(|i| i["name"] == instance.as_str())
                    .map(|i| s(&i["metadata"]["ssh-keys"]))
                    .unwrap_or_default();
                let mut lines: Vec<String> = existing.lines().map(str::to_string).filter(|l| !l.is_empty()).collect();
                lines.push(format!("{user}:{public}"));
                let path = format!("{}/{}/setMetadata", list_path, seg(&instance));
                let resp = self
                    .send(ApiRequest::post(&path).with_json(&json!({"key": "ssh-keys", "value": lines.join("\n")})))?;
                self.emit(&resp, |c, _| {
                    c.line(format!("Added an ssh key for {user} to {instance}"))
                })
            }
            InstancesCmd::Browse {
                instance,
                path,
                params,
                headers,
            } => {
                let rest = segs(path.trim_start_matches('/'));
                let mut req = ApiRequest::get(&format!("/vm/{}/{}/{}", seg(&project), seg(&instance), rest));
                req.query.extend(pairs(&params, '=', "parameter")?);
                let req = req.with_headers(pairs(&headers, ':', "header")?);
                let resp = self.exchange(req)?;
                self.raw(&resp.body);
                Ok(())
            }
        }
    }

    fn keys_generate(&mut self, file: &Path) -> Res {
        let kp = KeyPair::generate(&mut rand::thread_rng());
        let mut public_file = file.as_os_str().to_owned();
        public_file.push(".pub");
        let public_file = PathBuf::from(public_file);
        write_private(file, format!("{}\n", kp.private_key).as_bytes())?;
        fs::write(&public_file, format!("{}\n", kp.public_key)).map_err(CliError::file(&public_file))?;
        if self.json {
            self.line(
                json!({
                    "private_key_file": file.display().to_string(),
                    "public_key_file": public_file.display().to_string(),
                    "public_key": kp.public_key,
                })
                .to_string(),
            );
        } else {
            self.line(format!("Wrote {} and {}", file.display(), public_file.display()));
        }
        Ok(())
    }

    fn ssh(&mut self, instance: &str, key: &Path, exec: Option<&str>) -> Res {
        let private_key = read_text(key)?.trim().to_string();
        let path = format!(
            "/compute/v1/projects/{}/instances/{}/ssh",
            seg(&self.project()?),
            seg(instance)
        );
        let resp = self.exchange(ApiRequest::post(&path).with_json(&json!({"private_key": private_key})))?;
        let session = parse_json(&resp)?;
        let Some(command) = exec else {
            return self.emit(&resp, |c, v| {
                c.line(format!(
                    "Session {} on {} as {}",
                    s(&v["session_id"]),
                    s(&v["instance"]),
                    s(&v["user"])
                ))
            });
        };
        let command: Vec<&str> = command.split_whitespace().collect();
        let path = format!("/compute/v1/sessions/{}/exec", seg(&s(&session["session_id"])));
        let resp = self.exchange(ApiRequest::post(&path).with_json(&json!({ "command": command })))?;
        self.emit(&resp, |c, v| {
            let output = s(&v["output"]);
            c.line(output.trim_end());
        })
    }

    fn functions(&mut self, cmd: FunctionsCmd) -> Res {
        let project = self.project()?;
        let base = format!("/functions/v1/projects/{}/functions", seg(&project));
        match cmd {
            FunctionsCmd::List => {
                let resp = self.send(ApiRequest::get(&base))?;
                self.emit(&resp, |c, v| {
                    let mut rows = vec![vec![
                        "NAME".into(),
                        "AUTH".into(),
                        "RUNTIME-ACCOUNT".into(),
                        "URL".into(),
                    ]];
                    for f in v["items"].as_array().into_iter().flatten() {
                        let auth = if f["require_auth"] == true {
                            "required"
                        } else {
                            "public"
                        };
                        rows.push(vec![s(&f["name"]), auth.into(), s(&f["runtime_account"]), s(&f["url"])]);
                    }
                    c.line(table(&rows));
                })
            }
            FunctionsCmd::Describe { name } => {
                let resp = self.send(ApiRequest::get(&format!("{base}/{}", seg(&name))))?;
                self.emit(&resp, |c, v| {
                    c.line(format!("name: {}", s(&v["name"])));
                    c.line(format!("url: {}", s(&v["url"])));
                    c.line(format!("require_auth: {}", s(&v["require_auth"])));
                    c.line(format!("runtime_account: {}", s(&v["runtime_account"])));
                    c.line("env:");
                    for (k, val) in v["env"].as_object().into_iter().flatten() {
                        c.line(format!("  {k}={}", s(val)));
                    }
                })
            }
            FunctionsCmd::Source { name } => {
                let resp = self.send(ApiRequest::get(&format!("{base}/{}/source", seg(&name))))?;
                self.raw(&resp.body);
                Ok(())
            }
            FunctionsCmd::Deploy { name, source } => {
                let text = read_text(&self.path(&source))?;
                let req = ApiRequest::put(&format!("{base}/{}/source", seg(&name)))
                    .with_header("Content-Type", "text/plain")
                    .with_body(text.into_bytes());
                let resp = self.send(req)?;
                self.emit(&resp, |c, _| c.line(format!("Deployed new source to {name}")))
            }
            FunctionsCmd::Call { name, params, id_token } => {
                let mut req = ApiRequest::get(&format!("/fn/{}/{}", seg(&project), seg(&name)));
                req.query.extend(pairs(&params, '=', "parameter")?);
                let resp = match id_token {
                    Some(t) => self.exchange(req.with_bearer(Some(&t)))?,
                    None => self.send(req)?,
                };
                self.raw(&resp.body);
                Ok(())
            }
        }
    }

    fn repo(&mut self, cmd: RepoCmd) -> Res {
        let base = format!("/repos/v1/projects/{}/repos", seg(&self.project()?));
        match cmd {
            RepoCmd::List => {
                let resp = self.send(ApiRequest::get(&base))?;
                self.emit(&resp, |c, v| {
                    for r in strings(&v["items"]) {
                        c.line(r);
                    }
                })
            }
            RepoCmd::Log { repo } => {
                let resp = self.send(ApiRequest::get(&format!("{base}/{}/commits", seg(&repo))))?;
                self.emit(&resp, |c, v| {
                    let mut rows = vec![vec!["COMMIT".into(), "PARENT".into(), "MESSAGE".into()]];
                    for cm in v["items"].as_array().into_iter().flatten() {
                        let parent = cm["parent_id"].as_str().unwrap_or("-").to_string();
                        rows.push(vec![s(&cm["commit_id"]), parent, s(&cm["message"])]);
                    }
                    c.line(table(&rows));
                })
            }
            RepoCmd::Show { repo, commit, path } => {
                let commit_path = format!("{base}/{}/commits/{}", seg(&repo), seg(&commit));
                match path {
                    Some(p) => {
                        let resp = self.send(ApiRequest::get(&format!("{commit_path}/files/{}", segs(&p))))?;
                        self.raw(&resp.body);
                        Ok(())
                    }
                    None => {
                        let resp = self.send(ApiRequest::get(&commit_path))?;
                        self.emit(&resp, |c, v| {
                            c.line(format!("commit {}", s(&v["commit_id"])));
                            if let Some(p) = v["parent_id"].as_str() {
                                c.line(format!("parent {p}"));
                            }
                            c.line(format!("\n    {}\n", s(&v["message"])));
                            for f in strings(&v["files"]) {
                                c.line(f);
                            }
                        })
                    }
                }
            }
        }
    }

    fn images(&mut self, cmd: ImagesCmd) -> Res {
        match cmd {
            ImagesCmd::List => {
                let resp = self.send(ApiRequest::get(&format!(
                    "/registry/v1/projects/{}/images",
                    seg(&self.project()?)
                )))?;
                self.emit(&resp, |c, v| {
                    for i in strings(&v["items"]) {
                        c.line(i);
                    }
                })
            }
            ImagesCmd::Pull { image, extract } => {
                let (project, name) = match image.split_once('/') {
                    Some((p, n)) => (p.to_string(), n.to_string()),
                    None => (self.project()?, image.clone()),
                };
                let resp = self.send(ApiRequest::get(&format!(
                    "/registry/v1/pull/{}/{}",
                    seg(&project),
                    seg(&name)
                )))?;
                let Some(dir) = extract.map(|d| self.path(&d)) else {
                    self.raw(&resp.body);
                    return Ok(());
                };
                let files = archive::unpack(&resp.body).map_err(|e| CliError::Api {
                    status: resp.status,
                    code: "bad_archive".into(),
                    message: e.to_string(),
                    body: Vec::new(),
                })?;
                let mut written = Vec::new();
                for (archived, bytes) in &files {
                    let target = safe_join(&dir, archived)?;
                    if let Some(parent) = target.parent() {
                        fs::create_dir_all(parent).map_err(CliError::file(parent))?;
                    }
                    fs::write(&target, bytes).map_err(CliError::file(&target))?;
                    written.push(target.display().to_string());
                }
                if self.json {
                    self.line(json!({ "files": written }).to_string());
                } else {
                    for w in written {
                        self.line(w);
                    }
                }
                Ok(())
            }
        }
    }
}

/// Writes `index.html` plus one slideshow per shipped level under `out`.
pub fn write_hint_site(out: &Path, project_id: &str) -> Result<Vec<PathBuf>, CliError> {
    let registry = LevelRegistry::shipped();
    let mut pages = Vec::new();
    let mut index = String::from(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Level hints</title>\n</head>\n<body>\n<h1>Level hints</h1>\n<ul>\n",
    );
    for level in registry.iter() {
        let dir = out.join(&level.namespace).join(&level.name);
        fs::create_dir_all(&dir).map_err(CliError::file(&dir))?;
        let page = dir.join("index.html");
        let html = level.hints.instantiate(project_id).render_slideshow();
        fs::write(&page, html).map_err(CliError::file(&page))?;
        index.push_str(&format!(
            "<li><a href=\"{}/{}/index.html\">{}</a>: {}</li>\n",
            level.namespace,
            level.name,
            thunder_core::hints::markup::escape(&level.reference()),
            thunder_core::hints::markup::escape(&level.title)
        ));
        pages.push(page);
    }
    index.push_str("</ul>\n</body>\n</html>\n");
    fs::create_dir_all(out).map_err(CliError::file(out))?;
    let index_path = out.join("index.html");
    fs::write(&index_path, index).map_err(CliError::file(&index_path))?;
    pages.push(index_path);
    Ok(pages)
}
