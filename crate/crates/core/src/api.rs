//! The REST surface over the emulator, transport-independent.
//!
//! [`route`] maps an [`ApiRequest`] onto an emulator operation and its
//! result onto an [`ApiResponse`]. [`Platform`] adds the `/ctf/v1` endpoints
//! (levels, validation, hints). The HTTP server and the CLI's in-process
//! transport both go through [`Platform::handle`].
//!
//! Errors use the body `{"error":{"code":..,"message":..}}`. A gated
//! operation that is denied answers 401 when the caller sent no usable
//! access token and 403 when an authenticated caller lacks the permission.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::deploy::DeployError;
use crate::emulator::Emulator;
use crate::handler::Request;
use crate::hints::HintError;
use crate::iam::{Binding, Caller, IamError, TokenKind};
use crate::levels::{LevelError, LevelRegistry};
use crate::progress::Verdict;
use crate::services::metadata::MetadataContext;
use crate::services::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ApiRequest {
    pub method: String,
    /// Percent-encoded path, without the query.
    pub path: String,
    pub query: BTreeMap<String, String>,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

fn split_query(path_and_query: &str) -> (String, BTreeMap<String, String>) {
    let (path, query) = path_and_query.split_once('?').unwrap_or((path_and_query, ""));
    let query = url::form_urlencoded::parse(query.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    (path.to_string(), query)
}

impl ApiRequest {
    pub fn new(method: &str, path_and_query: &str) -> ApiRequest {
        let (path, query) = split_query(path_and_query);
        ApiRequest {
            method: method.to_ascii_uppercase(),
            path,
            query,
            headers: Vec::new(),
            body: Vec::new(),
        }
    }

    pub fn get(path_and_query: &str) -> ApiRequest {
        ApiRequest::new("GET", path_and_query)
    }

    pub fn post(path_and_query: &str) -> ApiRequest {
        ApiRequest::new("POST", path_and_query)
    }

    pub fn put(path_and_query: &str) -> ApiRequest {
        ApiRequest::new("PUT", path_and_query)
    }

    pub fn with_headers(mut self, headers: Vec<(String, String)>) -> ApiRequest {
        self.headers.extend(headers);
        self
    }

    pub fn with_header(mut self, name: &str, value: &str) -> ApiRequest {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn with_bearer(self, token: Option<&str>) -> ApiRequest {
        match token {
            Some(t) => self.with_header("Authorization", &format!("Bearer {t}")),
            None => self,
        }
    }

    pub fn with_body(mut self, body: Vec<u8>) -> ApiRequest {
        self.body = body;
        self
    }

    pub fn with_json(self, value: &serde_json::Value) -> ApiRequest {
        self.with_header("Content-Type", "application/json")
            .with_body(value.to_string().into_bytes())
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// The token from `Authorization: Bearer <token>`, if present.
    pub fn bearer(&self) -> Option<&str> {
        let value = self.header("Authorization")?.trim();
        let (scheme, token) = value.split_once(' ')?;
        scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
    }

    fn segments(&self) -> Vec<String> {
        self.path
            .split('/')
            .filter(|s| !s.is_empty())
            .map(|s| percent_encoding::percent_decode_str(s).decode_utf8_lossy().into_owned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

pub const JSON: &str = "application/json";
pub const TEXT: &str = "text/plain; charset=utf-8";
pub const OCTETS: &str = "application/octet-stream";

impl ApiResponse {
    pub fn json<T: Serialize>(value: &T) -> ApiResponse {
        ApiResponse {
            status: 200,
            content_type: JSON.into(),
            body: serde_json::to_vec(value).expect("response serializes"),
        }
    }

    pub fn text(body: impl Into<String>) -> ApiResponse {
        ApiResponse {
            status: 200,
            content_type: TEXT.into(),
            body: body.into().into_bytes(),
        }
    }

    pub fn bytes(body: Vec<u8>, content_type: &str) -> ApiResponse {
        ApiResponse {
            status: 200,
            content_type: content_type.into(),
            body,
        }
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    /// The error code of an error response.
    pub fn error_code(&self) -> Option<String> {
        let v: serde_json::Value = serde_json::from_slice(&self.body).ok()?;
        v["error"]["code"].as_str().map(str::to_string)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(400, "invalid_argument", message)
    }

    fn route_not_found(req: &ApiRequest) -> ApiError {
        ApiError::new(
            404,
            "route_not_found",
            format!("no route for {} {}", req.method, req.path),
        )
    }

    pub fn body(&self) -> String {
        json!({"error": {"code": self.code, "message": self.message}}).to_string()
    }

    pub fn into_response(self) -> ApiResponse {
        ApiResponse {
            status: self.status,
            content_type: JSON.into(),
            body: self.body().into_bytes(),
        }
    }
}

impl From<IamError> for ApiError {
    fn from(e: IamError) -> ApiError {
        let msg = e.to_string();
        match e {
            IamError::PermissionDenied(_) => ApiError::new(403, "permission_denied", msg),
            IamError::InvalidToken => ApiError::new(401, "invalid_token", msg),
            IamError::UnknownAccount | IamError::BadKey => ApiError::new(401, "invalid_credentials", msg),
            IamError::StaleEtag { .. } => ApiError::new(409, "stale_etag", msg),
            IamError::DuplicateProject(_) | IamError::DuplicateAccount(_) => ApiError::new(409, "already_exists", msg),
            IamError::UnknownProject(_) => ApiError::new(404, "not_found", msg),
            IamError::UnknownRole(_) => ApiError::new(400, "unknown_role", msg),
            IamError::UnknownMember(_) => ApiError::new(400, "unknown_member", msg),
            IamError::MissingAudience
            | IamError::MalformedProjectId(_)
            | IamError::MalformedAccountName(_)
            | IamError::Catalog(_) => ApiError::new(400, "invalid_argument", msg),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> ApiError {
        let msg = e.to_string();
        match e {
            ServiceError::Iam(e) => e.into(),
            ServiceError::NotFound(_) => ApiError::new(404, "not_found", msg),
            ServiceError::AlreadyExists(_) => ApiError::new(409, "already_exists", msg),
            ServiceError::UnknownInstance(_) => ApiError::new(404, "unknown_instance", msg),
            ServiceError::KeyRejected => ApiError::new(403, "key_rejected", msg),
            ServiceError::AuthRequired => ApiError::new(401, "auth_required", msg),
            ServiceError::Parse(_) => ApiError::new(400, "parse_error", msg),
            ServiceError::Handler => ApiError::new(400, "handler_error", msg),
            ServiceError::LimitExceeded(_) => ApiError::new(400, "limit_exceeded", msg),
            ServiceError::MissingHeader(_) => ApiError::new(400, "missing_header", msg),
            ServiceError::UnknownPath(_) => ApiError::new(404, "unknown_path", msg),
            ServiceError::UnknownCommit(_) => ApiError::new(404, "unknown_commit", msg),
            ServiceError::PathNotInCommit(_) => ApiError::new(404, "path_not_in_commit", msg),
            ServiceError::UnknownImage(_) => ApiError::new(404, "unknown_image", msg),
            ServiceError::InvalidArgument(_) => ApiError::new(400, "invalid_argument", msg),
        }
    }
}

impl From<DeployError> for ApiError {
    fn from(e: DeployError) -> ApiError {
        let msg = e.to_string();
        match e {
            DeployError::ActiveDeploymentExists(_) => ApiError::new(409, "deployment_active", msg),
            DeployError::NotActive => ApiError::new(409, "not_active", msg),
            DeployError::UnknownProject(_) => ApiError::new(404, "not_found", msg),
            DeployError::ResourceCreate { .. } => ApiError::new(400, "resource_create_failed", msg),
            DeployError::UnknownPlaceholder(_)
            | DeployError::TemplateSyntax { .. }
            | DeployError::Yaml(_)
            | DeployError::Validation(_) => ApiError::new(400, "invalid_config", msg),
        }
    }
}

impl From<LevelError> for ApiError {
    fn from(e: LevelError) -> ApiError {
        let msg = e.to_string();
        match e {
            LevelError::UnknownLevel(_) => ApiError::new(404, "unknown_level", msg),
            LevelError::DuplicateLevel(_) => ApiError::new(409, "already_exists", msg),
            LevelError::BadLevel { .. } => ApiError::new(400, "invalid_level", msg),
            LevelError::Deploy(e) => e.into(),
            LevelError::Hints(e) => e.into(),
        }
    }
}

impl From<HintError> for ApiError {
    fn from(e: HintError) -> ApiError {
        let msg = e.to_string();
        match e {
            HintError::AlreadyAtEnd(_) => ApiError::new(409, "already_at_end", msg),
            HintError::UnknownProject(_) => ApiError::new(404, "not_found", msg),
            HintError::Parse(_) | HintError::BadHint { .. } => ApiError::new(400, "invalid_hints", msg),
        }
    }
}

type ApiResult = Result<ApiResponse, ApiError>;

fn json_body<T: DeserializeOwned>(req: &ApiRequest) -> Result<T, ApiError> {
    let body: &[u8] = if req.body.is_empty() { b"{}" } else { &req.body };
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

fn query<'a>(req: &'a ApiRequest, key: &str) -> Result<&'a str, ApiError> {
    req.query
        .get(key)
        .map(String::as_str)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ApiError::bad_request(format!("query parameter `{key}` is required")))
}

/// List responses carry at most this many items.
pub const ITEM_CAP: usize = 1000;

fn items<T: Serialize>(mut items: Vec<T>) -> ApiResponse {
    items.truncate(ITEM_CAP);
    ApiResponse::json(&json!({ "items": items }))
}

#[derive(Deserialize)]
struct KeyLogin {
    client_email: String,
    private_key: String,
}

#[derive(Deserialize)]
struct AudienceBody {
    audience: String,
}

#[derive(Deserialize)]
struct PermissionsBody {
    #[serde(default)]
    permissions: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct PolicyBody {
    bindings: Vec<Binding>,
    etag: String,
}

#[derive(Deserialize)]
struct MetadataBody {
    key: String,
    value: String,
}

#[derive(Deserialize)]
struct SshBody {
    private_key: String,
}

#[derive(Deserialize)]
struct ExecBody {
    command: Vec<String>,
}

fn token_json(emu: &Emulator, token: &crate::iam::AccessToken) -> serde_json::Value {
    json!({
        "access_token": token.token_id,
        "token_type": "Bearer",
        "expires_in": token.expires_in_secs(emu.now()),
    })
}

fn handler_request(req: &ApiRequest, path: String) -> Result<Request, ApiError> {
    let mut params: BTreeMap<String, String> = req.query.clone();
    if !req.body.is_empty() {
        let body: BTreeMap<String, String> = serde_json::from_slice(&req.body)
            .map_err(|e| ApiError::bad_request(format!("request body must be a JSON object of strings: {e}")))?;
        params.extend(body);
    }
    Ok(Request {
        path,
        params,
        headers: req
            .headers
            .iter()
            .filter(|(k, _)| !k.eq_ignore_ascii_case("authorization"))
            .cloned()
            .collect(),
    })
}

/// Runs a session command on the instance: `token` or `metadata <path>`.
fn session_exec(emu: &mut Emulator, session_id: &str, command: &[String]) -> ApiResult {
    let session = emu
        .session(session_id)
        .cloned()
        .ok_or_else(|| ApiError::new(404, "not_found", "session not found"))?;
    match command {
        [c] if c == "token" => {
            let token = emu.session_token(session_id)?;
            Ok(ApiResponse::json(&json!({ "output": token.token_id })))
        }
        [c, path] if c == "metadata" => {
            let ctx = MetadataContext::Instance {
                project_id: session.project_id.clone(),
                instance: session.instance.clone(),
            };
            let headers = vec![
                (
                    crate::services::metadata::FLAVOR_HEADER.to_string(),
                    crate::services::metadata::FLAVOR_VALUE.to_string(),
                ),
                (
                    crate::services::metadata::STRICT_HEADER.to_string(),
                    crate::services::metadata::STRICT_VALUE.to_string(),
                ),
            ];
            let output = emu.metadata_get(&ctx, path, &headers)?;
            Ok(ApiResponse::json(&json!({ "output": output })))
        }
        _ => Err(ApiError::bad_request("supported commands: `token`, `metadata <path>`")),
    }
}

fn dispatch(emu: &mut Emulator, req: &ApiRequest) -> ApiResult {
    let token = req.bearer();
    let seg = req.segments();
    let s: Vec<&str> = seg.iter().map(String::as_str).collect();
    let method = req.method.as_str();
    match (method, s.as_slice()) {
        // IAM
        ("POST", ["iam", "v1", "token"]) => {
            let b: KeyLogin = json_body(req)?;
            let t = emu.mint_access_token(&b.client_email, &b.private_key)?;
            Ok(ApiResponse::json(&token_json(emu, &t)))
        }
        ("GET", ["iam", "v1", "tokeninfo"]) => match emu.resolve(token) {
            Caller::Principal(t) => Ok(ApiResponse::json(&json!({
                "principal": t.principal,
                "project_id": t.project_id,
                "kind": t.kind,
                "audience": t.audience,
                "expires_in": t.expires_in_secs(emu.now()),
            }))),
            _ => Err(IamError::InvalidToken.into()),
        },
        ("POST", ["iam", "v1", "identity-token"]) => {
            let b: AudienceBody = json_body(req)?;
            let t = emu.mint_identity_token(token.unwrap_or(""), &b.audience)?;
            Ok(ApiResponse::json(
                &json!({ "token": t.token_id, "audience": t.audience }),
            ))
        }
        ("GET", ["iam", "v1", "roles"]) => Ok(items(emu.catalog().roles().cloned().collect())),
        ("POST", ["iam", "v1", "projects", p, "testIamPermissions"]) => {
            let b: PermissionsBody = json_body(req)?;
            let wanted = b.permissions.unwrap_or_else(|| emu.catalog().all_permissions());
            let held = emu.test_iam_permissions(token, Some(p), &wanted);
            Ok(ApiResponse::json(&json!({ "permissions": held })))
        }
        ("GET", ["iam", "v1", "projects", p, "policy"]) => Ok(ApiResponse::json(&emu.get_iam_policy(token, p)?)),
        ("PUT", ["iam", "v1", "projects", p, "policy"]) => {
            let b: PolicyBody = json_body(req)?;
            Ok(ApiResponse::json(&emu.set_iam_policy(token, p, b.bindings, &b.etag)?))
        }

        // Storage
        ("GET", ["storage", "v1", "b"]) => Ok(items(emu.buckets_list(token, query(req, "project")?)?)),
        ("GET", ["storage", "v1", "b", b, "o"]) => Ok(items(emu.objects_list(token, b)?)),
        ("GET", ["storage", "v1", "b", b, "o", name @ ..]) if !name.is_empty() => {
            let obj = emu.object_get(token, b, &name.join("/"))?;
            Ok(ApiResponse::bytes(obj.content, &obj.content_type))
        }
        ("PUT", ["storage", "v1", "b", b, "o", name @ ..]) if !name.is_empty() => {
            let ct = req.header("Content-Type").unwrap_or(OCTETS);
            emu.object_put(token, b, &name.join("/"), req.body.clone(), ct)?;
            Ok(ApiResponse::json(&json!({ "bucket": b, "name": name.join("/") })))
        }

        // Compute
        ("GET", ["compute", "v1", "projects", p, "instances"]) => Ok(items(emu.instances_list(token, p)?)),
        ("POST", ["compute", "v1", "projects", p, "instances", i, "setMetadata"]) => {
            let b: MetadataBody = json_body(req)?;
            emu.instance_set_metadata(token, p, i, &b.key, &b.value)?;
            Ok(ApiResponse::json(&json!({ "instance": i, "key": b.key })))
        }
        ("POST", ["compute", "v1", "projects", p, "instances", i, "ssh"]) => {
            let b: SshBody = json_body(req)?;
            Ok(ApiResponse::json(&emu.ssh_connect(p, i, &b.private_key)?))
        }
        ("POST", ["compute", "v1", "sessions", sid, "exec"]) => {
            let b: ExecBody = json_body(req)?;
            session_exec(emu, sid, &b.command)
        }
        ("GET" | "POST", ["vm", p, i, rest @ ..]) => {
            let path = format!("/{}", rest.join("/"));
            let r = handler_request(req, path)?;
            Ok(ApiResponse::text(emu.instance_http(p, i, &r)?))
        }

        // Logging
        ("GET", ["logging", "v1", "projects", p, "entries"]) => {
            let logger = req.query.get("logger").map(String::as_str).filter(|l| !l.is_empty());
            Ok(ApiResponse::json(
                &json!({ "entries": emu.logs_list(token, p, logger)? }),
            ))
        }

        // Functions
        ("GET", ["functions", "v1", "projects", p, "functions"]) => Ok(items(emu.functions_list(token, p)?)),
        ("GET", ["functions", "v1", "projects", p, "functions", f]) => {
            Ok(ApiResponse::json(&emu.function_get(token, p, f)?))
        }
        ("GET", ["functions", "v1", "projects", p, "functions", f, "source"]) => {
            Ok(ApiResponse::text(emu.function_source_get(token, p, f)?))
        }
        ("PUT", ["functions", "v1", "projects", p, "functions", f, "source"]) => {
            let source =
                String::from_utf8(req.body.clone()).map_err(|_| ApiError::bad_request("source must be UTF-8"))?;
            emu.function_update(token, p, f, &source)?;
            Ok(ApiResponse::json(&json!({ "name": f, "updated": true })))
        }
        ("GET" | "POST", ["fn", p, f]) => {
            let r = handler_request(req, "/".into())?;
            Ok(ApiResponse::text(emu.function_invoke(token, p, f, &r)?))
        }

        // Source repositories
        ("GET", ["repos", "v1", "projects", p, "repos"]) => Ok(items(emu.repos_list(token, p)?)),
        ("GET", ["repos", "v1", "projects", p, "repos", r, "commits"]) => Ok(items(emu.repo_log(token, p, r)?)),
        ("GET", ["repos", "v1", "projects", p, "repos", r, "commits", c]) => {
            Ok(ApiResponse::json(&emu.repo_commit(token, p, r, c)?))
        }
        ("GET", ["repos", "v1", "projects", p, "repos", r, "commits", c, "files", path @ ..]) if !path.is_empty() => {
            Ok(ApiResponse::bytes(
                emu.repo_show(token, p, r, c, &path.join("/"))?,
                OCTETS,
            ))
        }

        // Container registry
        ("GET", ["registry", "v1", "projects", p, "images"]) => Ok(items(emu.images_list(token, p)?)),
        ("GET", ["registry", "v1", "pull", p, image]) => Ok(ApiResponse::bytes(
            emu.image_pull(token, &format!("{p}/{image}"))?,
            OCTETS,
        )),

        _ => Err(ApiError::route_not_found(req)),
    }
}

/// Rewrites a denial for callers without a usable access token.
fn refine_denial(emu: &Emulator, req: &ApiRequest, e: ApiError) -> ApiError {
    if e.code != "permission_denied" {
        return e;
    }
    match emu.resolve(req.bearer()) {
        Caller::Anonymous => ApiError::new(401, "unauthenticated", e.message),
        Caller::Invalid => ApiError::new(401, "invalid_token", e.message),
        Caller::Principal(t) if t.kind != TokenKind::Access => ApiError::new(401, "invalid_token", e.message),
        Caller::Principal(_) => e,
    }
}

/// Serves one request against the emulated cloud (everything but `/ctf/v1`).
pub fn route(emu: &mut Emulator, req: &ApiRequest) -> ApiResponse {
    match dispatch(emu, req) {
        Ok(resp) => resp,
        Err(e) => refine_denial(emu, req, e).into_response(),
    }
}

/// The emulator plus the level registry: the whole server.
#[derive(Debug, Clone)]
pub struct Platform {
    pub emulator: Emulator,
    pub levels: LevelRegistry,
}

#[derive(Deserialize)]
struct CreateBody {
    level: String,
    project_id: String,
}

#[derive(Deserialize)]
struct ValidateBody {
    level: String,
    project_id: String,
    flag: String,
}

#[derive(Deserialize)]
struct RevealBody {
    level: String,
    #[serde(default)]
    project_id: Option<String>,
}

impl Platform {
    pub fn new(emulator: Emulator, levels: LevelRegistry) -> Platform {
        Platform { emulator, levels }
    }

    pub fn handle(&mut self, req: &ApiRequest) -> ApiResponse {
        let seg = req.segments();
        if seg.first().map(String::as_str) == Some("ctf") {
            return self.ctf(req, &seg).unwrap_or_else(ApiError::into_response);
        }
        route(&mut self.emulator, req)
    }

    /// The project a hint request is about: explicit, or the active one.
    fn hint_project(&self, given: Option<&str>) -> Result<String, ApiError> {
        match given.filter(|p| !p.is_empty()) {
            Some(p) => Ok(p.to_string()),
            None => self
                .emulator
                .active_deployment()
                .map(|d| d.project_id.clone())
                .ok_or_else(|| ApiError::bad_request("`project` is required when no level is active")),
        }
    }

    fn hints_view(&self, level_ref: &str, project_id: &str) -> ApiResult {
        let level = self.levels.get(level_ref)?;
        if self.emulator.project(project_id).is_none() {
            return Err(HintError::UnknownProject(project_id.to_string()).into());
        }
        let revealed = self.emulator.hints_revealed(project_id, level_ref);
        let deck = level.hints.instantiate(project_id);
        Ok(ApiResponse::json(&json!({
            "level": level_ref,
            "project_id": project_id,
            "total": deck.len(),
            "revealed": revealed,
            "hints": deck.views(revealed),
        })))
    }

    fn ctf(&mut self, req: &ApiRequest, seg: &[String]) -> ApiResult {
        let s: Vec<&str> = seg.iter().map(String::as_str).collect();
        match (req.method.as_str(), s.as_slice()) {
            ("GET", ["ctf", "v1", "levels"]) => {
                let ns = req.query.get("namespace").map(String::as_str);
                let levels: Vec<_> = self
                    .levels
                    .iter()
                    .filter(|l| ns.is_none_or(|n| l.namespace == n))
                    .map(|l| l.summary())
                    .collect();
                Ok(ApiResponse::json(&json!({ "levels": levels })))
            }
            ("GET", ["ctf", "v1", "levels", ns, name]) => {
                let level = self.levels.get(&format!("{ns}/{name}"))?;
                Ok(ApiResponse::json(&json!({
                    "level": level.reference(),
                    "title": level.title,
                    "intro": level.intro,
                    "writeup": level.writeup,
                    "hints": level.hints.len(),
                })))
            }
            ("POST", ["ctf", "v1", "create"]) => {
                let b: CreateBody = json_body(req)?;
                let level = self.levels.get(&b.level)?.clone();
                let fresh = self.emulator.project(&b.project_id).is_none();
                if fresh {
                    self.emulator.create_project(&b.project_id, &b.project_id)?;
                }
                match self.emulator.create_level(&level, &b.project_id, None) {
                    Ok(info) => Ok(ApiResponse::json(&info)),
                    Err(e) => {
                        if fresh {
                            self.emulator.projects.remove(&b.project_id);
                        }
                        Err(e.into())
                    }
                }
            }
            ("POST", ["ctf", "v1", "destroy"]) => {
                let record = self.emulator.destroy_level()?;
                Ok(ApiResponse::json(&json!({
                    "level": record.level_name,
                    "project_id": record.project_id,
                    "status": record.status,
                })))
            }
            ("GET", ["ctf", "v1", "active"]) => match self.emulator.active_deployment() {
                Some(d) => Ok(ApiResponse::json(&json!({
                    "level": d.level_name,
                    "project_id": d.project_id,
                    "status": d.status,
                }))),
                None => Err(ApiError::new(404, "not_active", "no active deployment")),
            },
            ("POST", ["ctf", "v1", "validate"]) => {
                let b: ValidateBody = json_body(req)?;
                let level = self.levels.get(&b.level)?.clone();
                let verdict = self.emulator.validate_flag(&level, &b.project_id, &b.flag);
                let result = match verdict {
                    Verdict::Correct => "correct",
                    Verdict::Incorrect => "incorrect",
                };
                Ok(ApiResponse::json(&json!({ "result": result })))
            }
            ("GET", ["ctf", "v1", "hints"]) => {
                let level_ref = query(req, "level")?.to_string();
                let project = self.hint_project(req.query.get("project").map(String::as_str))?;
                self.hints_view(&level_ref, &project)
            }
            ("POST", ["ctf", "v1", "hints", "reveal"]) => {
                let b: RevealBody = json_body(req)?;
                let project = self.hint_project(b.project_id.as_deref())?;
                let total = self.levels.get(&b.level)?.hints.len();
                self.emulator.reveal_next_hint(&project, &b.level, total)?;
                self.hints_view(&b.level, &project)
            }
            ("GET", ["ctf", "v1", "progress"]) => {
                let project = query(req, "project")?;
                let state = self
                    .emulator
                    .project_state(project)
                    .ok_or_else(|| ApiError::new(404, "not_found", format!("unknown project `{project}`")))?;
                let levels: BTreeMap<_, _> = state
                    .progress
                    .levels
                    .iter()
                    .map(|(k, v)| {
                        (
                            k.clone(),
                            json!({
                                "hints_revealed": v.hints_revealed,
                                "submissions": v.submissions,
                                "solved": v.solved(),
                            }),
                        )
                    })
                    .collect();
                Ok(ApiResponse::json(&json!({ "project_id": project, "levels": levels })))
            }
            _ => Err(ApiError::route_not_found(req)),
        }
    }
}
