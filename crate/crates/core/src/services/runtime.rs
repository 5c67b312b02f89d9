//! The environment handler code runs in: network reach for `fetch`, the
//! runtime's own metadata server and its log stream.
//!
//! `fetch` can reach the API base (relative `/...` paths or an API host
//! name) and the metadata server of the runtime it runs in. The handler
//! entry points `/fn/`, `/vm/` and `/ctf/` are not reachable, which rules
//! out recursion. Every other URL fails.

use url::Url;

use super::metadata::{MetadataContext, FLAVOR_HEADER, FLAVOR_VALUE, METADATA_HOSTS, STRICT_HEADER, STRICT_VALUE};
use super::registry::HANDLER_PATH;
use super::{ServiceError, ServiceResult};
use crate::api::{self, ApiRequest};
use crate::emulator::Emulator;
use crate::handler::{self, HandlerHost, Request};
use crate::services::functions::eval_to_service;
use crate::services::logging::Severity;

pub const INTERNAL_API_HOST: &str = "api.emucloud.internal";
const UNREACHABLE_PREFIXES: &[&str] = &["/fn/", "/vm/", "/ctf/"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchTarget {
    /// Path and query on the API base.
    Api(String),
    /// Path and query on the caller's metadata server.
    Metadata(String),
    Blocked(String),
}

fn path_and_query(u: &Url) -> String {
    match u.query() {
        Some(q) => format!("{}?{q}", u.path()),
        None => u.path().to_string(),
    }
}

/// Decides where a handler `fetch` of `url` goes.
pub fn fetch_target(url: &str, api_hosts: &[String]) -> FetchTarget {
    let blocked = |why: String| FetchTarget::Blocked(why);
    let base = Url::parse(&format!("http://{INTERNAL_API_HOST}/")).expect("static url");
    let parsed = if url.starts_with('/') && !url.starts_with("//") {
        base.join(url)
    } else {
        Url::parse(url)
    };
    let u = match parsed {
        Ok(u) => u,
        Err(e) => return blocked(format!("malformed url `{url}`: {e}")),
    };
    if !matches!(u.scheme(), "http" | "https") {
        return blocked(format!("scheme `{}` is not supported", u.scheme()));
    }
    if !u.username().is_empty() || u.password().is_some() {
        return blocked("urls with credentials are not supported".into());
    }
    let Some(host) = u.host_str() else {
        return blocked(format!("url `{url}` has no host"));
    };
    let authority = match u.port() {
        Some(p) => format!("{host}:{p}"),
        None => host.to_string(),
    };
    if METADATA_HOSTS.contains(&host) && u.port().is_none() {
        return FetchTarget::Metadata(path_and_query(&u));
    }
    let is_api = authority == INTERNAL_API_HOST || api_hosts.contains(&authority);
    if !is_api {
        return blocked(format!("host `{authority}` is not reachable from the emulator network"));
    }
    let pq = path_and_query(&u);
    if UNREACHABLE_PREFIXES.iter().any(|p| pq.starts_with(p)) {
        return blocked(format!("`{}` cannot be fetched from a handler", u.path()));
    }
    FetchTarget::Api(pq)
}

pub struct RuntimeHost<'a> {
    emu: &'a mut Emulator,
    ctx: MetadataContext,
    logger: String,
}

impl<'a> RuntimeHost<'a> {
    pub fn new(emu: &'a mut Emulator, ctx: MetadataContext, logger: &str) -> Self {
        RuntimeHost {
            emu,
            ctx,
            logger: logger.to_string(),
        }
    }
}

impl HandlerHost for RuntimeHost<'_> {
    fn fetch(&mut self, url: &str, headers: &[(String, String)]) -> Result<String, String> {
        match fetch_target(url, &self.emu.settings.api_hosts) {
            FetchTarget::Api(pq) => {
                let req = ApiRequest::get(&pq).with_headers(headers.to_vec());
                let resp = api::route(self.emu, &req);
                Ok(String::from_utf8_lossy(&resp.body).into_owned())
            }
            FetchTarget::Metadata(pq) => Ok(match self.emu.metadata_get(&self.ctx, &pq, headers) {
                Ok(v) => v,
                Err(e) => api::ApiError::from(e).body(),
            }),
            FetchTarget::Blocked(why) => Err(why),
        }
    }

    fn metadata(&mut self, path: &str) -> Result<String, String> {
        let headers = [
            (FLAVOR_HEADER.to_string(), FLAVOR_VALUE.to_string()),
            (STRICT_HEADER.to_string(), STRICT_VALUE.to_string()),
        ];
        self.emu
            .metadata_get(&self.ctx, path, &headers)
            .map_err(|e| e.to_string())
    }

    fn log(&mut self, severity: Severity, message: &str) {
        let project = self.ctx.project_id().to_string();
        self.emu.append_log(&project, severity, &self.logger, message);
    }
}

impl Emulator {
    /// Serves an HTTP request on an instance running a container image.
    /// The image's handler runs with the instance as its runtime.
    pub fn instance_http(&mut self, project_id: &str, instance: &str, request: &Request) -> ServiceResult<String> {
        let inst = self
            .instance(project_id, instance)
            .ok_or_else(|| ServiceError::UnknownInstance(instance.to_string()))?;
        let image = inst
            .container_image
            .clone()
            .ok_or_else(|| ServiceError::NotFound(format!("web server on `{instance}`")))?;
        let source = self
            .image(&image)
            .and_then(|img| img.files.get(HANDLER_PATH))
            .ok_or_else(|| ServiceError::UnknownImage(image.clone()))?;
        let source = String::from_utf8_lossy(source).into_owned();
        let program = handler::parse(&source)?;
        let ctx = MetadataContext::Instance {
            project_id: project_id.to_string(),
            instance: instance.to_string(),
        };
        let env = Default::default();
        let mut host = RuntimeHost::new(self, ctx, instance);
        handler::run(&program, request, &env, &mut host).map_err(eval_to_service)
    }
}
