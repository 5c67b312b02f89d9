//! How the CLI reaches the API: over HTTP, or in-process against a shared
//! [`Platform`].

use std::sync::{Arc, Mutex};
use std::time::Duration;

use thunder_core::{ApiRequest, ApiResponse, Platform};

use crate::error::CliError;

pub trait Transport {
    fn send(&self, req: &ApiRequest) -> Result<ApiResponse, CliError>;
}

#[derive(Clone, Default)]
pub enum Connector {
    #[default]
    Http,
    Local(Arc<Mutex<Platform>>),
}

impl Connector {
    pub fn connect(&self, addr: &str) -> Box<dyn Transport> {
        match self {
            Connector::Http => Box::new(HttpTransport::new(addr)),
            Connector::Local(p) => Box::new(LocalTransport(p.clone())),
        }
    }
}

pub struct LocalTransport(pub Arc<Mutex<Platform>>);

impl Transport for LocalTransport {
    fn send(&self, req: &ApiRequest) -> Result<ApiResponse, CliError> {
        let mut platform = self.0.lock().unwrap_or_else(|e| e.into_inner());
        Ok(platform.handle(req))
    }
}

pub struct HttpTransport {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(addr: &str) -> HttpTransport {
        let base = if addr.contains("://") {
            addr.trim_end_matches('/').to_string()
        } else {
            format!("http://{addr}")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .expect("http client builds");
        HttpTransport { base, client }
    }

    fn url(&self, req: &ApiRequest) -> String {
        let mut url = format!("{}{}", self.base, req.path);
        if !req.query.is_empty() {
            let q = url::form_urlencoded::Serializer::new(String::new())
                .extend_pairs(req.query.iter())
                .finish();
            url.push('?');
            url.push_str(&q);
        }
        url
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &ApiRequest) -> Result<ApiResponse, CliError> {
        let connect = |e: reqwest::Error| CliError::Connect {
            addr: self.base.clone(),
            reason: e.to_string(),
        };
        let method = reqwest::Method::from_bytes(req.method.as_bytes())
            .map_err(|_| CliError::Usage(format!("bad method `{}`", req.method)))?;
        let mut builder = self.client.request(method, self.url(req));
        for (k, v) in &req.headers {
            builder = builder.header(k, v);
        }
        let resp = builder.body(req.body.clone()).send().map_err(connect)?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or(thunder_core::api::OCTETS)
            .to_string();
        let body = resp.bytes().map_err(connect)?.to_vec();
        Ok(ApiResponse {
            status,
            content_type,
            body,
        })
    }
}
