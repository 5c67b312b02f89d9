use std::collections::BTreeMap;

use thiserror::Error;

use super::parse::{Cond, Expr, Program, Stmt};
use super::{MAX_FETCHES, MAX_STATEMENTS};
use crate::services::logging::Severity;

/// What a handler sees of the incoming request.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Request {
    pub path: String,
    pub params: BTreeMap<String, String>,
    pub headers: Vec<(String, String)>,
}

/// The runtime a handler executes in: network reach, its own metadata
/// server and its log stream.
pub trait HandlerHost {
    /// Server-side GET. `Ok` carries the response body, whatever the status.
    fn fetch(&mut self, url: &str, headers: &[(String, String)]) -> Result<String, String>;
    /// Read from the runtime's own metadata server.
    fn metadata(&mut self, path: &str) -> Result<String, String>;
    fn log(&mut self, severity: Severity, message: &str);
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    /// Raised by `error(e)`; the message is `e`.
    #[error("{0}")]
    Raised(String),
    #[error("{0}")]
    LimitExceeded(String),
    #[error("{0}")]
    Runtime(String),
}

struct Machine<'a> {
    req: &'a Request,
    env: &'a BTreeMap<String, String>,
    host: &'a mut dyn HandlerHost,
    statements: usize,
    fetches: usize,
}

enum Flow {
    Continue,
    Respond(String),
}

/// Splits `Name: value` lines into header pairs. Blank lines are skipped.
pub fn parse_header_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|line| line.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .collect()
}

impl Machine<'_> {
    fn block(&mut self, body: &[Stmt]) -> Result<Flow, EvalError> {
        for stmt in body {
            if let Flow::Respond(r) = self.stmt(stmt)? {
                return Ok(Flow::Respond(r));
            }
        }
        Ok(Flow::Continue)
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, EvalError> {
        self.statements += 1;
        if self.statements > MAX_STATEMENTS {
            return Err(EvalError::LimitExceeded(format!(
                "more than {MAX_STATEMENTS} statements executed"
            )));
        }
        match stmt {
            Stmt::If { cond, then, otherwise } => {
                if self.cond(cond)? {
                    self.block(then)
                } else {
                    self.block(otherwise)
                }
            }
            Stmt::Respond(e) => Ok(Flow::Respond(self.expr(e)?)),
            Stmt::Error(e) => {
                let msg = self.expr(e)?;
                Err(EvalError::Raised(msg))
            }
            Stmt::Log(e) => {
                let msg = self.expr(e)?;
                self.host.log(Severity::Info, &msg);
                Ok(Flow::Continue)
            }
        }
    }

    fn cond(&mut self, c: &Cond) -> Result<bool, EvalError> {
        let equal = self.expr(&c.lhs)? == self.expr(&c.rhs)?;
        Ok(equal != c.negated)
    }

    fn count_fetch(&mut self) -> Result<(), EvalError> {
        self.fetches += 1;
        if self.fetches > MAX_FETCHES {
            return Err(EvalError::LimitExceeded(format!("more than {MAX_FETCHES} fetches")));
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<String, EvalError> {
        Ok(match e {
            Expr::Str(s) => s.clone(),
            Expr::Env(k) => {
                let k = self.expr(k)?;
                self.env.get(&k).cloned().unwrap_or_default()
            }
            Expr::Param(k) => {
                let k = self.expr(k)?;
                self.req.params.get(&k).cloned().unwrap_or_default()
            }
            Expr::Header(k) => {
                let k = self.expr(k)?;
                self.req
                    .headers
                    .iter()
                    .find(|(name, _)| name.eq_ignore_ascii_case(&k))
                    .map(|(name, v)| format!("{name}: {v}"))
                    .unwrap_or_default()
            }
            Expr::Path => self.req.path.clone(),
            Expr::Metadata(p) => {
                let p = self.expr(p)?;
                self.count_fetch()?;
                self.host.metadata(&p).map_err(EvalError::Runtime)?
            }
            Expr::Fetch(url, headers) => {
                let url = self.expr(url)?;
                let headers = parse_header_lines(&self.expr(headers)?);
                self.count_fetch()?;
                self.host.fetch(&url, &headers).map_err(EvalError::Runtime)?
            }
            Expr::Concat(parts) => {
                let mut out = String::new();
                for p in parts {
                    out.push_str(&self.expr(p)?);
                }
                out
            }
        })
    }
}

/// Runs a parsed handler. Returns the response body (empty when the handler
/// finishes without `respond`). Every failure is also written to the host's
/// log at ERROR severity.
pub fn run(
    program: &Program,
    req: &Request,
    env: &BTreeMap<String, String>,
    host: &mut dyn HandlerHost,
) -> Result<String, EvalError> {
    let mut m = Machine {
        req,
        env,
        host,
        statements: 0,
        fetches: 0,
    };
    let result = m.block(&program.body);
    match result {
        Ok(Flow::Respond(body)) => Ok(body),
        Ok(Flow::Continue) => Ok(String::new()),
        Err(e) => {
            let line = match &e {
                EvalError::Raised(msg) => msg.clone(),
                EvalError::LimitExceeded(msg) => format!("execution limit exceeded: {msg}"),
                EvalError::Runtime(msg) => format!("runtime error: {msg}"),
            };
            m.host.log(Severity::Error, &line);
            Err(e)
        }
    }
}
