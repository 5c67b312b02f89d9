//! The handler language shared by functions and container web apps.
//!
//! ```text
//! program   = { stmt | ";" } ;
//! stmt      = if_stmt | action ;
//! if_stmt   = "if" cond block [ "else" ( block | if_stmt ) ] ;
//! block     = "{" { stmt | ";" } "}" ;
//! action    = ( "respond" | "error" | "log" ) "(" expr ")" ;
//! cond      = expr ( "==" | "!=" ) expr ;
//! expr      = term { "+" term } ;
//! term      = string | "(" expr ")" | call ;
//! call      = ( "env" | "param" | "header" | "metadata" ) "(" expr ")"
//!           | "path" "(" ")"
//!           | "fetch" "(" expr "," expr ")" ;
//! string    = '"' { char | "\" ( '"' | "\" | "n" | "t" ) } '"' ;
//! comment   = "#" { any char except newline } ;
//! ```
//!
//! All values are strings. `header("H")` evaluates to the line `H: value`
//! (empty when absent), so it can be passed straight to `fetch`, whose
//! second argument is newline-separated `Name: value` lines. `metadata(p)`
//! reads the runtime's own metadata server. `respond` ends execution with a
//! body, `error` ends it with a logged ERROR entry, `log` appends an INFO
//! entry.
//!
//! Limits: at most [`MAX_STATEMENTS`] executed statements and
//! [`MAX_FETCHES`] calls to `fetch` or `metadata` per run (exceeding either
//! is a `LimitExceeded` error), nesting of blocks and calls at most
//! [`MAX_NESTING`] deep and sources at most [`MAX_SOURCE_BYTES`] long (both
//! parse errors).

mod eval;
mod parse;

pub use eval::{parse_header_lines, run, EvalError, HandlerHost, Request};
pub use parse::{parse, Cond, Expr, ParseError, Program, Stmt};

pub const MAX_STATEMENTS: usize = 1000;
pub const MAX_FETCHES: usize = 4;
pub const MAX_NESTING: usize = 32;
pub const MAX_SOURCE_BYTES: usize = 64 * 1024;
