use std::fmt;

use thiserror::Error;

use super::{MAX_NESTING, MAX_SOURCE_BYTES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    If {
        cond: Cond,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
    },
    Respond(Expr),
    Error(Expr),
    Log(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cond {
    pub lhs: Expr,
    pub negated: bool,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Str(String),
    Env(Box<Expr>),
    Param(Box<Expr>),
    Header(Box<Expr>),
    Metadata(Box<Expr>),
    Path,
    Fetch(Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Plus,
    EqEq,
    NotEq,
    Semi,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::EqEq => f.write_str("`==`"),
            Tok::NotEq => f.write_str("`!=`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: l, col: cl });
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '(' | ')' | '{' | '}' | ',' | '+' | ';' => {
                bump!();
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    '+' => Tok::Plus,
                    _ => Tok::Semi,
                };
                push(&mut out, tok);
            }
            '=' | '!' => {
                bump!();
                if chars.peek() != Some(&'=') {
                    return Err(err(l, cl, format!("expected `{c}=`")));
                }
                bump!();
                push(&mut out, if c == '=' { Tok::EqEq } else { Tok::NotEq });
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None => return Err(err(l, cl, "unterminated string literal")),
                        Some('"') => break,
                        Some('\\') => {
                            let (el, ec) = (line, col - 1);
                            match bump!() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(other) => return Err(err(el, ec, format!("unknown escape `\\{other}`"))),
                                None => return Err(err(l, cl, "unterminated string literal")),
                            }
                        }
                        Some(ch) => s.push(ch),
                    }
                }
                push(&mut out, Tok::Str(s));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if !(c.is_ascii_alphanumeric() || c == '_') {
                        break;
                    }
                    ident.push(c);
                    bump!();
                }
                push(&mut out, Tok::Ident(ident));
            }
            other => return Err(err(l, cl, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(err(t.line, t.col, format!("expected {want}, found {}", t.tok)))
        }
    }

    fn enter(&mut self, at: &Spanned) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(err(
                at.line,
                at.col,
                format!("nesting deeper than {MAX_NESTING} levels"),
            ));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn block_body(&mut self, until_brace: bool) -> Result<Vec<Stmt>, ParseError> {
        let mut body = Vec::new();
        loop {
            match self.peek().tok {
                Tok::RBrace if until_brace => return Ok(body),
                Tok::Eof if !until_brace => return Ok(body),
                Tok::Semi => {
                    self.next();
                }
                _ => body.push(self.stmt()?),
            }
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let open = self.peek().clone();
        self.expect(Tok::LBrace)?;
        self.enter(&open)?;
        let body = self.block_body(true)?;
        self.expect(Tok::RBrace)?;
        self.leave();
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let t = self.next();
        let Tok::Ident(word) = &t.tok else {
            return Err(err(t.line, t.col, format!("expected a statement, found {}", t.tok)));
        };
        match word.as_str() {
            "if" => {
                self.enter(&t)?;
                let cond = self.cond()?;
                let then = self.block()?;
                let otherwise = if self.peek().tok == Tok::Ident("else".into()) {
                    self.next();
                    if self.peek().tok == Tok::Ident("if".into()) {
                        vec![self.stmt()?]
                    } else {
                        self.block()?
                    }
                } else {
                    Vec::new()
                };
                self.leave();
                Ok(Stmt::If { cond, then, otherwise })
            }
            "respond" | "error" | "log" => {
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(match word.as_str() {
                    "respond" => Stmt::Respond(e),
                    "error" => Stmt::Error(e),
                    _ => Stmt::Log(e),
                })
            }
            other => Err(err(t.line, t.col, format!("unknown statement `{other}`"))),
        }
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        let lhs = self.expr()?;
        let t = self.next();
        let negated = match t.tok {
            Tok::EqEq => false,
            Tok::NotEq => true,
            other => return Err(err(t.line, t.col, format!("expected `==` or `!=`, found {other}"))),
        };
        let rhs = self.expr()?;
        Ok(Cond { lhs, negated, rhs })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut parts = vec![self.term()?];
        while self.peek().tok == Tok::Plus {
            self.next();
            parts.push(self.term()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Expr::Concat(parts)
        })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::LParen => {
                self.enter(&t)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                self.leave();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.enter(&t)?;
                self.expect(Tok::LParen)?;
                let e = match name.as_str() {
                    "path" => Expr::Path,
                    "fetch" => {
                        let url = self.expr()?;
                        self.expect(Tok::Comma)?;
                        let headers = self.expr()?;
                        Expr::Fetch(Box::new(url), Box::new(headers))
                    }
                    "env" | "param" | "header" | "metadata" => {
                        let arg = Box::new(self.expr()?);
                        match name.as_str() {
                            "env" => Expr::Env(arg),
                            "param" => Expr::Param(arg),
                            "header" => Expr::Header(arg),
                            _ => Expr::Metadata(arg),
                        }
                    }
                    other => return Err(err(t.line, t.col, format!("unknown function `{other}`"))),
                };
                self.expect(Tok::RParen)?;
                self.leave();
                Ok(e)
            }
            other => Err(err(t.line, t.col, format!("expected an expression, found {other}"))),
        }
    }
}

pub fn parse(src: &str) -> Result<Program, ParseError> {
    if src.len() > MAX_SOURCE_BYTES {
        return Err(err(1, 1, format!("source larger than {MAX_SOURCE_BYTES} bytes")));
    }
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        depth: 0,
    };
    let body = p.block_body(false)?;
    Ok(Program { body })
}
