//! Recursive descent parser for the expression language.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" [ "-" ] integer ] ;
//! atom    = number | variable | call | "(" expr ")" ;
//! call    = name "(" expr [ "," expr ] ")" ;
//! variable = "x" integer ;            (* 1-based, at most the declared dimension *)
//! name    = "exp" | "log" | "sqrt" | "abs" | "atan" | "min" | "max" ;
//! ```

use thiserror::Error;

use super::ast::{Expr, Func1, Func2};

/// Parse failure. `offset` is the 1-based byte column of the offending token
/// (end of input reports `len + 1`).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn err<T>(pos: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { offset: pos + 1, message: message.into() })
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, pos: start });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut is_float = false;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                is_float = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let tok = if is_float {
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Num(v),
                    _ => return err(start, format!("invalid number `{text}`")),
                }
            } else {
                match text.parse::<i64>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => match text.parse::<f64>() {
                        Ok(v) if v.is_finite() => Tok::Num(v),
                        _ => return err(start, format!("invalid number `{text}`")),
                    },
                }
            };
            out.push(Token { tok, pos: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), pos: start });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return err(start, format!("unexpected character `{ch}`"));
    }
    out.push(Token { tok: Tok::Eof, pos: src.len() });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    cursor: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.cursor]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.cursor].clone();
        if t.tok != Tok::Eof {
            self.cursor += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            err(t.pos, format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = if self.peek().tok == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let t = self.bump();
        match t.tok {
            Tok::Int(n) => {
                let n = if negative { -n } else { n };
                let n = i32::try_from(n).or_else(|_| err(t.pos, "exponent out of range"))?;
                Ok(Expr::Pow(Box::new(base), n))
            }
            _ => err(t.pos, "exponent must be an integer literal"),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Int(v) => Ok(Expr::Num(v as f64)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, t.pos),
            Tok::Eof => err(t.pos, "unexpected end of input"),
            other => err(t.pos, format!("unexpected token {other:?}")),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Expr, ParseError> {
        if let Some(idx) = name.strip_prefix('x') {
            if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) {
                let i: usize = idx.parse().or_else(|_| err(pos, "bad variable index"))?;
                if i == 0 || i > self.dim {
                    return err(pos, format!("variable x{i} outside dimension {}", self.dim));
                }
                return Ok(Expr::Var(i));
            }
        }
        let f1 = match name.as_str() {
            "exp" => Some(Func1::Exp),
            "log" => Some(Func1::Log),
            "sqrt" => Some(Func1::Sqrt),
            "abs" => Some(Func1::Abs),
            "atan" => Some(Func1::Atan),
            _ => None,
        };
        let f2 = match name.as_str() {
            "min" => Some(Func2::Min),
            "max" => Some(Func2::Max),
            _ => None,
        };
        if f1.is_none() && f2.is_none() {
            return err(pos, format!("unknown identifier `{name}`"));
        }
        self.expect(Tok::LParen, "`(` after function name")?;
        let mut args = vec![self.expr()?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        let want = if f1.is_some() { 1 } else { 2 };
        if args.len() != want {
            return err(pos, format!("`{name}` takes {want} argument(s), got {}", args.len()));
        }
        let mut args = args.into_iter();
        let a = Box::new(args.next().unwrap());
        Ok(match (f1, f2) {
            (Some(g), _) => Expr::Call1(g, a),
            (_, Some(g)) => Expr::Call2(g, a, Box::new(args.next().unwrap())),
            _ => unreachable!(),
        })
    }
}

/// Parses `source` over variables `x1..x{dimension}`.
pub fn parse(source: &str, dimension: usize) -> Result<Expr, ParseError> {
    if dimension == 0 {
        return err(0, "dimension must be positive");
    }
    if source.trim().is_empty() {
        return err(0, "empty expression");
    }
    let tokens = lex(source)?;
    let mut p = Parser { tokens, cursor: 0, dim: dimension };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return err(t.pos, "trailing tokens");
    }
    Ok(e)
}
