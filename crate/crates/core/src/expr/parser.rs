//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;          (* right associative *)
//! primary = number | "x" digits | "sigma" | "s"
//!         | func "(" expr { "," expr } ")" | "(" expr ")" ;
//! func    = "abs" | "exp" | "log" | "sqrt" | "max" | "min" ;
//! ```
//!
//! Whitespace is insignificant. `s` is only accepted when a numeric value is
//! supplied through [`parse_with_s`], in which case it becomes a constant.
//! A minus sign applied directly to a constant yields a negative constant.

use super::{BinaryOp, Expr, NaryOp, UnaryOp};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("variable x{index} at position {position} exceeds declared arity {arity}")]
    Arity {
        position: usize,
        index: usize,
        arity: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                position: start,
                expected: vec!["number".into()],
                found: format!("`{lit}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError::Syntax {
                position: i,
                expected: vec!["operator, operand or parenthesis".into()],
                found: format!("`{c}`"),
            });
        }
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    arity: usize,
    s: Option<f64>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn position(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            position: self.position(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&format!("`{c}`")]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinaryOp::Add,
                Tok::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinaryOp::Mul,
                Tok::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            let inner = self.unary()?;
            Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exponent = self.unary()?;
            Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.position();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.identifier(&name, start)
            }
            _ => Err(self.error(&["number", "variable", "function", "`(`"])),
        }
    }

    fn identifier(&mut self, name: &str, start: usize) -> Result<Expr, ParseError> {
        let unary = match name {
            "abs" => Some(UnaryOp::Abs),
            "exp" => Some(UnaryOp::Exp),
            "log" => Some(UnaryOp::Log),
            "sqrt" => Some(UnaryOp::Sqrt),
            _ => None,
        };
        if let Some(op) = unary {
            let args = self.call_args()?;
            if args.len() != 1 {
                return Err(ParseError::Syntax {
                    position: start,
                    expected: vec![format!("exactly one argument to {name}")],
                    found: format!("{} arguments", args.len()),
                });
            }
            return Ok(Expr::Unary(op, Box::new(args.into_iter().next().unwrap())));
        }
        let nary = match name {
            "max" => Some(NaryOp::Max),
            "min" => Some(NaryOp::Min),
            _ => None,
        };
        if let Some(op) = nary {
            return Ok(Expr::Nary(op, self.call_args()?));
        }
        if name == "sigma" {
            return Ok(Expr::Sigma);
        }
        if name == "s" {
            if let Some(v) = self.s {
                return Ok(Expr::Const(v));
            }
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.arity {
                    return Err(ParseError::Arity {
                        position: start,
                        index,
                        arity: self.arity,
                    });
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        let mut expected = vec!["x<k>", "sigma", "abs", "exp", "log", "sqrt", "max", "min"];
        if self.s.is_some() {
            expected.push("s");
        }
        Err(ParseError::Syntax {
            position: start,
            expected: expected.into_iter().map(String::from).collect(),
            found: format!("identifier `{name}`"),
        })
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Sym(',') {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(args)
    }
}

/// Parses `text` as an expression in `arity` variables `x1..x{arity}`.
pub fn parse(text: &str, arity: usize) -> Result<Expr, ParseError> {
    parse_inner(text, arity, None)
}

/// Like [`parse`], but the identifier `s` is replaced by the literal `s`.
pub fn parse_with_s(text: &str, arity: usize, s: f64) -> Result<Expr, ParseError> {
    parse_inner(text, arity, Some(s))
}

fn parse_inner(text: &str, arity: usize, s: Option<f64>) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        arity,
        s,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}
