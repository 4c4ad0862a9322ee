//! Arithmetic expressions over named parameters, used for derived values
//! and parameter constraints in scenario documents.
//!
//! Grammar, loosest binding first: `||`, `&&`, comparisons, `+ -`, `* /`,
//! unary `-`, `^` (right associative). Calls: `exp ln sqrt abs min max`.
//! Comparisons and logical operators yield `1` or `0`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

const OPS: [&str; 14] = [
    "||", "&&", "<=", ">=", "==", "!=", "<", ">", "+", "-", "*", "/", "^", "!",
];

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let b = src.as_bytes();
    let mut i = 0;
    'outer: while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && (b[j] as char).is_ascii_digit() {
                    i = j;
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &src[start..i];
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Config(format!("bad number '{s}' in '{src}'")))?;
            out.push(Tok::Num(v));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(src[start..i].to_string()));
            continue;
        }
        match c {
            '(' => out.push(Tok::LParen),
            ')' => out.push(Tok::RParen),
            ',' => out.push(Tok::Comma),
            _ => {
                for op in OPS {
                    if src[i..].starts_with(op) {
                        out.push(Tok::Op(op));
                        i += op.len();
                        continue 'outer;
                    }
                }
                return Err(Error::Config(format!("unexpected '{c}' in '{src}'")));
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a BTreeMap<String, f64>,
    src: &'a str,
}

fn truth(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

impl Parser<'_> {
    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Config(format!("{msg} in '{}'", self.src)))
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(o)) => Some(o),
            _ => None,
        }
    }

    fn binary(
        &mut self,
        ops: &[&str],
        next: fn(&mut Self) -> Result<f64>,
        apply: fn(&str, f64, f64) -> f64,
    ) -> Result<f64> {
        let mut v = next(self)?;
        while let Some(op) = self.peek_op().filter(|o| ops.contains(o)) {
            self.pos += 1;
            let rhs = next(self)?;
            v = apply(op, v, rhs);
        }
        Ok(v)
    }

    fn or(&mut self) -> Result<f64> {
        self.binary(&["||"], Self::and, |_, a, b| truth(a != 0.0 || b != 0.0))
    }

    fn and(&mut self) -> Result<f64> {
        self.binary(&["&&"], Self::cmp, |_, a, b| truth(a != 0.0 && b != 0.0))
    }

    fn cmp(&mut self) -> Result<f64> {
        self.binary(
            &["<", "<=", ">", ">=", "==", "!="],
            Self::add,
            |op, a, b| {
                truth(match op {
                    "<" => a < b,
                    "<=" => a <= b,
                    ">" => a > b,
                    ">=" => a >= b,
                    "==" => a == b,
                    _ => a != b,
                })
            },
        )
    }

    fn add(&mut self) -> Result<f64> {
        self.binary(&["+", "-"], Self::mul, |op, a, b| {
            if op == "+" {
                a + b
            } else {
                a - b
            }
        })
    }

    fn mul(&mut self) -> Result<f64> {
        self.binary(&["*", "/"], Self::unary, |op, a, b| {
            if op == "*" {
                a * b
            } else {
                a / b
            }
        })
    }

    fn unary(&mut self) -> Result<f64> {
        match self.peek_op() {
            Some("-") => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some("!") => {
                self.pos += 1;
                Ok(truth(self.unary()? == 0.0))
            }
            _ => self.pow(),
        }
    }

    fn pow(&mut self) -> Result<f64> {
        let base = self.atom()?;
        if self.peek_op() == Some("^") {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(base.powf(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<f64> {
        let tok = self.toks.get(self.pos).cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Num(v)) => Ok(v),
            Some(Tok::LParen) => {
                let v = self.or()?;
                self.expect(Tok::RParen)?;
                Ok(v)
            }
            Some(Tok::Ident(name)) => {
                if self.toks.get(self.pos) == Some(&Tok::LParen) {
                    self.pos += 1;
                    let mut args = vec![self.or()?];
                    while self.toks.get(self.pos) == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.or()?);
                    }
                    self.expect(Tok::RParen)?;
                    return self.call(&name, &args);
                }
                match self.vars.get(&name) {
                    Some(v) => Ok(*v),
                    None => self.err(&format!("unknown parameter '{name}'")),
                }
            }
            _ => self.err("expected a number, parameter or '('"),
        }
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        if self.toks.get(self.pos) == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected {t:?}"))
        }
    }

    fn call(&self, name: &str, args: &[f64]) -> Result<f64> {
        let one = |f: fn(f64) -> f64| -> Result<f64> {
            match args {
                [a] => Ok(f(*a)),
                _ => self.err(&format!("{name} takes one argument")),
            }
        };
        match name {
            "exp" => one(f64::exp),
            "ln" => one(f64::ln),
            "sqrt" => one(f64::sqrt),
            "abs" => one(f64::abs),
            "min" | "max" if !args.is_empty() => {
                let f = if name == "min" { f64::min } else { f64::max };
                Ok(args[1..].iter().fold(args[0], |a, b| f(a, *b)))
            }
            _ => self.err(&format!("unknown function '{name}'")),
        }
    }
}

/// Evaluates `src` with the given parameter values.
pub fn eval(src: &str, vars: &BTreeMap<String, f64>) -> Result<f64> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vars,
        src,
    };
    let v = p.or()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(v)
}
