//! Small expression language shared by parametric model templates (real-valued
//! rates, probabilities and rewards) and automata networks (integer guards,
//! assignments and state predicates).

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

/// Expression tree. Identifiers may be dotted (`Analyzer.Adapt`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
}

impl Value {
    pub fn as_num(self) -> Result<f64, ExprError> {
        match self {
            Value::Num(x) => Ok(x),
            Value::Bool(b) => Err(ExprError::Type(format!("expected number, found {b}"))),
        }
    }

    pub fn as_bool(self) -> Result<bool, ExprError> {
        match self {
            Value::Bool(b) => Ok(b),
            Value::Num(x) => Err(ExprError::Type(format!("expected boolean, found {x}"))),
        }
    }
}

impl Expr {
    pub fn num(x: f64) -> Self {
        Expr::Num(x)
    }

    pub fn ident(name: impl Into<String>) -> Self {
        Expr::Ident(name.into())
    }

    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr(0)?;
        if p.pos != p.tokens.len() {
            return Err(ExprError::Parse { pos: p.tokens[p.pos].1, msg: format!("unexpected token {:?}", p.tokens[p.pos].0) });
        }
        Ok(e)
    }

    /// All identifiers referenced by this expression.
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_idents(&mut out);
        out
    }

    fn collect_idents(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Ident(n) => {
                out.insert(n.clone());
            }
            Expr::Unary(_, e) => e.collect_idents(out),
            Expr::Binary(_, a, b) => {
                a.collect_idents(out);
                b.collect_idents(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_idents(out)),
        }
    }

    pub fn eval<F>(&self, env: &F) -> Result<Value, ExprError>
    where
        F: Fn(&str) -> Option<Value>,
    {
        match self {
            Expr::Num(x) => Ok(Value::Num(*x)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Ident(n) => env(n).ok_or_else(|| ExprError::Unbound(n.clone())),
            Expr::Unary(UnaryOp::Neg, e) => Ok(Value::Num(-e.eval(env)?.as_num()?)),
            Expr::Unary(UnaryOp::Not, e) => Ok(Value::Bool(!e.eval(env)?.as_bool()?)),
            Expr::Binary(op, a, b) => {
                // short-circuit so guards like `i < n && arr_i` stay well defined
                match op {
                    BinaryOp::And => {
                        if !a.eval(env)?.as_bool()? {
                            return Ok(Value::Bool(false));
                        }
                        return Ok(Value::Bool(b.eval(env)?.as_bool()?));
                    }
                    BinaryOp::Or => {
                        if a.eval(env)?.as_bool()? {
                            return Ok(Value::Bool(true));
                        }
                        return Ok(Value::Bool(b.eval(env)?.as_bool()?));
                    }
                    _ => {}
                }
                let (x, y) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinaryOp::Eq => Ok(Value::Bool(values_equal(x, y)?)),
                    BinaryOp::Ne => Ok(Value::Bool(!values_equal(x, y)?)),
                    _ => {
                        let (x, y) = (x.as_num()?, y.as_num()?);
                        Ok(match op {
                            BinaryOp::Lt => Value::Bool(x < y),
                            BinaryOp::Le => Value::Bool(x <= y),
                            BinaryOp::Gt => Value::Bool(x > y),
                            BinaryOp::Ge => Value::Bool(x >= y),
                            BinaryOp::Add => Value::Num(x + y),
                            BinaryOp::Sub => Value::Num(x - y),
                            BinaryOp::Mul => Value::Num(x * y),
                            BinaryOp::Div => Value::Num(x / y),
                            BinaryOp::And | BinaryOp::Or | BinaryOp::Eq | BinaryOp::Ne => {
                                unreachable!()
                            }
                        })
                    }
                }
            }
            Expr::Call(name, args) => {
                let vals = args.iter().map(|a| a.eval(env).and_then(Value::as_num)).collect::<Result<Vec<_>, _>>()?;
                call(name, &vals).map(Value::Num)
            }
        }
    }

    /// Evaluates a real-valued expression.
    pub fn eval_num<F>(&self, env: &F) -> Result<f64, ExprError>
    where
        F: Fn(&str) -> Option<Value>,
    {
        self.eval(env)?.as_num()
    }

    pub fn eval_bool<F>(&self, env: &F) -> Result<bool, ExprError>
    where
        F: Fn(&str) -> Option<Value>,
    {
        self.eval(env)?.as_bool()
    }

    /// Replaces identifiers for which `subst` returns a replacement.
    pub fn substitute<F>(&self, subst: &F) -> Expr
    where
        F: Fn(&str) -> Option<Expr>,
    {
        match self {
            Expr::Ident(n) => subst(n).unwrap_or_else(|| self.clone()),
            Expr::Num(_) | Expr::Bool(_) => self.clone(),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.substitute(subst))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.substitute(subst)), Box::new(b.substitute(subst))),
            Expr::Call(n, args) => Expr::Call(n.clone(), args.iter().map(|a| a.substitute(subst)).collect()),
        }
    }
}

fn values_equal(x: Value, y: Value) -> Result<bool, ExprError> {
    match (x, y) {
        (Value::Num(a), Value::Num(b)) => Ok(a == b),
        (Value::Bool(a), Value::Bool(b)) => Ok(a == b),
        // integer-backed booleans in automata compare against 0/1
        (Value::Bool(a), Value::Num(b)) | (Value::Num(b), Value::Bool(a)) => Ok((a as u8 as f64) == b),
    }
}

fn call(name: &str, args: &[f64]) -> Result<f64, ExprError> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(ExprError::Arity { name: name.to_string(), expected: n, got: args.len() })
        }
    };
    match name {
        "min" => {
            arity(2)?;
            Ok(args[0].min(args[1]))
        }
        "max" => {
            arity(2)?;
            Ok(args[0].max(args[1]))
        }
        "clamp" => {
            arity(3)?;
            Ok(args[0].max(args[1]).min(args[2]))
        }
        "abs" => {
            arity(1)?;
            Ok(args[0].abs())
        }
        "exp" => {
            arity(1)?;
            Ok(args[0].exp())
        }
        _ => Err(ExprError::UnknownFunction(name.to_string())),
    }
}

impl From<f64> for Expr {
    fn from(x: f64) -> Self {
        Expr::Num(x)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, 0)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    match e {
        Expr::Num(x) => {
            if *x < 0.0 && min_prec > 0 {
                write!(f, "({x})")
            } else {
                write!(f, "{x}")
            }
        }
        Expr::Bool(b) => write!(f, "{b}"),
        Expr::Ident(n) => write!(f, "{n}"),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
            };
            write!(f, "{sym}")?;
            write_expr(inner, f, 7)
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let paren = p < min_prec;
            if paren {
                write!(f, "(")?;
            }
            write_expr(a, f, p)?;
            write!(f, " {} ", op.symbol())?;
            // left-associative: an equal-precedence right child needs parentheses
            write_expr(b, f, p + 1)?;
            if paren {
                write!(f, ")")?;
            }
            Ok(())
        }
        Expr::Call(n, args) => {
            write!(f, "{n}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_expr(a, f, 0)?;
            }
            write!(f, ")")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit()) {
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
            let text = &src[start..i];
            let x = text.parse::<f64>().map_err(|_| ExprError::Parse { pos: start, msg: format!("bad number `{text}`") })?;
            out.push((Tok::Num(x), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let two = if i + 1 < bytes.len() { &src[i..i + 2] } else { "" };
        let op2 = ["||", "&&", "==", "!=", "<=", ">="].into_iter().find(|o| *o == two);
        if let Some(op) = op2 {
            out.push((Tok::Op(op), start));
            i += 2;
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            '*' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '<' => Tok::Op("<"),
            '>' => Tok::Op(">"),
            '!' => Tok::Op("!"),
            _ => return Err(ExprError::Parse { pos: start, msg: format!("unexpected character `{c}`") }),
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.1).unwrap_or(usize::MAX)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Parse { pos: self.here(), msg: msg.into() })
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        match self.peek()? {
            Tok::Op(s) => Some(match *s {
                "||" => BinaryOp::Or,
                "&&" => BinaryOp::And,
                "==" => BinaryOp::Eq,
                "!=" => BinaryOp::Ne,
                "<" => BinaryOp::Lt,
                "<=" => BinaryOp::Le,
                ">" => BinaryOp::Gt,
                ">=" => BinaryOp::Ge,
                "+" => BinaryOp::Add,
                "-" => BinaryOp::Sub,
                "*" => BinaryOp::Mul,
                "/" => BinaryOp::Div,
                _ => return None,
            }),
            _ => None,
        }
    }

    fn expr(&mut self, min_prec: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(p + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Tok::Op("-")) => {
                self.pos += 1;
                let inner = self.unary()?;
                Ok(match inner {
                    Expr::Num(x) => Expr::Num(-x),
                    other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
                })
            }
            Some(Tok::Op("!")) => {
                self.pos += 1;
                Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Num(x)) => {
                self.pos += 1;
                Ok(Expr::Num(x))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => return Ok(Expr::Bool(true)),
                    "false" => return Ok(Expr::Bool(false)),
                    _ => {}
                }
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        loop {
                            args.push(self.expr(0)?);
                            match self.peek() {
                                Some(Tok::Comma) => self.pos += 1,
                                Some(Tok::RParen) => break,
                                _ => return self.err("expected `,` or `)`"),
                            }
                        }
                    }
                    self.pos += 1;
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr(0)?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(name: &str) -> Option<Value> {
        match name {
            "r" => Some(Value::Num(5.0)),
            "p" => Some(Value::Num(0.9)),
            "flag" => Some(Value::Bool(true)),
            _ => None,
        }
    }

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("r * (1 - p) + 2 / 4").unwrap();
        assert!((e.eval_num(&env).unwrap() - 1.0).abs() < 1e-12);
        let e = Expr::parse("10 - 4 - 3").unwrap();
        assert_eq!(e.eval_num(&env).unwrap(), 3.0);
    }

    #[test]
    fn clamp_and_booleans() {
        let e = Expr::parse("clamp(0.98 - 0.07 * r, 0, 1)").unwrap();
        assert!((e.eval_num(&env).unwrap() - 0.63).abs() < 1e-12);
        let g = Expr::parse("flag && r >= 5 || !flag").unwrap();
        assert!(g.eval_bool(&env).unwrap());
    }

    #[test]
    fn unbound_identifier_is_reported() {
        let e = Expr::parse("q + 1").unwrap();
        assert_eq!(e.eval_num(&env), Err(ExprError::Unbound("q".into())));
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "a - (b - c)",
            "(a + b) * c",
            "-x * 2",
            "a / (b / c)",
            "!(a == 1) && b != 2 || c < -3",
            "clamp(p_max - kappa * sp, 0, 1)",
            "Analyzer.Adapt && x1 != newX1",
            "1e-7 * r",
        ] {
            let e = Expr::parse(src).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("a +").is_err());
        assert!(Expr::parse("a $ b").is_err());
        assert!(Expr::parse("(a").is_err());
    }
}
