//! Formulas in `x1, x2, x3`: parsing, printing and jet evaluation.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-'? power
//! power  := atom ('^' factor)?
//! atom   := number | 'pi' | 'e' | var | fn '(' expr (',' expr)? ')' | '(' expr ')'
//! var    := 'x1' | 'x2' | 'x3'
//! fn     := sin | cos | exp | log | sqrt | atan | atan2 | acos | arccos
//! ```
//!
//! Exponents must be constant. Implicit multiplication (`2x1`) is rejected.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::jet::{Jet3, JetError};
use crate::tensor::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    /// `atan2(left, right)` with `left` the ordinate.
    Atan2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
    Acos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Neg => "-",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Acos => "acos",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Constant(f64),
    /// Coordinate index, 1 to 3.
    Var(usize),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(Func, Box<Expr>),
    Pow(Box<Expr>, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {offset}: {message}; expected one of: {}", expected.join(", "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<&'static str>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source} in `{location}`")]
pub struct EvalError {
    pub location: String,
    #[source]
    pub source: JetError,
}

const ATOM_START: &[&str] = &["number", "pi", "e", "x1", "x2", "x3", "function", "(", "-"];
const AFTER_OPERAND: &[&str] = &["+", "-", "*", "/", "^", "end of input"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut p = Parser {
            src,
            pos: 0,
            tok: Tok::End,
            tok_start: 0,
        };
        p.advance()?;
        Ok(p)
    }

    fn err(&self, expected: &[&'static str], message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.tok_start,
            expected: expected.to_vec(),
            message: message.into(),
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = bytes[self.pos] as char;
        if c.is_ascii_digit() || c == '.' {
            let start = self.pos;
            while self.pos < bytes.len() && (bytes[self.pos] as char).is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos < bytes.len() && bytes[self.pos] == b'.' {
                self.pos += 1;
                while self.pos < bytes.len() && (bytes[self.pos] as char).is_ascii_digit() {
                    self.pos += 1;
                }
            }
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let mut k = self.pos + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && (bytes[k] as char).is_ascii_digit() {
                    while k < bytes.len() && (bytes[k] as char).is_ascii_digit() {
                        k += 1;
                    }
                    self.pos = k;
                }
            }
            let text = &self.src[start..self.pos];
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => self.tok = Tok::Num(v),
                _ => return Err(self.err(&["number"], format!("malformed number `{text}`"))),
            }
        } else if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < bytes.len() && (bytes[self.pos] as char).is_ascii_alphanumeric() {
                self.pos += 1;
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
        } else if "+-*/^(),".contains(c) {
            self.pos += 1;
            self.tok = Tok::Sym(c);
        } else {
            let ch = self.src[self.pos..].chars().next().unwrap_or('?');
            return Err(self.err(ATOM_START, format!("unexpected character `{ch}`")));
        }
        Ok(())
    }

    fn eat(&mut self, c: char) -> Result<bool, ParseError> {
        if self.tok == Tok::Sym(c) {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expect(&mut self, c: char, expected: &[&'static str]) -> Result<(), ParseError> {
        if self.eat(c)? {
            Ok(())
        } else {
            Err(self.err(expected, format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-')? {
            let inner = self.power()?;
            Ok(match inner {
                Expr::Constant(c) => Expr::Constant(-c),
                other => Expr::Unary(Func::Neg, Box::new(other)),
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::Sym('^') {
            self.advance()?;
            let at = self.tok_start;
            let exponent = self.factor()?;
            match exponent.constant_value() {
                Some(p) if p.is_finite() => Ok(Expr::Pow(Box::new(base), p)),
                _ => Err(ParseError {
                    offset: at,
                    expected: vec!["constant exponent"],
                    message: "exponent must be a finite constant".into(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Constant(v))
            }
            Tok::Sym('(') => {
                self.advance()?;
                let e = self.expr()?;
                self.expect(')', &[")", "+", "-", "*", "/", "^"])?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let e = match name.as_str() {
                    "pi" => Expr::Constant(std::f64::consts::PI),
                    "e" => Expr::Constant(std::f64::consts::E),
                    "x1" => Expr::Var(1),
                    "x2" => Expr::Var(2),
                    "x3" => Expr::Var(3),
                    _ => return self.call(&name),
                };
                self.advance()?;
                Ok(e)
            }
            _ => Err(self.err(ATOM_START, "expected an operand")),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr, ParseError> {
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "atan" => Some(Func::Atan),
            "acos" | "arccos" => Some(Func::Acos),
            "atan2" => None,
            _ => {
                return Err(self.err(ATOM_START, format!("unknown identifier `{name}`")));
            }
        };
        self.advance()?;
        self.expect('(', &["("])?;
        let first = self.expr()?;
        let e = match func {
            Some(f) => Expr::Unary(f, Box::new(first)),
            None => {
                self.expect(',', &[","])?;
                let second = self.expr()?;
                Expr::Binary(BinOp::Atan2, Box::new(first), Box::new(second))
            }
        };
        self.expect(')', &[")", "+", "-", "*", "/", "^"])?;
        Ok(e)
    }
}

/// Parses a formula in `x1, x2, x3`.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.err(AFTER_OPERAND, "unexpected trailing input"));
    }
    Ok(e)
}

impl FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_sign_negative() {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}

impl Expr {
    /// Value of a tree without variables.
    pub fn constant_value(&self) -> Option<f64> {
        self.eval_with(&[Jet3::constant(f64::NAN); 3])
            .ok()
            .filter(|_| !self.has_vars())
            .map(|j| j.value)
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Expr::Constant(_) => false,
            Expr::Var(_) => true,
            Expr::Binary(_, l, r) => l.has_vars() || r.has_vars(),
            Expr::Unary(_, c) | Expr::Pow(c, _) => c.has_vars(),
        }
    }

    /// Replaces `x1, x2, x3` by the given expressions.
    pub fn substitute(&self, vars: &[Expr; 3]) -> Expr {
        match self {
            Expr::Constant(c) => Expr::Constant(*c),
            Expr::Var(i) => vars[i - 1].clone(),
            Expr::Binary(op, l, r) => {
                Expr::Binary(*op, Box::new(l.substitute(vars)), Box::new(r.substitute(vars)))
            }
            Expr::Unary(f, c) => Expr::Unary(*f, Box::new(c.substitute(vars))),
            Expr::Pow(c, p) => Expr::Pow(Box::new(c.substitute(vars)), *p),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Constant(_) | Expr::Var(_) => 1,
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
            Expr::Unary(_, c) | Expr::Pow(c, _) => 1 + c.size(),
        }
    }

    /// Jet of the formula at `point`.
    pub fn eval_jet(&self, point: Vec3) -> Result<Jet3, EvalError> {
        self.eval_with(&Jet3::coordinates(point))
    }

    /// Jet of the formula with each variable replaced by the given jet.
    pub fn eval_with(&self, vars: &[Jet3; 3]) -> Result<Jet3, EvalError> {
        let located = |r: Result<Jet3, JetError>| {
            r.map_err(|source| EvalError {
                location: self.to_string(),
                source,
            })
        };
        match self {
            Expr::Constant(c) => Ok(Jet3::constant(*c)),
            Expr::Var(i) => Ok(vars[i - 1]),
            Expr::Binary(op, l, r) => {
                let a = l.eval_with(vars)?;
                let b = r.eval_with(vars)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => located(a.div(&b)),
                    BinOp::Atan2 => located(a.atan2(&b)),
                }
            }
            Expr::Unary(func, c) => {
                let a = c.eval_with(vars)?;
                match func {
                    Func::Neg => Ok(-a),
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => Ok(a.exp()),
                    Func::Atan => Ok(a.atan()),
                    Func::Log => located(a.log()),
                    Func::Sqrt => located(a.sqrt()),
                    Func::Acos => located(a.acos()),
                }
            }
            Expr::Pow(c, p) => located(c.eval_with(vars)?.pow_const(*p)),
        }
    }

    /// Plain floating-point value at `point`, with the same domain rules as
    /// [`Expr::eval_jet`].
    pub fn eval(&self, point: Vec3) -> Result<f64, EvalError> {
        let fail = |source: JetError| EvalError {
            location: self.to_string(),
            source,
        };
        Ok(match self {
            Expr::Constant(c) => *c,
            Expr::Var(i) => point[i - 1],
            Expr::Binary(op, l, r) => {
                let a = l.eval(point)?;
                let b = r.eval(point)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(fail(JetError::DivisionByZero));
                        }
                        a / b
                    }
                    BinOp::Atan2 => {
                        if a == 0.0 && b == 0.0 {
                            return Err(fail(JetError::Domain { func: "atan2", value: 0.0 }));
                        }
                        a.atan2(b)
                    }
                }
            }
            Expr::Unary(func, c) => {
                let a = c.eval(point)?;
                match func {
                    Func::Neg => -a,
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Atan => a.atan(),
                    Func::Log if a > 0.0 => a.ln(),
                    Func::Sqrt if a > 0.0 => a.sqrt(),
                    Func::Acos if a > -1.0 && a < 1.0 => a.acos(),
                    _ => return Err(fail(JetError::Domain { func: func.name(), value: a })),
                }
            }
            Expr::Pow(c, p) => {
                let a = c.eval(point)?;
                if p.fract() == 0.0 {
                    if a == 0.0 && *p < 0.0 {
                        return Err(fail(JetError::DivisionByZero));
                    }
                    a.powi(*p as i32)
                } else if a > 0.0 {
                    a.powf(*p)
                } else {
                    return Err(fail(JetError::Domain { func: "pow", value: a }));
                }
            }
        })
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, top: bool) -> fmt::Result {
        match self {
            Expr::Constant(c) => write_number(f, *c),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Binary(BinOp::Atan2, l, r) => {
                write!(f, "atan2(")?;
                l.write(f, true)?;
                write!(f, ", ")?;
                r.write(f, true)?;
                write!(f, ")")
            }
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    _ => "/",
                };
                if !top {
                    write!(f, "(")?;
                }
                l.write(f, false)?;
                write!(f, " {sym} ")?;
                r.write(f, false)?;
                if !top {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Expr::Unary(Func::Neg, c) => {
                write!(f, "(-")?;
                c.write(f, false)?;
                write!(f, ")")
            }
            Expr::Unary(func, c) => {
                write!(f, "{}(", func.name())?;
                c.write(f, true)?;
                write!(f, ")")
            }
            Expr::Pow(c, p) => {
                if matches!(**c, Expr::Pow(..)) {
                    write!(f, "(")?;
                    c.write(f, true)?;
                    write!(f, ")")?;
                } else {
                    c.write(f, false)?;
                }
                write!(f, "^")?;
                write_number(f, *p)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse("1 - 2 - 3").unwrap();
        assert_eq!(e.eval([0.0; 3]).unwrap(), -4.0);
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.eval([0.0; 3]).unwrap(), 512.0);
        let e = parse("-x1^2").unwrap();
        assert_eq!(e.eval([3.0, 0.0, 0.0]).unwrap(), -9.0);
        let e = parse("8/2/2").unwrap();
        assert_eq!(e.eval([0.0; 3]).unwrap(), 2.0);
        let e = parse("x1^-1").unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Var(1)), -1.0));
    }

    #[test]
    fn malformed_inputs() {
        let err = parse("x1*+").unwrap_err();
        assert_eq!(err.offset, 3);
        assert!(err.expected.contains(&"("));
        let err = parse("2x1").unwrap_err();
        assert_eq!(err.offset, 1);
        assert!(parse("").is_err());
        assert!(parse("sin x1").is_err());
        assert!(parse("foo(x1)").is_err());
        assert!(parse("x1^x2").is_err());
        assert!(parse("atan2(x1)").is_err());
        assert!(parse("x4").is_err());
        assert!(parse("(x1").is_err());
    }

    #[test]
    fn named_constants_and_alias() {
        let e = parse("arccos(x1/2) + pi - e").unwrap();
        let v = e.eval([1.0, 0.0, 0.0]).unwrap();
        let want = 0.5f64.acos() + std::f64::consts::PI - std::f64::consts::E;
        assert!((v - want).abs() < 1e-15);
        assert!(parse("1.5e-3*x1").is_ok());
    }

    #[test]
    fn round_trip() {
        for s in [
            "x2*(x1^2+x2^2+x3^2)/(x2^2+x3^2)",
            "log(sqrt(x1^2+x2^2+x3^2))",
            "-(x1 - -x2)^0.5",
            "atan2(x3, x2) - 2.5e-7",
            "(x1^2)^3 + (-2)^2 + -3",
            "exp(-x1)*cos(x2)/sin(x3)",
        ] {
            let e = parse(s).unwrap();
            let printed = e.to_string();
            let again = parse(&printed).unwrap();
            assert_eq!(e, again, "{s} -> {printed}");
            assert_eq!(printed, again.to_string());
        }
    }

    #[test]
    fn jet_evaluation() {
        let e = parse("x1*x2*x3").unwrap();
        let j = e.eval_jet([1.0, 1.0, 1.0]).unwrap();
        assert_eq!(j.value, 1.0);
        assert_eq!(j.grad, [1.0, 1.0, 1.0]);
        let e = parse("x1").unwrap();
        assert_eq!(e.eval_jet([2.0, 3.0, 4.0]).unwrap(), Jet3::variable(0, 2.0));
        let err = parse("log(x1)").unwrap().eval_jet([0.0, 1.0, 1.0]).unwrap_err();
        assert_eq!(err.location, "log(x1)");
        assert!(matches!(err.source, JetError::Domain { func: "log", .. }));
    }
}
