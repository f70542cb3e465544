//! Plant right-hand sides: a small expression language, its evaluation in
//! floating-point, interval and Taylor-model arithmetic, and Lie derivatives
//! for time-Taylor expansion.
//!
//! Grammar (`*` is never implicit, exponents are non-negative integers,
//! divisors are nonzero numeric literals):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' uint)?
//! base   := number | ident | '(' expr ')' | ('sin' | 'cos') '(' expr ')'
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, two_sum, Interval, IntervalBox};
use crate::poly::{monomial_mag, Exponents, MultiPoly, Vars};
use crate::taylor::{compose_poly, TaylorModel};

/// A variable reference, resolved against the system's declared names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    State(usize),
    Control(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Sym),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Division by a nonzero constant.
    Div(Box<Expr>, f64),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

/// Declared state and control variable names.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbols {
    pub state: Vec<String>,
    pub control: Vec<String>,
}

impl Symbols {
    pub fn new(state: Vec<String>, control: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for name in state.iter().chain(&control) {
            if !is_ident(name) || name == "sin" || name == "cos" {
                return Err(Error::InvalidArgument(format!("`{name}` is not a valid variable name")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!("variable `{name}` declared twice")));
            }
        }
        Ok(Self { state, control })
    }

    pub fn resolve(&self, name: &str) -> Option<Sym> {
        if let Some(i) = self.state.iter().position(|s| s == name) {
            return Some(Sym::State(i));
        }
        self.control.iter().position(|s| s == name).map(Sym::Control)
    }

    pub fn name(&self, s: Sym) -> &str {
        match s {
            Sym::State(i) => &self.state[i],
            Sym::Control(i) => &self.control[i],
        }
    }

    /// Polynomial variables: states followed by controls.
    pub fn poly_vars(&self) -> Vars {
        Vars::new(self.state.iter().chain(&self.control).cloned())
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// ---------------------------------------------------------------------------
// Lexer and parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let v: f64 = text.parse().map_err(|_| Error::Expr {
                offset: start,
                msg: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(Error::Expr {
            offset: start,
            msg: format!("unexpected character `{ch}`"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    symbols: &'a Symbols,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (t, at) = self.lexer.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expr {
            offset: self.at,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.tok != Tok::Op(op) {
            return self.err(format!("expected `{op}`"));
        }
        self.bump()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Op('+') => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.tok {
                Tok::Op('*') => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Op('/') => {
                    self.bump()?;
                    let at = self.at;
                    match self.factor()? {
                        Expr::Num(c) if c != 0.0 => lhs = Expr::Div(Box::new(lhs), c),
                        Expr::Num(_) => {
                            return Err(Error::Expr {
                                offset: at,
                                msg: "division by zero".into(),
                            })
                        }
                        _ => {
                            return Err(Error::Expr {
                                offset: at,
                                msg: "divisor must be a numeric literal".into(),
                            })
                        }
                    }
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            // A bare literal folds into a negative number.
            if let Tok::Num(v) = self.tok {
                let save = (self.lexer.pos, self.at);
                self.bump()?;
                if self.tok != Tok::Op('^') {
                    return Ok(Expr::Num(-v));
                }
                self.lexer.pos = save.0;
                self.at = save.1;
                self.tok = Tok::Num(v);
            }
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            match self.tok {
                Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) => {
                    self.bump()?;
                    return Ok(Expr::Pow(Box::new(base), v as u32));
                }
                _ => return self.err("exponent must be a non-negative integer"),
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if name == "sin" || name == "cos" {
                    self.expect('(')?;
                    let arg = Box::new(self.expr()?);
                    self.expect(')')?;
                    return Ok(if name == "sin" { Expr::Sin(arg) } else { Expr::Cos(arg) });
                }
                match self.symbols.resolve(&name) {
                    Some(s) => Ok(Expr::Var(s)),
                    None => Err(Error::Expr {
                        offset: at,
                        msg: format!("unknown identifier `{name}`"),
                    }),
                }
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Op(c) => self.err(format!("unexpected `{c}`")),
        }
    }
}

/// Parses an expression over the declared variables.
pub fn parse_expr(text: &str, symbols: &Symbols) -> Result<Expr> {
    let mut p = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
        symbols,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printing

impl Expr {
    /// Displays the expression with the given variable names. The output
    /// parses back to the same tree.
    pub fn display<'a>(&'a self, symbols: &'a Symbols) -> impl fmt::Display + 'a {
        Printer { e: self, symbols }
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

struct Printer<'a> {
    e: &'a Expr,
    symbols: &'a Symbols,
}

impl Printer<'_> {
    fn sub(&self, e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = Printer { e, symbols: self.symbols };
        if e.level() < min {
            write!(f, "({p})")
        } else {
            write!(f, "{p}")
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.e {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(s) => f.write_str(self.symbols.name(*s)),
            Expr::Neg(a) => {
                f.write_str("-")?;
                // `-(2)` keeps a negated literal distinct from a negative one.
                let min = if matches!(**a, Expr::Num(_)) { 6 } else { 3 };
                self.sub(a, min, f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                self.sub(a, 1, f)?;
                f.write_str(if matches!(self.e, Expr::Add(..)) { " + " } else { " - " })?;
                self.sub(b, 2, f)
            }
            Expr::Mul(a, b) => {
                self.sub(a, 2, f)?;
                f.write_str("*")?;
                self.sub(b, 3, f)
            }
            Expr::Div(a, c) => {
                self.sub(a, 2, f)?;
                write!(f, "/{c:?}")
            }
            Expr::Pow(a, n) => {
                self.sub(a, 5, f)?;
                write!(f, "^{n}")
            }
            Expr::Sin(a) | Expr::Cos(a) => {
                let name = if matches!(self.e, Expr::Sin(_)) { "sin" } else { "cos" };
                write!(f, "{name}({})", Printer { e: a, symbols: self.symbols })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn unbound(s: Sym) -> Error {
    Error::UnboundVariable(match s {
        Sym::State(i) => format!("state #{}", i + 1),
        Sym::Control(i) => format!("control #{}", i + 1),
    })
}

fn lookup<T: Clone>(s: Sym, x: &[T], u: &[T]) -> Result<T> {
    let v = match s {
        Sym::State(i) => x.get(i),
        Sym::Control(i) => u.get(i),
    };
    v.cloned().ok_or_else(|| unbound(s))
}

/// Interval enclosing `1/c`.
pub(crate) fn reciprocal(c: f64) -> Interval {
    let q = 1.0 / c;
    if c.mul_add(q, -1.0) == 0.0 {
        Interval::point(q)
    } else {
        Interval::raw(q.next_down(), q.next_up())
    }
}

impl Expr {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(s) => lookup(*s, x, u)?,
            Expr::Neg(a) => -a.eval(x, u)?,
            Expr::Add(a, b) => a.eval(x, u)? + b.eval(x, u)?,
            Expr::Sub(a, b) => a.eval(x, u)? - b.eval(x, u)?,
            Expr::Mul(a, b) => a.eval(x, u)? * b.eval(x, u)?,
            Expr::Div(a, c) => a.eval(x, u)? / c,
            Expr::Pow(a, n) => a.eval(x, u)?.powi(*n as i32),
            Expr::Sin(a) => a.eval(x, u)?.sin(),
            Expr::Cos(a) => a.eval(x, u)?.cos(),
        })
    }

    pub fn eval_interval(&self, x: &IntervalBox, u: &IntervalBox) -> Result<Interval> {
        Ok(match self {
            Expr::Num(v) => Interval::point(*v),
            Expr::Var(s) => lookup(*s, x.dims(), u.dims())?,
            Expr::Neg(a) => -a.eval_interval(x, u)?,
            Expr::Add(a, b) => a.eval_interval(x, u)? + b.eval_interval(x, u)?,
            Expr::Sub(a, b) => a.eval_interval(x, u)? - b.eval_interval(x, u)?,
            Expr::Mul(a, b) => {
                // Squares of a repeated subterm stay non-negative.
                if a == b {
                    a.eval_interval(x, u)?.sqr()
                } else {
                    a.eval_interval(x, u)? * b.eval_interval(x, u)?
                }
            }
            Expr::Div(a, c) => a.eval_interval(x, u)? * reciprocal(*c),
            Expr::Pow(a, n) => a.eval_interval(x, u)?.powi(*n),
            Expr::Sin(a) => a.eval_interval(x, u)?.sin(),
            Expr::Cos(a) => a.eval_interval(x, u)?.cos(),
        })
    }

    /// Taylor-model evaluation; `x` and `u` must share one domain.
    pub fn eval_tm(&self, x: &[TaylorModel], u: &[TaylorModel], order: u32) -> Result<TaylorModel> {
        let like = x.first().or(u.first()).ok_or_else(|| {
            Error::InvalidArgument("Taylor-model evaluation needs at least one binding".into())
        })?;
        self.tm_rec(x, u, order, like)
    }

    fn tm_rec(&self, x: &[TaylorModel], u: &[TaylorModel], k: u32, like: &TaylorModel) -> Result<TaylorModel> {
        Ok(match self {
            Expr::Num(v) => TaylorModel::constant(like.vars().clone(), like.domain().clone(), *v, k)?,
            Expr::Var(s) => lookup(*s, x, u)?,
            Expr::Neg(a) => a.tm_rec(x, u, k, like)?.neg(),
            Expr::Add(a, b) => a.tm_rec(x, u, k, like)?.add(&b.tm_rec(x, u, k, like)?)?,
            Expr::Sub(a, b) => a.tm_rec(x, u, k, like)?.sub(&b.tm_rec(x, u, k, like)?)?,
            Expr::Mul(a, b) => {
                let ta = a.tm_rec(x, u, k, like)?;
                if a == b {
                    ta.mul(&ta, k)?
                } else {
                    ta.mul(&b.tm_rec(x, u, k, like)?, k)?
                }
            }
            Expr::Div(a, c) => a.tm_rec(x, u, k, like)?.div_scalar(*c)?,
            Expr::Pow(a, n) => a.tm_rec(x, u, k, like)?.powi(*n, k)?,
            Expr::Sin(a) => a.tm_rec(x, u, k, like)?.sin(k)?,
            Expr::Cos(a) => a.tm_rec(x, u, k, like)?.cos(k)?,
        })
    }

    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Div(a, _) | Expr::Pow(a, _) => a.is_polynomial(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.is_polynomial() && b.is_polynomial(),
            Expr::Sin(_) | Expr::Cos(_) => false,
        }
    }

    /// Power-basis form over `symbols.poly_vars()`, with a per-coefficient
    /// bound on the rounding incurred while expanding. `None` for
    /// non-polynomial expressions.
    pub fn to_poly(&self, symbols: &Symbols) -> Option<CertPoly> {
        let n = symbols.state.len();
        let nv = n + symbols.control.len();
        self.cert(nv, n)
    }

    fn cert(&self, nv: usize, n: usize) -> Option<CertPoly> {
        Some(match self {
            Expr::Num(v) => CertPoly::constant(nv, *v),
            Expr::Var(Sym::State(i)) => CertPoly::var(nv, *i),
            Expr::Var(Sym::Control(i)) => CertPoly::var(nv, n + i),
            Expr::Neg(a) => a.cert(nv, n)?.scale(-1.0),
            Expr::Add(a, b) => a.cert(nv, n)?.add(&b.cert(nv, n)?),
            Expr::Sub(a, b) => a.cert(nv, n)?.add(&b.cert(nv, n)?.scale(-1.0)),
            Expr::Mul(a, b) => a.cert(nv, n)?.mul(&b.cert(nv, n)?),
            Expr::Div(a, c) => a.cert(nv, n)?.div(*c),
            Expr::Pow(a, k) => {
                let base = a.cert(nv, n)?;
                let mut acc = CertPoly::constant(nv, 1.0);
                for _ in 0..*k {
                    acc = acc.mul(&base);
                }
                acc
            }
            Expr::Sin(_) | Expr::Cos(_) => return None,
        })
    }

    /// Builds an expression from a polynomial over `states ++ controls`.
    pub fn from_poly(p: &MultiPoly, n_state: usize) -> Expr {
        let sym = |j: usize| {
            if j < n_state {
                Sym::State(j)
            } else {
                Sym::Control(j - n_state)
            }
        };
        let mut acc: Option<Expr> = None;
        for (e, c) in p.terms() {
            let mut mono: Option<Expr> = None;
            for (j, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let v = Expr::Var(sym(j));
                let f = if k == 1 { v } else { Expr::Pow(Box::new(v), k) };
                mono = Some(match mono {
                    None => f,
                    Some(m) => Expr::Mul(Box::new(m), Box::new(f)),
                });
            }
            let (neg, mag) = (c < 0.0, c.abs());
            let term = match mono {
                None => Expr::Num(mag),
                Some(m) if mag == 1.0 => m,
                Some(m) => Expr::Mul(Box::new(Expr::Num(mag)), Box::new(m)),
            };
            acc = Some(match (acc, neg) {
                (None, false) => term,
                (None, true) => match term {
                    Expr::Num(v) => Expr::Num(-v),
                    t => Expr::Neg(Box::new(t)),
                },
                (Some(a), false) => Expr::Add(Box::new(a), Box::new(term)),
                (Some(a), true) => Expr::Sub(Box::new(a), Box::new(term)),
            });
        }
        acc.unwrap_or(Expr::Num(0.0))
    }
}

// ---------------------------------------------------------------------------
// Differentiation

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(c) if *c == v)
}

/// Algebraic simplification that never changes the value: constant folding
/// only where the floating-point result is exact, and identity elimination.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => match simplify(a) {
            Expr::Num(c) => num(-c),
            Expr::Neg(b) => *b,
            s => Expr::Neg(Box::new(s)),
        },
        Expr::Add(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (&a, &b) {
                _ if is_num(&a, 0.0) => b,
                _ if is_num(&b, 0.0) => a,
                (Expr::Num(x), Expr::Num(y)) if two_sum(*x, *y).1 == 0.0 => num(x + y),
                (_, Expr::Neg(nb)) => Expr::Sub(Box::new(a), nb.clone()),
                _ => Expr::Add(Box::new(a), Box::new(b)),
            }
        }
        Expr::Sub(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (&a, &b) {
                _ if is_num(&b, 0.0) => a,
                _ if is_num(&a, 0.0) => simplify(&Expr::Neg(Box::new(b))),
                (Expr::Num(x), Expr::Num(y)) if two_sum(*x, -*y).1 == 0.0 => num(x - y),
                (_, Expr::Neg(nb)) => Expr::Add(Box::new(a), nb.clone()),
                _ if a == b => num(0.0),
                _ => Expr::Sub(Box::new(a), Box::new(b)),
            }
        }
        Expr::Mul(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (&a, &b) {
                _ if is_num(&a, 0.0) || is_num(&b, 0.0) => num(0.0),
                _ if is_num(&a, 1.0) => b,
                _ if is_num(&b, 1.0) => a,
                _ if is_num(&a, -1.0) => simplify(&Expr::Neg(Box::new(b))),
                _ if is_num(&b, -1.0) => simplify(&Expr::Neg(Box::new(a))),
                (Expr::Num(x), Expr::Num(y)) if x.mul_add(*y, -(x * y)) == 0.0 => num(x * y),
                (Expr::Neg(na), _) => simplify(&Expr::Neg(Box::new(Expr::Mul(na.clone(), Box::new(b))))),
                (_, Expr::Neg(nb)) => simplify(&Expr::Neg(Box::new(Expr::Mul(Box::new(a), nb.clone())))),
                _ => Expr::Mul(Box::new(a), Box::new(b)),
            }
        }
        Expr::Div(a, c) => match simplify(a) {
            s if *c == 1.0 => s,
            Expr::Num(0.0) => num(0.0),
            s => Expr::Div(Box::new(s), *c),
        },
        Expr::Pow(a, n) => match (simplify(a), n) {
            (_, 0) => num(1.0),
            (s, 1) => s,
            (Expr::Num(v), _) if v == 0.0 || v == 1.0 => num(v),
            (s, _) => Expr::Pow(Box::new(s), *n),
        },
        Expr::Sin(a) => Expr::Sin(Box::new(simplify(a))),
        Expr::Cos(a) => Expr::Cos(Box::new(simplify(a))),
    }
}

/// Partial derivative with respect to state variable `i` (controls are
/// constants), unsimplified.
pub fn derivative(e: &Expr, i: usize) -> Expr {
    let b = Box::new;
    match e {
        Expr::Num(_) | Expr::Var(Sym::Control(_)) => num(0.0),
        Expr::Var(Sym::State(j)) => num(if *j == i { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::Neg(b(derivative(a, i))),
        Expr::Add(x, y) => Expr::Add(b(derivative(x, i)), b(derivative(y, i))),
        Expr::Sub(x, y) => Expr::Sub(b(derivative(x, i)), b(derivative(y, i))),
        Expr::Mul(x, y) => Expr::Add(
            b(Expr::Mul(b(derivative(x, i)), y.clone())),
            b(Expr::Mul(x.clone(), b(derivative(y, i)))),
        ),
        Expr::Div(a, c) => Expr::Div(b(derivative(a, i)), *c),
        Expr::Pow(_, 0) => num(0.0),
        Expr::Pow(a, n) => Expr::Mul(
            b(Expr::Mul(b(num(f64::from(*n))), b(Expr::Pow(a.clone(), n - 1)))),
            b(derivative(a, i)),
        ),
        Expr::Sin(a) => Expr::Mul(b(Expr::Cos(a.clone())), b(derivative(a, i))),
        Expr::Cos(a) => Expr::Mul(b(Expr::Neg(b(Expr::Sin(a.clone())))), b(derivative(a, i))),
    }
}

/// `Σ_i (∂e/∂x_i) · field_i`, simplified. Polynomial results whose expansion
/// is exact in floating point are returned in expanded canonical form, so
/// cancellations such as `2·x1·x2 − 2·x2·x1` vanish.
pub fn lie_derivative(e: &Expr, field: &[Expr]) -> Expr {
    let mut acc = num(0.0);
    for (i, f) in field.iter().enumerate() {
        let d = simplify(&derivative(e, i));
        if is_num(&d, 0.0) {
            continue;
        }
        acc = Expr::Add(Box::new(acc), Box::new(Expr::Mul(Box::new(d), Box::new(f.clone()))));
    }
    let s = simplify(&acc);
    let n = field.len();
    let nv = n + max_control(&s).map_or(0, |c| c + 1);
    if let Some(cp) = s.cert(nv, n) {
        if cp.is_exact() {
            return Expr::from_poly(&cp.value(), n);
        }
    }
    s
}

fn max_control(e: &Expr) -> Option<usize> {
    match e {
        Expr::Num(_) | Expr::Var(Sym::State(_)) => None,
        Expr::Var(Sym::Control(i)) => Some(*i),
        Expr::Neg(a) | Expr::Div(a, _) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) => max_control(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => max_control(a).max(max_control(b)),
    }
}

// ---------------------------------------------------------------------------
// Certified polynomial expansion

/// A polynomial whose coefficients are known up to a per-coefficient error:
/// the exact coefficient of `x^e` lies within `err_e` of the stored value.
#[derive(Clone, Debug, PartialEq)]
pub struct CertPoly {
    nvars: usize,
    terms: BTreeMap<Exponents, (f64, f64)>,
}

impl CertPoly {
    fn constant(nvars: usize, c: f64) -> Self {
        let mut t = BTreeMap::new();
        if c != 0.0 {
            t.insert(Exponents::from_elem(0, nvars), (c, 0.0));
        }
        Self { nvars, terms: t }
    }

    fn var(nvars: usize, i: usize) -> Self {
        let mut e = Exponents::from_elem(0, nvars);
        e[i] = 1;
        let mut t = BTreeMap::new();
        t.insert(e, (1.0, 0.0));
        Self { nvars, terms: t }
    }

    fn accumulate(&mut self, e: Exponents, v: f64, err: f64) {
        let slot = self.terms.entry(e).or_insert((0.0, 0.0));
        let (s, r) = two_sum(slot.0, v);
        slot.0 = s;
        slot.1 = add_up(add_up(slot.1, err), r.abs());
    }

    fn add(&self, other: &CertPoly) -> CertPoly {
        let mut out = self.clone();
        for (e, &(v, err)) in &other.terms {
            out.accumulate(e.clone(), v, err);
        }
        out.prune();
        out
    }

    fn scale(&self, c: f64) -> CertPoly {
        let mut out = CertPoly::constant(self.nvars, 0.0);
        for (e, &(v, err)) in &self.terms {
            let p = v * c;
            out.accumulate(e.clone(), p, add_up(v.mul_add(c, -p).abs(), mul_up(err, c.abs())));
        }
        out.prune();
        out
    }

    fn div(&self, c: f64) -> CertPoly {
        let q = 1.0 / c;
        if c.mul_add(q, -1.0) == 0.0 {
            return self.scale(q);
        }
        // v/c = v·q + v·(1/c − q) with |1/c − q| <= |q|·ε/2.
        let qe = mul_up(q.abs(), f64::EPSILON);
        let mut out = CertPoly::constant(self.nvars, 0.0);
        for (e, &(v, err)) in &self.terms {
            let p = v * q;
            let extra = add_up(mul_up(v.abs(), qe), mul_up(err, add_up(q.abs(), qe)));
            out.accumulate(e.clone(), p, add_up(v.mul_add(q, -p).abs(), extra));
        }
        out.prune();
        out
    }

    fn mul(&self, other: &CertPoly) -> CertPoly {
        let mut out = CertPoly::constant(self.nvars, 0.0);
        for (ea, &(va, da)) in &self.terms {
            for (eb, &(vb, db)) in &other.terms {
                let p = va * vb;
                let mut err = va.mul_add(vb, -p).abs();
                if da != 0.0 || db != 0.0 {
                    err = add_up(err, mul_up(va.abs(), db));
                    err = add_up(err, mul_up(da, vb.abs()));
                    err = add_up(err, mul_up(da, db));
                }
                let e: Exponents = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.accumulate(e, p, err);
            }
        }
        out.prune();
        out
    }

    fn derivative(&self, i: usize) -> CertPoly {
        let mut out = CertPoly::constant(self.nvars, 0.0);
        for (e, &(v, err)) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let k = f64::from(e[i]);
            let mut ne = e.clone();
            ne[i] -= 1;
            let p = v * k;
            out.accumulate(ne, p, add_up(v.mul_add(k, -p).abs(), mul_up(err, k)));
        }
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, (v, err)| *v != 0.0 || *err != 0.0);
    }

    /// Lie derivative along a polynomial field over the first `field.len()`
    /// variables.
    pub fn lie(&self, field: &[CertPoly]) -> CertPoly {
        let mut acc = CertPoly::constant(self.nvars, 0.0);
        for (i, f) in field.iter().enumerate() {
            let d = self.derivative(i);
            if !d.terms.is_empty() {
                acc = acc.add(&d.mul(f));
            }
        }
        acc
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(|&(_, err)| err == 0.0)
    }

    /// The stored coefficients over the given variables.
    pub fn value_over(&self, vars: Vars) -> MultiPoly {
        MultiPoly::from_terms(vars, self.terms.iter().map(|(e, &(v, _))| (e.clone(), v)))
            .expect("exponent lengths match")
    }

    fn value(&self) -> MultiPoly {
        let names: Vec<String> = (0..self.nvars).map(|j| format!("v{j}")).collect();
        self.value_over(Vars::new(names))
    }

    /// Upper bound on the total coefficient error over a region where
    /// `|x_j| <= mags[j]`.
    pub fn error_bound(&self, mags: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, &(_, err)) in &self.terms {
            if err != 0.0 {
                acc = add_up(acc, mul_up(err, monomial_mag(e, mags)));
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Time-Taylor coefficients

#[derive(Clone, Debug)]
enum LieTerm {
    Poly { poly: MultiPoly, cert: CertPoly },
    Expr(Expr),
}

/// Iterated Lie derivatives `L^i(x_j)` of each state variable along the
/// dynamics, for `i = 0..=order + 1`. Controls are constants.
#[derive(Clone, Debug)]
pub struct LieTable {
    terms: Vec<Vec<LieTerm>>,
    n_state: usize,
}

impl LieTable {
    pub fn new(rhs: &[Expr], symbols: &Symbols, order: u32) -> Result<Self> {
        let n = symbols.state.len();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                what: "right-hand sides",
                expected: n,
                found: rhs.len(),
            });
        }
        let vars = symbols.poly_vars();
        let certs: Option<Vec<CertPoly>> = rhs.iter().map(|f| f.to_poly(symbols)).collect();
        let mut terms = Vec::with_capacity(n);
        for j in 0..n {
            let mut row = Vec::with_capacity(order as usize + 2);
            match &certs {
                Some(field) => {
                    let mut cur = CertPoly::var(vars.len(), j);
                    for _ in 0..=order + 1 {
                        row.push(LieTerm::Poly {
                            poly: cur.value_over(vars.clone()),
                            cert: cur.clone(),
                        });
                        cur = cur.lie(field);
                    }
                }
                None => {
                    let mut cur = Expr::Var(Sym::State(j));
                    for _ in 0..=order + 1 {
                        row.push(LieTerm::Expr(cur.clone()));
                        cur = lie_derivative(&cur, rhs);
                    }
                }
            }
            terms.push(row);
        }
        Ok(Self { terms, n_state: n })
    }

    /// Highest available derivative order.
    pub fn max_order(&self) -> u32 {
        self.terms.first().map_or(0, |r| r.len() as u32 - 1)
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms
            .iter()
            .flatten()
            .all(|t| matches!(t, LieTerm::Poly { .. }))
    }

    /// `L^i(x_j)` evaluated on Taylor models for states and controls.
    pub fn eval_tm(&self, j: usize, i: u32, x: &[TaylorModel], u: &[TaylorModel], order: u32) -> Result<TaylorModel> {
        match &self.terms[j][i as usize] {
            LieTerm::Expr(e) => e.eval_tm(x, u, order),
            LieTerm::Poly { poly, cert } => {
                let args: Vec<TaylorModel> = x.iter().chain(u).cloned().collect();
                let tm = compose_poly(poly, &args, order)?;
                let mags: Vec<f64> = args.iter().map(|a| a.enclosure().mag()).collect();
                Ok(tm.add_rem(Interval::symmetric(cert.error_bound(&mags))))
            }
        }
    }

    /// `L^i(x_j)` enclosed over state box `x` and control box `u`.
    pub fn eval_interval(&self, j: usize, i: u32, x: &IntervalBox, u: &IntervalBox) -> Result<Interval> {
        match &self.terms[j][i as usize] {
            LieTerm::Expr(e) => e.eval_interval(x, u),
            LieTerm::Poly { poly, cert } => {
                let b = IntervalBox::new(x.iter().chain(u.iter()).copied().collect());
                let mags: Vec<f64> = b.iter().map(Interval::mag).collect();
                Ok(poly.bound(&b)? + Interval::symmetric(cert.error_bound(&mags)))
            }
        }
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }
}

/// The plant of a closed-loop system with its verification problem.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub symbols: Symbols,
    pub rhs: Vec<Expr>,
    pub control_step: f64,
    pub steps: usize,
    pub init: IntervalBox,
    /// Unconstrained dimensions are the entire real line.
    pub goal: IntervalBox,
}

impl SystemSpec {
    pub fn new(
        symbols: Symbols,
        rhs: Vec<Expr>,
        control_step: f64,
        steps: usize,
        init: IntervalBox,
        goal: IntervalBox,
    ) -> Result<Self> {
        let n = symbols.state.len();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                what: "dynamics",
                expected: n,
                found: rhs.len(),
            });
        }
        if !(control_step > 0.0 && control_step.is_finite()) {
            return Err(Error::InvalidArgument(format!("control step must be positive, got {control_step}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("step count must be at least 1".into()));
        }
        for (what, b) in [("init box", &init), ("goal box", &goal)] {
            if b.dim() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: b.dim(),
                });
            }
        }
        Ok(Self {
            symbols,
            rhs,
            control_step,
            steps,
            init,
            goal,
        })
    }

    /// Parses the right-hand sides from strings.
    pub fn parse(
        state: Vec<String>,
        control: Vec<String>,
        dynamics: &[&str],
        control_step: f64,
        steps: usize,
        init: IntervalBox,
        goal: IntervalBox,
    ) -> Result<Self> {
        let symbols = Symbols::new(state, control)?;
        let rhs = dynamics
            .iter()
            .map(|s| parse_expr(s, &symbols))
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols, rhs, control_step, steps, init, goal)
    }

    pub fn n_state(&self) -> usize {
        self.symbols.state.len()
    }

    pub fn n_control(&self) -> usize {
        self.symbols.control.len()
    }

    /// `f(x, u)`.
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.rhs.iter().map(|e| e.eval(x, u)).collect()
    }

    pub fn eval_interval(&self, x: &IntervalBox, u: &IntervalBox) -> Result<IntervalBox> {
        Ok(IntervalBox::new(
            self.rhs
                .iter()
                .map(|e| e.eval_interval(x, u))
                .collect::<Result<Vec<_>>>()?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms() -> Symbols {
        Symbols::new(vec!["x1".into(), "x2".into()], vec!["u".into()]).unwrap()
    }

    fn p(s: &str) -> Expr {
        parse_expr(s, &syms()).unwrap()
    }

    fn x1() -> Box<Expr> {
        Box::new(Expr::Var(Sym::State(0)))
    }

    fn x2() -> Box<Expr> {
        Box::new(Expr::Var(Sym::State(1)))
    }

    #[test]
    fn parse_examples() {
        let e = p("u*x2^2 - x1");
        let want = Expr::Sub(
            Box::new(Expr::Mul(
                Box::new(Expr::Var(Sym::Control(0))),
                Box::new(Expr::Pow(x2(), 2)),
            )),
            x1(),
        );
        assert_eq!(e, want);

        let e = p("-x1*(0.1+(x1+x2)^2)");
        let want = Expr::Mul(
            Box::new(Expr::Neg(x1())),
            Box::new(Expr::Add(
                Box::new(Expr::Num(0.1)),
                Box::new(Expr::Pow(Box::new(Expr::Add(x1(), x2())), 2)),
            )),
        );
        assert_eq!(e, want);

        let err = parse_expr("x2^(1/2)", &syms()).unwrap_err();
        assert!(matches!(err, Error::Expr { offset: 3, .. }), "{err}");
    }

    #[test]
    fn parse_precedence_and_errors() {
        assert_eq!(p("-x1^2"), Expr::Neg(Box::new(Expr::Pow(x1(), 2))));
        assert_eq!(p("-2"), Expr::Num(-2.0));
        assert_eq!(p("-2^2"), Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Num(2.0)), 2))));
        assert_eq!(p("x1 - x2 - u"), p("(x1 - x2) - u"));
        assert_eq!(p("x1/4"), Expr::Div(x1(), 4.0));
        assert_eq!(p("1e-3*x1"), Expr::Mul(Box::new(Expr::Num(1e-3)), x1()));

        let bad = |s: &str| parse_expr(s, &syms()).unwrap_err();
        assert!(matches!(bad("x1 + y"), Error::Expr { offset: 5, .. }));
        assert!(matches!(bad("x1 / x2"), Error::Expr { offset: 5, .. }));
        assert!(matches!(bad("x1 / 0"), Error::Expr { .. }));
        assert!(matches!(bad("x1 $ 2"), Error::Expr { offset: 3, .. }));
        assert!(matches!(bad("x1 x2"), Error::Expr { offset: 3, .. }));
        assert!(matches!(bad("(x1"), Error::Expr { offset: 3, .. }));
        assert!(matches!(bad("x1^-1"), Error::Expr { .. }));
    }

    #[test]
    fn print_roundtrip() {
        let s = syms();
        for text in [
            "u*x2^2 - x1",
            "-x1*(0.1+(x1+x2)^2)",
            "(u+x1)*(0.1+(x1+x2)^2)",
            "x2 - x1^3",
            "-x1 + x2 - (x1 - x2)",
            "-(2)*x1 + -3*x2",
            "(-2)^2 - --x1",
            "x1/3 - sin(x2)*cos(-x1)",
            "x1*(x2*u)",
            "-(x1*x2)^3",
        ] {
            let e = parse_expr(text, &s).unwrap();
            let printed = e.display(&s).to_string();
            let back = parse_expr(&printed, &s).unwrap();
            assert_eq!(back, e, "{text} -> {printed}");
        }
    }

    #[test]
    fn eval_backends() {
        assert_eq!(p("x1+x2").eval(&[1.0, 2.0], &[0.0]).unwrap(), 3.0);
        let b = IntervalBox::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let u = IntervalBox::point(&[0.0]);
        let iv = p("x1*x2").eval_interval(&b, &u).unwrap();
        assert_eq!((iv.lo(), iv.hi()), (0.0, 1.0));
        assert!(matches!(p("u").eval(&[1.0, 2.0], &[]), Err(Error::UnboundVariable(_))));
    }

    #[test]
    fn tm_sin_delegates() {
        let s = Symbols::new(vec!["x".into()], vec![]).unwrap();
        let e = parse_expr("sin(x)", &s).unwrap();
        let dom = IntervalBox::from_bounds(&[(-0.1, 0.1)]).unwrap();
        let x = TaylorModel::var(Vars::new(["x"]), dom, 0, 3).unwrap();
        assert_eq!(e.eval_tm(std::slice::from_ref(&x), &[], 3).unwrap(), x.sin(3).unwrap());
    }

    #[test]
    fn lie_examples() {
        let rot = [p("x2"), p("-x1")];
        assert_eq!(lie_derivative(&p("x1"), &rot), p("x2"));
        assert_eq!(lie_derivative(&p("x1^2 + x2^2"), &rot), Expr::Num(0.0));
        let f1 = [p("x2"), p("u*x2^2 - x1")];
        let l = lie_derivative(&p("x2"), &f1);
        for (x, u) in [([0.3, -0.7], 0.5), ([1.5, 2.0], -1.0)] {
            assert_eq!(l.eval(&x, &[u]).unwrap(), f1[1].eval(&x, &[u]).unwrap());
        }
    }

    #[test]
    fn cert_poly_tracks_inexact_coefficients() {
        let s = syms();
        let exact = p("(x1 + 2*x2)^3 - u").to_poly(&s).unwrap();
        assert!(exact.is_exact());
        let inexact = p("(0.1 + x1)^3/3").to_poly(&s).unwrap();
        assert!(!inexact.is_exact());
        let v = inexact.value_over(s.poly_vars());
        let x = [0.7, 0.0, 0.0];
        let want = (0.1f64 + 0.7).powi(3) / 3.0;
        assert!((v.eval(&x).unwrap() - want).abs() <= 1e-15 + inexact.error_bound(&[1.0, 1.0, 1.0]));
        assert!(p("sin(x1)").to_poly(&s).is_none());
    }

    #[test]
    fn lie_table_matches_symbolic() {
        let s = syms();
        let f = [p("x2"), p("u*x2^2 - x1")];
        let table = LieTable::new(&f, &s, 3).unwrap();
        assert!(table.is_polynomial());
        let mut e = p("x1");
        let pt = IntervalBox::point(&[0.4, -0.3]);
        let u = IntervalBox::point(&[0.2]);
        for i in 0..=4 {
            let sym = e.eval(&[0.4, -0.3], &[0.2]).unwrap();
            let iv = table.eval_interval(0, i, &pt, &u).unwrap();
            assert!((iv.mid() - sym).abs() < 1e-12, "order {i}: {iv} vs {sym}");
            e = lie_derivative(&e, &f);
        }
    }
}
