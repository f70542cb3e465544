//! Time-Taylor coefficients of ODE solutions by automatic differentiation.
//!
//! For `ẋ = f(x, u)` with `u` constant, the coefficients `x_[i]` of
//! `x(t) = Σ x_[i] tⁱ` obey `x_[i+1] = f_[i] / (i + 1)`, where `f_[i]` is the
//! i-th coefficient of `f(x(t), u)`. The right-hand side is compiled into a
//! tape and its coefficients are propagated with Cauchy products, so no
//! symbolic Lie derivative is ever expanded. `x_[i]` equals `L^i(x) / i!`.

use crate::dynamics::{reciprocal, Expr, Sym};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::taylor::TaylorModel;

/// Arithmetic needed by the recursion.
pub(crate) trait Coeff: Clone + Sized {
    fn constant_like(&self, c: f64) -> Result<Self>;
    fn add(&self, o: &Self) -> Result<Self>;
    fn sub(&self, o: &Self) -> Result<Self>;
    fn neg(&self) -> Self;
    fn mul(&self, o: &Self) -> Result<Self>;
    /// Multiplication by a small integer.
    fn times(&self, k: u32) -> Self;
    fn div_int(&self, k: u32) -> Result<Self>;
    fn div_const(&self, c: f64) -> Result<Self>;
    fn sin(&self) -> Result<Self>;
    fn cos(&self) -> Result<Self>;
}

impl Coeff for TaylorModel {
    fn constant_like(&self, c: f64) -> Result<Self> {
        TaylorModel::constant(self.vars().clone(), self.domain().clone(), c, self.order())
    }
    fn add(&self, o: &Self) -> Result<Self> {
        TaylorModel::add(self, o)
    }
    fn sub(&self, o: &Self) -> Result<Self> {
        TaylorModel::sub(self, o)
    }
    fn neg(&self) -> Self {
        TaylorModel::neg(self)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        TaylorModel::mul(self, o, self.order())
    }
    fn times(&self, k: u32) -> Self {
        self.scale(f64::from(k))
    }
    fn div_int(&self, k: u32) -> Result<Self> {
        self.div_scalar(f64::from(k))
    }
    fn div_const(&self, c: f64) -> Result<Self> {
        self.div_scalar(c)
    }
    fn sin(&self) -> Result<Self> {
        TaylorModel::sin(self, self.order())
    }
    fn cos(&self) -> Result<Self> {
        TaylorModel::cos(self, self.order())
    }
}

impl Coeff for Interval {
    fn constant_like(&self, c: f64) -> Result<Self> {
        Ok(Interval::point(c))
    }
    fn add(&self, o: &Self) -> Result<Self> {
        Ok(*self + *o)
    }
    fn sub(&self, o: &Self) -> Result<Self> {
        Ok(*self - *o)
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        Ok(if self == o { self.sqr() } else { *self * *o })
    }
    fn times(&self, k: u32) -> Self {
        *self * f64::from(k)
    }
    fn div_int(&self, k: u32) -> Result<Self> {
        Ok(*self * reciprocal(f64::from(k)))
    }
    fn div_const(&self, c: f64) -> Result<Self> {
        Ok(*self * reciprocal(c))
    }
    fn sin(&self) -> Result<Self> {
        Ok(Interval::sin(self))
    }
    fn cos(&self) -> Result<Self> {
        Ok(Interval::cos(self))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    Const(f64),
    State(usize),
    Control(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Sqr(usize),
    DivC(usize, f64),
    /// Sine of the argument; the cosine lives in the next slot.
    Sin(usize),
    /// Placeholder slot filled by the preceding `Sin`.
    CosOf(usize),
}

/// Right-hand side compiled for coefficient propagation, with common
/// subexpressions shared.
#[derive(Clone, Debug)]
pub struct SeriesTape {
    nodes: Vec<Node>,
    outputs: Vec<usize>,
}

impl SeriesTape {
    pub fn new(rhs: &[Expr]) -> Self {
        let mut tape = SeriesTape {
            nodes: Vec::new(),
            outputs: Vec::new(),
        };
        tape.outputs = rhs.iter().map(|e| tape.compile(e)).collect();
        tape
    }

    fn push(&mut self, node: Node) -> usize {
        if let Some(i) = self.nodes.iter().position(|n| *n == node) {
            return i;
        }
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn sincos(&mut self, a: usize) -> usize {
        if let Some(i) = self.nodes.iter().position(|n| *n == Node::Sin(a)) {
            return i;
        }
        self.nodes.push(Node::Sin(a));
        self.nodes.push(Node::CosOf(a));
        self.nodes.len() - 2
    }

    fn compile(&mut self, e: &Expr) -> usize {
        match e {
            Expr::Num(v) => self.push(Node::Const(*v)),
            Expr::Var(Sym::State(j)) => self.push(Node::State(*j)),
            Expr::Var(Sym::Control(j)) => self.push(Node::Control(*j)),
            Expr::Neg(a) => {
                let a = self.compile(a);
                self.push(Node::Neg(a))
            }
            Expr::Add(a, b) => {
                let (a, b) = (self.compile(a), self.compile(b));
                self.push(Node::Add(a, b))
            }
            Expr::Sub(a, b) => {
                let (a, b) = (self.compile(a), self.compile(b));
                self.push(Node::Sub(a, b))
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.compile(a), self.compile(b));
                if a == b {
                    self.push(Node::Sqr(a))
                } else {
                    self.push(Node::Mul(a, b))
                }
            }
            Expr::Div(a, c) => {
                let a = self.compile(a);
                self.push(Node::DivC(a, *c))
            }
            Expr::Pow(a, n) => {
                let a = self.compile(a);
                self.pow(a, *n)
            }
            Expr::Sin(a) => {
                let a = self.compile(a);
                self.sincos(a)
            }
            Expr::Cos(a) => {
                let a = self.compile(a);
                self.sincos(a) + 1
            }
        }
    }

    fn pow(&mut self, a: usize, n: u32) -> usize {
        match n {
            0 => self.push(Node::Const(1.0)),
            1 => a,
            _ => {
                let half = self.pow(a, n / 2);
                let sq = self.push(Node::Sqr(half));
                if n % 2 == 1 {
                    self.push(Node::Mul(sq, a))
                } else {
                    sq
                }
            }
        }
    }

    pub fn n_state(&self) -> usize {
        self.outputs.len()
    }

    /// Coefficients `x_[0..=k]` of every state for the initial values `x0`
    /// and constant controls `u`. `None` marks an exact zero.
    pub(crate) fn series<T: Coeff>(&self, x0: &[T], u: &[T], k: usize) -> Result<Vec<Vec<Option<T>>>> {
        let n = self.outputs.len();
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial values",
                expected: n,
                found: x0.len(),
            });
        }
        let like = x0
            .first()
            .ok_or_else(|| Error::InvalidArgument("series needs at least one state".into()))?;
        let mut xs: Vec<Vec<Option<T>>> = x0.iter().map(|v| vec![Some(v.clone())]).collect();
        let mut c: Vec<Vec<Option<T>>> = vec![Vec::with_capacity(k); self.nodes.len()];
        for i in 0..k {
            for (id, node) in self.nodes.iter().enumerate() {
                let v = match *node {
                    Node::Const(v) => (i == 0 && v != 0.0).then(|| like.constant_like(v)).transpose()?,
                    Node::State(j) => xs[j][i].clone(),
                    Node::Control(j) => {
                        if i == 0 {
                            Some(u.get(j).cloned().ok_or_else(|| {
                                Error::UnboundVariable(format!("control #{j}"))
                            })?)
                        } else {
                            None
                        }
                    }
                    Node::Neg(a) => c[a][i].as_ref().map(T::neg),
                    Node::Add(a, b) => opt2(&c[a][i], &c[b][i], T::add, |y| Ok(y.clone()))?,
                    Node::Sub(a, b) => opt2(&c[a][i], &c[b][i], T::sub, |y| Ok(y.neg()))?,
                    Node::Mul(a, b) => cauchy(&c[a], &c[b], i)?,
                    Node::Sqr(a) => cauchy_sqr(&c[a], i)?,
                    Node::DivC(a, v) => c[a][i].as_ref().map(|y| y.div_const(v)).transpose()?,
                    Node::Sin(a) => {
                        let (s, co) = if i == 0 {
                            match &c[a][0] {
                                Some(y) => (Some(y.sin()?), Some(y.cos()?)),
                                None => (None, Some(like.constant_like(1.0)?)),
                            }
                        } else {
                            // s_i = (1/i) Σ m a_m c_{i−m},  c_i = −(1/i) Σ m a_m s_{i−m}
                            let mut s = None;
                            let mut co = None;
                            for m in 1..=i {
                                if let Some(am) = &c[a][m] {
                                    let am = am.times(m as u32);
                                    if let Some(cc) = &c[id + 1][i - m] {
                                        s = acc(s, am.mul(cc)?)?;
                                    }
                                    if let Some(ss) = &c[id][i - m] {
                                        co = acc(co, am.mul(ss)?)?;
                                    }
                                }
                            }
                            (
                                s.map(|v| v.div_int(i as u32)).transpose()?,
                                co.map(|v| v.div_int(i as u32).map(|w| w.neg())).transpose()?,
                            )
                        };
                        c[id + 1].push(co);
                        s
                    }
                    Node::CosOf(_) => continue,
                };
                c[id].push(v);
            }
            for (j, &out) in self.outputs.iter().enumerate() {
                let next = c[out][i].as_ref().map(|f| f.div_int(i as u32 + 1)).transpose()?;
                xs[j].push(next);
            }
        }
        Ok(xs)
    }
}

fn acc<T: Coeff>(sum: Option<T>, v: T) -> Result<Option<T>> {
    Ok(Some(match sum {
        None => v,
        Some(s) => s.add(&v)?,
    }))
}

fn opt2<T: Coeff>(
    a: &Option<T>,
    b: &Option<T>,
    both: impl Fn(&T, &T) -> Result<T>,
    only_b: impl Fn(&T) -> Result<T>,
) -> Result<Option<T>> {
    Ok(match (a, b) {
        (Some(x), Some(y)) => Some(both(x, y)?),
        (Some(x), None) => Some(x.clone()),
        (None, Some(y)) => Some(only_b(y)?),
        (None, None) => None,
    })
}

fn cauchy<T: Coeff>(a: &[Option<T>], b: &[Option<T>], i: usize) -> Result<Option<T>> {
    let mut sum = None;
    for m in 0..=i {
        if let (Some(x), Some(y)) = (&a[m], &b[i - m]) {
            sum = acc(sum, x.mul(y)?)?;
        }
    }
    Ok(sum)
}

fn cauchy_sqr<T: Coeff>(a: &[Option<T>], i: usize) -> Result<Option<T>> {
    let mut sum = None;
    for m in 0..i.div_ceil(2) {
        if let (Some(x), Some(y)) = (&a[m], &a[i - m]) {
            sum = acc(sum, x.mul(y)?)?;
        }
    }
    let mut sum = sum.map(|s| s.times(2));
    if i.is_multiple_of(2) {
        if let Some(x) = &a[i / 2] {
            sum = acc(sum, x.mul(x)?)?;
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{lie_derivative, parse_expr, Symbols};

    fn factorial(i: u32) -> f64 {
        (1..=i).map(f64::from).product()
    }

    fn symbols(n: usize) -> Symbols {
        Symbols::new((1..=n).map(|i| format!("x{i}")).collect(), vec!["u".into()]).unwrap()
    }

    fn check_against_lie(rhs: &[&str], x: &[f64], u: f64, k: usize) {
        let sy = symbols(rhs.len());
        let f: Vec<Expr> = rhs.iter().map(|s| parse_expr(s, &sy).unwrap()).collect();
        let tape = SeriesTape::new(&f);
        let x0: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
        let coeffs = tape.series(&x0, &[Interval::point(u)], k).unwrap();
        for j in 0..rhs.len() {
            let mut l = Expr::Var(Sym::State(j));
            for i in 0..=k {
                let expect = l.eval(x, &[u]).unwrap() / factorial(i as u32);
                let got = coeffs[j][i].unwrap_or(Interval::zero());
                let tol = 1e-12 * (1.0 + expect.abs());
                assert!(
                    got.inflate(tol).contains(expect),
                    "state {j} order {i}: {got} vs {expect}"
                );
                l = lie_derivative(&l, &f);
            }
        }
    }

    #[test]
    fn exponential_coefficients() {
        let sy = symbols(1);
        let tape = SeriesTape::new(&[parse_expr("x1", &sy).unwrap()]);
        let c = tape.series(&[Interval::point(1.0)], &[Interval::point(0.0)], 6).unwrap();
        for i in 0..=6 {
            assert!(c[0][i].unwrap().contains(1.0 / factorial(i as u32)));
        }
    }

    #[test]
    fn matches_lie_derivatives() {
        check_against_lie(&["x2", "u*x2^2 - x1"], &[0.85, 0.55], -0.4, 7);
        check_against_lie(&["-x1*(0.1 + (x1 + x2)^2)", "(u + x1)*(0.1 + (x1 + x2)^2)"], &[0.8, 0.45], 0.3, 6);
        check_against_lie(&["x2", "-x1 + 0.1*sin(x3)", "x4", "u"], &[-0.76, -0.44, 0.52, -0.29], 0.7, 6);
        check_against_lie(&["cos(x1)*x1 - x1^3/3"], &[0.4], 0.0, 6);
    }

    #[test]
    fn shared_subexpressions() {
        let sy = symbols(2);
        let f: Vec<Expr> = ["-x1*(0.1 + (x1 + x2)^2)", "(u + x1)*(0.1 + (x1 + x2)^2)"]
            .iter()
            .map(|s| parse_expr(s, &sy).unwrap())
            .collect();
        let tape = SeriesTape::new(&f);
        let squares = tape.nodes.iter().filter(|n| matches!(n, Node::Sqr(_))).count();
        assert_eq!(squares, 1);
    }
}
