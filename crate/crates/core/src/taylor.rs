//! Taylor models: a polynomial plus an interval remainder over a domain box.
//!
//! A model `(p, I)` over `D` represents every function `f` with
//! `f(x) ∈ p(x) + I` for all `x ∈ D`. All operations preserve that contract,
//! including the floating-point rounding of polynomial coefficients, which is
//! measured exactly (TwoSum / FMA residuals) and moved into the remainder.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, Interval, IntervalBox};
use crate::poly::{MultiPoly, Vars};

/// Default truncation order.
pub const DEFAULT_ORDER: u32 = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorModel {
    poly: MultiPoly,
    rem: Interval,
    domain: IntervalBox,
    order: u32,
}

impl TaylorModel {
    /// Builds a model, moving terms above `order` into the remainder.
    pub fn new(poly: MultiPoly, rem: Interval, domain: IntervalBox, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("Taylor model order must be at least 1".into()));
        }
        if domain.dim() != poly.nvars() {
            return Err(Error::DimensionMismatch {
                what: "Taylor model domain",
                expected: poly.nvars(),
                found: domain.dim(),
            });
        }
        let tm = Self {
            poly,
            rem,
            domain,
            order,
        };
        Ok(tm.truncate(order))
    }

    pub fn constant(vars: Vars, domain: IntervalBox, c: f64, order: u32) -> Result<Self> {
        Self::new(MultiPoly::constant(vars, c), Interval::zero(), domain, order)
    }

    /// The identity model for variable `i`.
    pub fn var(vars: Vars, domain: IntervalBox, i: usize, order: u32) -> Result<Self> {
        Self::new(MultiPoly::var(vars, i), Interval::zero(), domain, order)
    }

    /// Midpoint constant with the rest of `iv` as remainder.
    pub fn from_interval(vars: Vars, domain: IntervalBox, iv: Interval, order: u32) -> Result<Self> {
        let m = iv.mid();
        let rem = iv - Interval::point(m);
        Self::new(MultiPoly::constant(vars, m), rem, domain, order)
    }

    pub fn poly(&self) -> &MultiPoly {
        &self.poly
    }

    pub fn rem(&self) -> Interval {
        self.rem
    }

    pub fn domain(&self) -> &IntervalBox {
        &self.domain
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn vars(&self) -> &Vars {
        self.poly.vars()
    }

    fn mags(&self) -> Vec<f64> {
        self.domain.iter().map(Interval::mag).collect()
    }

    fn check(&self, other: &TaylorModel) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        if self.vars() != other.vars() {
            return Err(Error::VariableMismatch {
                left: self.vars().names().to_vec(),
                right: other.vars().names().to_vec(),
            });
        }
        Ok(())
    }

    fn with(&self, poly: MultiPoly, rem: Interval, rounding: f64) -> TaylorModel {
        TaylorModel {
            poly,
            rem: rem + Interval::symmetric(rounding),
            domain: self.domain.clone(),
            order: self.order,
        }
    }

    /// Interval enclosure of the model's range over its domain.
    pub fn enclosure(&self) -> Interval {
        self.poly.bound(&self.domain).expect("domain checked at construction") + self.rem
    }

    /// Sound enclosure of the model's values at one point of the domain.
    pub fn eval_enclosure(&self, x: &[f64]) -> Result<Interval> {
        Ok(self.poly.bound(&IntervalBox::point(x))? + self.rem)
    }

    /// Widens the remainder by `iv`.
    pub fn add_rem(&self, iv: Interval) -> TaylorModel {
        let mut out = self.clone();
        out.rem = out.rem + iv;
        out
    }

    /// Moves terms of total degree above `order` into the remainder.
    pub fn truncate(&self, order: u32) -> TaylorModel {
        let (kept, dropped) = self.poly.truncate(order);
        let mut out = self.with(kept, self.rem, 0.0);
        out.order = order;
        if !dropped.is_zero() {
            out.rem = out.rem + dropped.bound(&self.domain).expect("domain checked at construction");
        }
        out
    }

    pub fn add(&self, other: &TaylorModel) -> Result<TaylorModel> {
        self.check(other)?;
        let (p, err) = self.poly.add_tracked(&other.poly, &self.mags())?;
        Ok(self.with(p, self.rem + other.rem, err))
    }

    pub fn sub(&self, other: &TaylorModel) -> Result<TaylorModel> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> TaylorModel {
        self.with(self.poly.scale(-1.0), -self.rem, 0.0)
    }

    pub fn scale(&self, c: f64) -> TaylorModel {
        let (p, err) = self.poly.scale_tracked(c, &self.mags());
        self.with(p, self.rem.scale(c), err)
    }

    pub fn add_scalar(&self, c: f64) -> TaylorModel {
        let k = MultiPoly::constant(self.vars().clone(), c);
        let (p, err) = self
            .poly
            .add_tracked(&k, &self.mags())
            .expect("same variables by construction");
        self.with(p, self.rem, err)
    }

    /// Division by a nonzero constant.
    pub fn div_scalar(&self, c: f64) -> Result<TaylorModel> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("division by {c}")));
        }
        let q = 1.0 / c;
        let out = self.scale(q);
        if c.mul_add(q, -1.0) == 0.0 {
            return Ok(out);
        }
        // |1/c - q| <= ulp(q) / 2.
        let slack = mul_up(self.enclosure().mag(), mul_up(q.abs(), f64::EPSILON));
        Ok(out.add_rem(Interval::symmetric(slack)))
    }

    /// Product truncated at total degree `order`.
    pub fn mul(&self, other: &TaylorModel, order: u32) -> Result<TaylorModel> {
        self.check(other)?;
        let (kept, dropped, err) = self.poly.mul_tracked(&other.poly, order, &self.mags())?;
        let ba = self.poly.bound(&self.domain)?;
        let bb = other.poly.bound(&self.domain)?;
        let mut rem = ba * other.rem + bb * self.rem + self.rem * other.rem;
        if !dropped.is_zero() {
            rem = rem + dropped.bound(&self.domain)?;
        }
        let mut out = self.with(kept, rem, err);
        out.order = order;
        Ok(out)
    }

    /// `self^n` by repeated squaring.
    pub fn powi(&self, n: u32, order: u32) -> Result<TaylorModel> {
        let mut acc = TaylorModel::constant(self.vars().clone(), self.domain.clone(), 1.0, order)?;
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base, order)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base, order)?;
            }
        }
        Ok(acc)
    }

    pub fn sin(&self, order: u32) -> Result<TaylorModel> {
        self.periodic(order, Trig::Sin)
    }

    pub fn cos(&self, order: u32) -> Result<TaylorModel> {
        self.periodic(order, Trig::Cos)
    }

    /// Taylor expansion of sin/cos about the midpoint of the enclosure, with
    /// the Lagrange remainder `r^{k+1}/(k+1)!` (all derivatives are bounded
    /// by 1). Coefficients are enclosed in intervals and their radii weighted
    /// by `r^i` go into the remainder.
    fn periodic(&self, order: u32, f: Trig) -> Result<TaylorModel> {
        let enc = self.enclosure();
        let vars = self.vars().clone();
        if !enc.is_finite() || enc.width() >= 2.0 {
            let full = Interval::raw(-1.0, 1.0);
            return TaylorModel::from_interval(vars, self.domain.clone(), full, order);
        }
        let c = enc.mid();
        let r = (enc - Interval::point(c)).mag();
        let y = self.add_scalar(-c);
        let point = Interval::point(c);
        let derivs = [point.sin(), point.cos(), -point.sin(), -point.cos()];
        let shift = match f {
            Trig::Sin => 0,
            Trig::Cos => 1,
        };
        let mut coeffs = Vec::with_capacity(order as usize + 1);
        let mut coeff_slack = 0.0;
        let mut r_pow = 1.0;
        let mut fact = 1.0f64;
        for i in 0..=order {
            if i > 0 {
                fact *= f64::from(i);
            }
            let inv = 1.0 / fact;
            // Factorials up to 22! are exact doubles; beyond that widen by one more ulp.
            let inv_iv = Interval::raw(inv.next_down().next_down(), inv.next_up().next_up());
            let ci = derivs[(i as usize + shift) % 4] * inv_iv;
            let m = ci.mid();
            coeffs.push(m);
            let dev = (ci - Interval::point(m)).mag();
            coeff_slack = add_up(coeff_slack, mul_up(dev, r_pow));
            r_pow = mul_up(r_pow, r);
        }
        // Lagrange remainder: r_pow is now r^{k+1}; fact is k!.
        let lagrange = mul_up(r_pow, 1.0 / (fact * f64::from(order + 1)) * (1.0 + 4.0 * f64::EPSILON));
        let mut acc = TaylorModel::constant(vars, self.domain.clone(), coeffs[order as usize], order)?;
        for &ci in coeffs[..order as usize].iter().rev() {
            acc = acc.mul(&y, order)?.add_scalar(ci);
        }
        let out = acc.add_rem(Interval::symmetric(add_up(lagrange, coeff_slack)));
        // The range of sin/cos never leaves [-1, 1].
        if out.enclosure().width() > 2.0 {
            let full = Interval::raw(-1.0, 1.0);
            return TaylorModel::from_interval(self.vars().clone(), self.domain.clone(), full, order);
        }
        Ok(out)
    }

    /// Fixes variable `i` at `v`, which must lie in the domain of `i`. The
    /// variable stays in the list (and the domain) but no longer occurs.
    pub fn substitute(&self, i: usize, v: f64) -> Result<TaylorModel> {
        if !self.domain[i].contains(v) {
            return Err(Error::InvalidArgument(format!(
                "substituted value {v} lies outside {}",
                self.domain[i]
            )));
        }
        let (p, err) = self.poly.substitute_tracked(i, v, &self.mags());
        Ok(self.with(p, self.rem, err))
    }

    /// Re-targets the model to another domain. Sound only if the represented
    /// function is unchanged there, e.g. when the new domain is a subset, or
    /// the differing variables do not occur.
    pub fn with_domain(&self, domain: IntervalBox) -> Result<TaylorModel> {
        if domain.dim() != self.domain.dim() {
            return Err(Error::DomainMismatch);
        }
        for (j, (a, b)) in self.domain.iter().zip(domain.iter()).enumerate() {
            let occurs = self.poly.terms().any(|(e, _)| e[j] > 0);
            if occurs && !b.is_subset_of(a) {
                return Err(Error::InvalidArgument(format!(
                    "variable {} occurs and {b} is not inside {a}",
                    self.vars().names()[j]
                )));
            }
        }
        let mut out = self.clone();
        out.domain = domain;
        Ok(out)
    }
}

#[derive(Clone, Copy)]
enum Trig {
    Sin,
    Cos,
}

/// Evaluates `outer(args[0], ..., args[m-1])` in Taylor-model arithmetic.
pub fn compose_poly(outer: &MultiPoly, args: &[TaylorModel], order: u32) -> Result<TaylorModel> {
    if args.len() != outer.nvars() {
        return Err(Error::DimensionMismatch {
            what: "composition arguments",
            expected: outer.nvars(),
            found: args.len(),
        });
    }
    let first = args
        .first()
        .ok_or_else(|| Error::InvalidArgument("composition needs at least one argument".into()))?;
    for a in &args[1..] {
        first.check(a)?;
    }
    let zero = || TaylorModel::constant(first.vars().clone(), first.domain.clone(), 0.0, order);
    let one = || TaylorModel::constant(first.vars().clone(), first.domain.clone(), 1.0, order);
    // powers[j][k] = args[j]^k, filled lazily.
    let mut powers: Vec<Vec<TaylorModel>> = Vec::with_capacity(args.len());
    for _ in args {
        powers.push(vec![one()?]);
    }
    let mut acc = zero()?;
    for (e, c) in outer.terms() {
        let mut term: Option<TaylorModel> = None;
        for (j, &k) in e.iter().enumerate() {
            if k == 0 {
                continue;
            }
            while powers[j].len() <= k as usize {
                let next = powers[j].last().expect("starts non-empty").mul(&args[j], order)?;
                powers[j].push(next);
            }
            let p = &powers[j][k as usize];
            term = Some(match term {
                None => p.clone(),
                Some(t) => t.mul(p, order)?,
            });
        }
        let scaled = match term {
            None => one()?.scale(c),
            Some(t) => t.scale(c),
        };
        acc = acc.add(&scaled)?;
    }
    Ok(acc)
}

impl fmt::Display for TaylorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}", self.poly, self.rem)
    }
}
