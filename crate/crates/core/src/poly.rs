//! Sparse multivariate polynomials in the power basis.
//!
//! Terms are keyed by dense exponent vectors, one entry per variable, and kept
//! in canonical form (no stored zero coefficients). Arithmetic is exact up to
//! floating-point rounding of the coefficients; callers that need certified
//! results (the Taylor-model layer) bound that rounding separately with
//! [`MultiPoly::abs_mass`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, product_error, two_sum, Interval, IntervalBox};

/// Exponent vector of a monomial.
pub type Exponents = SmallVec<[u32; 10]>;

/// Ordered, shared list of variable names.
#[derive(Clone, Debug, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vars(Arc<[String]>);

impl Vars {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self(names.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|v| v == name)
    }

    /// A new list with `name` appended.
    pub fn with(&self, name: &str) -> Vars {
        Vars::new(self.0.iter().cloned().chain(std::iter::once(name.to_string())))
    }
}

impl PartialEq for Vars {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl From<Vec<String>> for Vars {
    fn from(v: Vec<String>) -> Self {
        Vars(v.into())
    }
}

impl From<Vars> for Vec<String> {
    fn from(v: Vars) -> Self {
        v.0.to_vec()
    }
}

/// Exact binomial coefficient `C(n, k)`.
///
/// Panics on overflow of `u128`, which needs `n` far above any degree used here.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc
            .checked_mul(u128::from(n - i))
            .expect("binomial coefficient overflow")
            / u128::from(i + 1);
    }
    acc
}

/// A sparse polynomial over named variables.
#[derive(Clone, PartialEq)]
pub struct MultiPoly {
    vars: Vars,
    terms: BTreeMap<Exponents, f64>,
}

impl MultiPoly {
    pub fn zero(vars: Vars) -> Self {
        Self {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: Vars, c: f64) -> Self {
        let mut p = Self::zero(vars);
        let n = p.nvars();
        p.add_term(SmallVec::from_elem(0, n), c);
        p
    }

    /// The polynomial `x_i`.
    pub fn var(vars: Vars, i: usize) -> Self {
        let n = vars.len();
        assert!(i < n, "variable index {i} out of range for {n} variables");
        let mut e: Exponents = SmallVec::from_elem(0, n);
        e[i] = 1;
        let mut p = Self::zero(vars);
        p.add_term(e, 1.0);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, summing
    /// repeated monomials.
    pub fn from_terms<I, E>(vars: Vars, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (E, f64)>,
        E: AsRef<[u32]>,
    {
        let mut p = Self::zero(vars);
        for (e, c) in terms {
            let e = e.as_ref();
            if e.len() != p.nvars() {
                return Err(Error::DimensionMismatch {
                    what: "exponent vector",
                    expected: p.nvars(),
                    found: e.len(),
                });
            }
            p.add_term(SmallVec::from_slice(e), c);
        }
        Ok(p)
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> + '_ {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn coeff(&self, e: &[u32]) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    /// Constant coefficient.
    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .find(|(e, _)| e.iter().all(|&k| k == 0))
            .map_or(0.0, |(_, &c)| c)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(degree).max().unwrap_or(0)
    }

    /// Accumulates `c * x^e`, dropping the monomial if it cancels to zero.
    pub(crate) fn add_term(&mut self, e: Exponents, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn check_vars(&self, other: &MultiPoly) -> Result<()> {
        if self.vars != other.vars {
            return Err(Error::VariableMismatch {
                left: self.vars.names().to_vec(),
                right: other.vars.names().to_vec(),
            });
        }
        Ok(())
    }

    /// Evaluates the polynomial at a point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars() {
            return Err(Error::DimensionMismatch {
                what: "evaluation point",
                expected: self.nvars(),
                found: x.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, &c)| c * monomial_value(e, x))
            .sum())
    }

    pub fn add(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> MultiPoly {
        let mut out = Self::zero(self.vars.clone());
        if c != 0.0 {
            for (e, &v) in &self.terms {
                out.add_term(e.clone(), v * c);
            }
        }
        out
    }

    pub fn mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = Self::zero(self.vars.clone());
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                out.add_term(add_exponents(ea, eb), ca * cb);
            }
        }
        Ok(out)
    }

    /// Product split into the part of total degree `<= order` and the rest.
    pub fn mul_truncated(&self, other: &MultiPoly, order: u32) -> Result<(MultiPoly, MultiPoly)> {
        self.check_vars(other)?;
        let mut kept = Self::zero(self.vars.clone());
        let mut dropped = Self::zero(self.vars.clone());
        for (ea, &ca) in &self.terms {
            let da = degree(ea);
            for (eb, &cb) in &other.terms {
                let target = if da + degree(eb) <= order {
                    &mut kept
                } else {
                    &mut dropped
                };
                target.add_term(add_exponents(ea, eb), ca * cb);
            }
        }
        Ok((kept, dropped))
    }

    /// Splits into terms of total degree `<= order` and the remainder.
    pub fn truncate(&self, order: u32) -> (MultiPoly, MultiPoly) {
        let mut kept = Self::zero(self.vars.clone());
        let mut dropped = Self::zero(self.vars.clone());
        for (e, &c) in &self.terms {
            if degree(e) <= order {
                kept.terms.insert(e.clone(), c);
            } else {
                dropped.terms.insert(e.clone(), c);
            }
        }
        (kept, dropped)
    }

    /// Returns `q` with `q(x) = p(scale ⊙ x + shift)`, expanded binomially.
    pub fn affine_compose(&self, scale: &[f64], shift: &[f64]) -> Result<MultiPoly> {
        let n = self.nvars();
        for (what, v) in [("scale vector", scale), ("shift vector", shift)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if let Some(j) = scale.iter().position(|&a| a == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "affine substitution has zero scale in dimension {j}"
            )));
        }
        // Per variable, the expansion of (a x + b)^k as (power, coefficient).
        let max_deg: Vec<u32> = (0..n)
            .map(|j| self.terms.keys().map(|e| e[j]).max().unwrap_or(0))
            .collect();
        let expansions: Vec<Vec<Vec<(u32, f64)>>> = (0..n)
            .map(|j| {
                (0..=max_deg[j])
                    .map(|k| {
                        (0..=k)
                            .map(|i| {
                                let c = binomial(k, i) as f64
                                    * scale[j].powi(i as i32)
                                    * shift[j].powi((k - i) as i32);
                                (i, c)
                            })
                            .filter(|&(_, c)| c != 0.0)
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let mut out = Self::zero(self.vars.clone());
        for (e, &c) in &self.terms {
            let mut partial: Vec<(Exponents, f64)> = vec![(SmallVec::from_elem(0, n), c)];
            for j in 0..n {
                let exp = &expansions[j][e[j] as usize];
                let mut next = Vec::with_capacity(partial.len() * exp.len());
                for (pe, pc) in &partial {
                    for &(i, ci) in exp {
                        let mut ne = pe.clone();
                        ne[j] = i;
                        next.push((ne, pc * ci));
                    }
                }
                partial = next;
            }
            for (ne, nc) in partial {
                out.add_term(ne, nc);
            }
        }
        Ok(out)
    }

    /// Sound enclosure of the range over a box: each monomial is evaluated in
    /// interval arithmetic, with even powers kept non-negative.
    pub fn bound(&self, b: &IntervalBox) -> Result<Interval> {
        if b.dim() != self.nvars() {
            return Err(Error::DimensionMismatch {
                what: "bounding box",
                expected: self.nvars(),
                found: b.dim(),
            });
        }
        let mut acc = Interval::zero();
        for (e, &c) in &self.terms {
            acc = acc + monomial_bound(e, b).scale(c);
        }
        Ok(acc)
    }

    /// Upper bound on `Σ |c_e| · max_{x∈b} |x^e|`, the scale against which
    /// coefficient rounding errors are measured.
    pub fn abs_mass(&self, b: &IntervalBox) -> f64 {
        let mags: Vec<f64> = b.iter().map(Interval::mag).collect();
        let mut acc = 0.0f64;
        for (e, &c) in &self.terms {
            let mut m = c.abs();
            for (j, &k) in e.iter().enumerate() {
                if k > 0 {
                    m *= mags[j].powi(k as i32);
                }
            }
            acc += m;
        }
        // Covers the rounding of this very summation.
        acc * (1.0 + (self.terms.len() as f64 + 2.0) * f64::EPSILON)
    }

    /// Substitutes the numeric value `v` for variable `i`, keeping the
    /// variable list (the variable no longer occurs).
    pub fn substitute(&self, i: usize, v: f64) -> MultiPoly {
        let mut out = Self::zero(self.vars.clone());
        for (e, &c) in &self.terms {
            let mut ne = e.clone();
            let k = std::mem::replace(&mut ne[i], 0);
            out.add_term(ne, c * v.powi(k as i32));
        }
        out
    }

    /// Re-expresses the polynomial over `vars`, which must start with this
    /// polynomial's variables; the new trailing variables get exponent 0.
    pub fn extend_vars(&self, vars: &Vars) -> Result<MultiPoly> {
        let n = self.nvars();
        if vars.len() < n || vars.names()[..n] != *self.vars.names() {
            return Err(Error::VariableMismatch {
                left: self.vars.names().to_vec(),
                right: vars.names().to_vec(),
            });
        }
        let extra = vars.len() - n;
        let mut out = Self::zero(vars.clone());
        for (e, &c) in &self.terms {
            let mut ne = e.clone();
            ne.extend(std::iter::repeat_n(0, extra));
            out.terms.insert(ne, c);
        }
        Ok(out)
    }

    /// Drops trailing variables that do not occur in any term.
    pub fn restrict_vars(&self, vars: &Vars) -> Result<MultiPoly> {
        let n = vars.len();
        if n > self.nvars() || self.vars.names()[..n] != *vars.names() {
            return Err(Error::VariableMismatch {
                left: self.vars.names().to_vec(),
                right: vars.names().to_vec(),
            });
        }
        let mut out = Self::zero(vars.clone());
        for (e, &c) in &self.terms {
            if e[n..].iter().any(|&k| k != 0) {
                return Err(Error::InvalidArgument(format!(
                    "polynomial still depends on variables beyond {:?}",
                    vars.names()
                )));
            }
            out.terms.insert(SmallVec::from_slice(&e[..n]), c);
        }
        Ok(out)
    }

    /// Partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> MultiPoly {
        let mut out = Self::zero(self.vars.clone());
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut ne = e.clone();
                let k = ne[i];
                ne[i] -= 1;
                out.add_term(ne, c * f64::from(k));
            }
        }
        out
    }
}

/// Rounding-tracked variants. Each returns, next to the computed polynomial,
/// an upper bound on `Σ |exact_coef - stored_coef| · |x^e|` over the box whose
/// per-variable magnitudes are `mags`. The bound is exactly zero when every
/// floating-point operation involved was exact.
impl MultiPoly {
    fn accumulate(&mut self, e: Exponents, c: f64, err: f64, mags: &[f64], total: &mut f64) {
        let mut err = err.abs();
        let mag = monomial_mag(&e, mags);
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                if c != 0.0 {
                    v.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let (s, r) = two_sum(*o.get(), c);
                err = add_up(err, r.abs());
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
        if err != 0.0 {
            *total = add_up(*total, mul_up(err, mag));
        }
    }

    pub(crate) fn add_tracked(&self, other: &MultiPoly, mags: &[f64]) -> Result<(MultiPoly, f64)> {
        self.check_vars(other)?;
        let mut out = self.clone();
        let mut err = 0.0;
        for (e, &c) in &other.terms {
            out.accumulate(e.clone(), c, 0.0, mags, &mut err);
        }
        Ok((out, err))
    }

    pub(crate) fn scale_tracked(&self, c: f64, mags: &[f64]) -> (MultiPoly, f64) {
        let mut out = Self::zero(self.vars.clone());
        let mut err = 0.0;
        if c != 0.0 {
            for (e, &v) in &self.terms {
                let p = v * c;
                out.accumulate(e.clone(), p, v.mul_add(c, -p), mags, &mut err);
            }
        }
        (out, err)
    }

    /// Product split at total degree `order` into kept and dropped parts.
    pub(crate) fn mul_tracked(
        &self,
        other: &MultiPoly,
        order: u32,
        mags: &[f64],
    ) -> Result<(MultiPoly, MultiPoly, f64)> {
        self.check_vars(other)?;
        let annotate = |p: &MultiPoly| -> Vec<(Exponents, f64, u32, f64)> {
            p.terms
                .iter()
                .map(|(e, &c)| (e.clone(), c, degree(e), monomial_mag(e, mags)))
                .collect()
        };
        let (ta, tb) = (annotate(self), annotate(other));
        let nv = self.nvars();
        let top = |t: &[(Exponents, f64, u32, f64)]| t.iter().flat_map(|x| x.0.iter().copied()).max().unwrap_or(0);
        if nv <= PACK_VARS && top(&ta) + top(&tb) <= PACK_MAX {
            return Ok(self.mul_packed(&ta, &tb, order));
        }
        let mut kept = Vec::with_capacity(ta.len() * tb.len());
        let mut dropped = Vec::new();
        let mut err = 0.0;
        for (ea, ca, da, ma) in &ta {
            for (eb, cb, db, mb) in &tb {
                let p = ca * cb;
                // Bounds |x^(ea+eb)| since both factors are upper bounds.
                let mag = mul_up(*ma, *mb);
                let r = product_error(*ca, *cb, p);
                if r != 0.0 {
                    err = add_up(err, mul_up(r.abs(), mag));
                }
                let item = (add_exponents(ea, eb), p, mag);
                if da + db <= order {
                    kept.push(item);
                } else {
                    dropped.push(item);
                }
            }
        }
        let kept = Self::collect_products(self.vars.clone(), kept, &mut err);
        let dropped = Self::collect_products(self.vars.clone(), dropped, &mut err);
        Ok((kept, dropped, err))
    }

    /// `mul_tracked` with exponent vectors packed into integers, so that
    /// sorting compares single words.
    fn mul_packed(
        &self,
        ta: &[(Exponents, f64, u32, f64)],
        tb: &[(Exponents, f64, u32, f64)],
        order: u32,
    ) -> (MultiPoly, MultiPoly, f64) {
        let nv = self.nvars();
        let pa: Vec<u64> = ta.iter().map(|t| pack(&t.0)).collect();
        let pb: Vec<u64> = tb.iter().map(|t| pack(&t.0)).collect();
        let mut kept = Vec::with_capacity(ta.len() * tb.len());
        let mut dropped = Vec::new();
        let mut err = 0.0;
        for ((_, ca, da, ma), ka) in ta.iter().zip(&pa) {
            for ((_, cb, db, mb), kb) in tb.iter().zip(&pb) {
                let p = ca * cb;
                let mag = mul_up(*ma, *mb);
                let r = product_error(*ca, *cb, p);
                if r != 0.0 {
                    err = add_up(err, mul_up(r.abs(), mag));
                }
                let item = (ka + kb, p, mag);
                if da + db <= order {
                    kept.push(item);
                } else {
                    dropped.push(item);
                }
            }
        }
        let mut finish = |mut items: Vec<(u64, f64, f64)>| {
            items.sort_unstable_by_key(|x| x.0);
            let mut terms = Vec::with_capacity(items.len());
            let mut it = items.into_iter().peekable();
            while let Some((k, mut sum, mag)) = it.next() {
                while let Some((_, c, _)) = it.next_if(|next| next.0 == k) {
                    let (s, r) = two_sum(sum, c);
                    if r != 0.0 {
                        err = add_up(err, mul_up(r.abs(), mag));
                    }
                    sum = s;
                }
                if sum != 0.0 {
                    terms.push((unpack(k, nv), sum));
                }
            }
            MultiPoly {
                vars: self.vars.clone(),
                terms: terms.into_iter().collect(),
            }
        };
        let kept = finish(kept);
        let dropped = finish(dropped);
        (kept, dropped, err)
    }

    /// Sums products sharing a monomial, adding the rounding to `err`.
    fn collect_products(vars: Vars, mut items: Vec<(Exponents, f64, f64)>, err: &mut f64) -> MultiPoly {
        items.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut terms = Vec::with_capacity(items.len());
        let mut it = items.into_iter().peekable();
        while let Some((e, mut sum, mag)) = it.next() {
            while let Some((_, c, _)) = it.next_if(|next| next.0 == e) {
                let (s, r) = two_sum(sum, c);
                if r != 0.0 {
                    *err = add_up(*err, mul_up(r.abs(), mag));
                }
                sum = s;
            }
            if sum != 0.0 {
                terms.push((e, sum));
            }
        }
        MultiPoly {
            vars,
            terms: terms.into_iter().collect(),
        }
    }

    /// Substitutes `v` for variable `i`; `v` must satisfy `|v| <= mags[i]`.
    pub(crate) fn substitute_tracked(&self, i: usize, v: f64, mags: &[f64]) -> (MultiPoly, f64) {
        let mut out = Self::zero(self.vars.clone());
        let mut err = 0.0;
        for (e, &c) in &self.terms {
            let mut ne = e.clone();
            let k = std::mem::replace(&mut ne[i], 0);
            if k == 0 {
                out.accumulate(ne, c, 0.0, mags, &mut err);
                continue;
            }
            // `powi` is a chain of at most k roundings.
            let vk = v.powi(k as i32);
            let p = c * vk;
            let rel = (f64::from(k) + 1.0) * f64::EPSILON;
            let power_err = mul_up(mul_up(c.abs(), vk.abs()), rel);
            err = add_up(err, mul_up(power_err, monomial_mag(&ne, mags)));
            out.accumulate(ne, p, c.mul_add(vk, -p), mags, &mut err);
        }
        (out, err)
    }
}

/// Upper bound on `|x^e|` given per-variable magnitudes.
pub(crate) fn monomial_mag(e: &Exponents, mags: &[f64]) -> f64 {
    let mut m = 1.0;
    for (j, &k) in e.iter().enumerate() {
        for _ in 0..k {
            m = mul_up(m, mags[j]);
        }
    }
    m
}

pub(crate) fn degree(e: &Exponents) -> u32 {
    e.iter().sum()
}

const PACK_BITS: u32 = 6;
const PACK_VARS: usize = 10;
const PACK_MAX: u32 = (1 << PACK_BITS) - 1;

/// Order-preserving packing of an exponent vector into one word; the first
/// variable takes the most significant field.
fn pack(e: &Exponents) -> u64 {
    e.iter().fold(0u64, |k, &x| (k << PACK_BITS) | u64::from(x))
}

fn unpack(mut k: u64, nv: usize) -> Exponents {
    let mut e: Exponents = smallvec::smallvec![0; nv];
    for x in e.iter_mut().rev() {
        *x = (k & u64::from(PACK_MAX)) as u32;
        k >>= PACK_BITS;
    }
    e
}

fn add_exponents(a: &Exponents, b: &Exponents) -> Exponents {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn monomial_value(e: &Exponents, x: &[f64]) -> f64 {
    e.iter()
        .zip(x)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, &v)| v.powi(k as i32))
        .product()
}

pub(crate) fn monomial_bound(e: &Exponents, b: &IntervalBox) -> Interval {
    let mut acc = Interval::point(1.0);
    for (j, &k) in e.iter().enumerate() {
        if k > 0 {
            acc = acc * b[j].powi(k);
        }
    }
    acc
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly({self})")
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (e, &c)) in self.terms.iter().enumerate() {
            let sign = if c < 0.0 { "-" } else { "+" };
            if idx == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mut factors: Vec<String> = Vec::new();
            let a = c.abs();
            if a != 1.0 || e.iter().all(|&k| k == 0) {
                factors.push(format!("{a}"));
            }
            for (j, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => factors.push(self.vars.names()[j].clone()),
                    _ => factors.push(format!("{}^{k}", self.vars.names()[j])),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    vars: Vars,
    terms: Vec<TermRepr>,
}

impl Serialize for MultiPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRepr {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(e, &c)| TermRepr {
                    exp: e.to_vec(),
                    coef: c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolyRepr::deserialize(d)?;
        MultiPoly::from_terms(r.vars, r.terms.into_iter().map(|t| (t.exp, t.coef)))
            .map_err(serde::de::Error::custom)
    }
}
