//! Closed intervals and axis-aligned boxes with outward-rounded arithmetic.
//!
//! Endpoints are rounded outward without touching the hardware rounding mode:
//! sums and products compute their exact rounding error (TwoSum / FMA) and
//! step to the next representable value only when the rounded result lies on
//! the wrong side. Library transcendental functions are not correctly rounded,
//! so the trigonometric enclosures are widened by a few ulps instead.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative widening applied to results of `sin`/`cos`/`exp` calls from libm.
const LIBM_SLACK: f64 = 4.0 * f64::EPSILON;

/// A closed real interval `[lo, hi]`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Builds `[lo, hi]`, rejecting NaN endpoints and `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Degenerate interval `[x, x]`.
    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub const fn zero() -> Self {
        Self::point(0.0)
    }

    pub const fn entire() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// `[-r, r]` for `r >= 0`.
    pub fn symmetric(r: f64) -> Self {
        let r = r.abs();
        Self { lo: -r, hi: r }
    }

    /// Internal constructor for already-ordered endpoints.
    pub(crate) fn raw(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "unordered interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Upper bound on `hi - lo`.
    pub fn width(&self) -> f64 {
        add_up(self.hi, -self.lo).max(0.0)
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    /// Upper bound on `max(|x - mid|)` over the interval.
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        add_up(m, -self.lo).max(add_up(self.hi, -m))
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Self::raw(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| Self::raw(lo, hi))
    }

    /// Grows the interval by `abs` on both sides (rounded outward).
    pub fn inflate(&self, abs: f64) -> Interval {
        let abs = abs.abs();
        Self::raw(add_down(self.lo, -abs), add_up(self.hi, abs))
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Multiplies by a real scalar.
    pub fn scale(&self, c: f64) -> Interval {
        if c == 0.0 {
            return Interval::zero();
        }
        if self.is_point() && self.lo == 0.0 {
            return Interval::zero();
        }
        let (a, b) = if c >= 0.0 { (self.lo, self.hi) } else { (self.hi, self.lo) };
        Self::raw(mul_down(a, c), mul_up(b, c))
    }

    /// Integer power. Odd powers are monotone; even powers are evaluated
    /// on `|x|` so the result is never negative.
    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => *self,
            _ if n % 2 == 1 => Interval::raw(pow_dir(self.lo, n, false), pow_dir(self.hi, n, true)),
            _ => {
                if self.lo >= 0.0 {
                    Interval::raw(pow_dir(self.lo, n, false), pow_dir(self.hi, n, true))
                } else if self.hi <= 0.0 {
                    Interval::raw(pow_dir(self.hi, n, false), pow_dir(self.lo, n, true))
                } else {
                    Interval::raw(0.0, pow_dir(self.mag(), n, true))
                }
            }
        }
    }

    /// `x^2` with a non-negative lower endpoint.
    pub fn sqr(&self) -> Interval {
        if self.lo >= 0.0 {
            Self::raw(mul_down(self.lo, self.lo).max(0.0), mul_up(self.hi, self.hi))
        } else if self.hi <= 0.0 {
            Self::raw(mul_down(self.hi, self.hi).max(0.0), mul_up(self.lo, self.lo))
        } else {
            let m = self.mag();
            Self::raw(0.0, mul_up(m, m))
        }
    }

    pub fn sin(&self) -> Interval {
        periodic_enclosure(*self, f64::sin, FRAC_PI_2, -FRAC_PI_2)
    }

    pub fn cos(&self) -> Interval {
        periodic_enclosure(*self, f64::cos, 0.0, PI)
    }

    /// Monotone non-decreasing function applied to the endpoints, widened by
    /// `LIBM_SLACK` for functions evaluated through libm.
    pub(crate) fn monotone_libm(&self, f: impl Fn(f64) -> f64) -> Interval {
        let lo = f(self.lo);
        let hi = f(self.hi);
        Self::raw(
            (lo - lo.abs() * LIBM_SLACK).next_down(),
            (hi + hi.abs() * LIBM_SLACK).next_up(),
        )
    }
}

/// `a^n` rounded down (`up = false`) or up (`up = true`).
fn pow_dir(a: f64, n: u32, up: bool) -> f64 {
    let negative = a < 0.0 && n % 2 == 1;
    // |a|^n must be rounded in the opposite direction when the sign flips.
    let mag_up = up != negative;
    let m = a.abs();
    let mut acc = 1.0;
    for _ in 0..n {
        acc = if mag_up { mul_up(acc, m) } else { mul_down(acc, m) };
    }
    if negative {
        -acc
    } else {
        acc
    }
}

/// Rounding error of `a + b` (TwoSum); the exact sum is `s + err`.
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Exact `a * b - p` for `p = a * b`. Uses Dekker's splitting unless the
/// target has hardware FMA or the operands are near the exponent limits.
pub(crate) fn product_error(a: f64, b: f64, p: f64) -> f64 {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    const BIG: f64 = 1e290;
    const TINY: f64 = 1e-270;
    if cfg!(target_feature = "fma") || !(a.abs() < BIG && b.abs() < BIG && p.abs() > TINY) {
        return a.mul_add(b, -p);
    }
    let split = |x: f64| {
        let c = SPLIT * x;
        let hi = c - (c - x);
        (hi, x - hi)
    };
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

/// `a + b` rounded toward negative infinity.
pub(crate) fn add_down(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if !s.is_finite() {
        return s;
    }
    if err < 0.0 {
        s.next_down()
    } else {
        s
    }
}

/// `a + b` rounded toward positive infinity.
pub(crate) fn add_up(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if !s.is_finite() {
        return s;
    }
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// `a * b` rounded toward negative infinity. The FMA residual is exact unless
/// the product underflows, where a one-ulp step is taken unconditionally.
pub(crate) fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if p.abs() < f64::MIN_POSITIVE * 4.0 {
        return p.next_down();
    }
    let err = product_error(a, b, p);
    if err < 0.0 {
        p.next_down()
    } else {
        p
    }
}

/// `a * b` rounded toward positive infinity.
pub(crate) fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if p.abs() < f64::MIN_POSITIVE * 4.0 {
        return p.next_up();
    }
    let err = product_error(a, b, p);
    if err > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Encloses `f` over `x` for a 2π-periodic `f` with range `[-1, 1]` whose
/// maxima sit at `max_at + 2kπ` and minima at `min_at + 2kπ`.
fn periodic_enclosure(x: Interval, f: fn(f64) -> f64, max_at: f64, min_at: f64) -> Interval {
    let full = Interval::raw(-1.0, 1.0);
    if !x.is_finite() || x.width() >= 2.0 * PI {
        return full;
    }
    let a = f(x.lo);
    let b = f(x.hi);
    let (vlo, vhi) = (a.min(b), a.max(b));
    let mut lo = (vlo - vlo.abs() * LIBM_SLACK).next_down();
    let mut hi = (vhi + vhi.abs() * LIBM_SLACK).next_up();
    if hits_critical_point(x, max_at) {
        hi = 1.0;
    }
    if hits_critical_point(x, min_at) {
        lo = -1.0;
    }
    Interval::raw(lo.max(-1.0), hi.min(1.0))
}

/// Whether `[x.lo, x.hi]` may contain `c + 2kπ` for some integer `k`.
///
/// The argument reduction is done on a slightly enlarged interval so that
/// rounding in the division can only produce false positives, which merely
/// widen the enclosure.
fn hits_critical_point(x: Interval, c: f64) -> bool {
    let two_pi = 2.0 * PI;
    let pad = 8.0 * f64::EPSILON * (x.mag() + c.abs() + 1.0);
    let lo = (x.lo - c - pad) / two_pi;
    let hi = (x.hi - c + pad) / two_pi;
    let k_lo = (lo - 1e-12).ceil();
    let k_hi = (hi + 1e-12).floor();
    k_lo <= k_hi
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval::raw(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;

    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;

    fn neg(self) -> Interval {
        Interval::raw(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;

    fn mul(self, rhs: Interval) -> Interval {
        if (self.is_point() && self.lo == 0.0) || (rhs.is_point() && rhs.lo == 0.0) {
            return Interval::zero();
        }
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        // 0 * inf produces NaN; such products can only arise from unbounded
        // operands, where the entire line is the honest answer.
        if pairs.iter().any(|(a, b)| (a * b).is_nan()) {
            return Interval::entire();
        }
        let lo = pairs
            .iter()
            .map(|&(a, b)| mul_down(a, b))
            .fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(a, b)| mul_up(a, b))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval::raw(lo, hi)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;

    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;

    fn mul(self, rhs: f64) -> Interval {
        self.scale(rhs)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

/// An axis-aligned box: one interval per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalBox {
    dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> Self {
        Self { dims }
    }

    /// Builds a box from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn point(x: &[f64]) -> Self {
        Self::new(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![Interval::raw(0.0, 1.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn get(&self, j: usize) -> Interval {
        self.dims[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interval> {
        self.dims.iter()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.dims.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    pub fn is_subset_of(&self, other: &IntervalBox) -> bool {
        self.dim() == other.dim()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|(a, b)| a.is_subset_of(b))
    }

    pub fn hull(&self, other: &IntervalBox) -> IntervalBox {
        IntervalBox::new(
            self.dims
                .iter()
                .zip(&other.dims)
                .map(|(a, b)| a.hull(b))
                .collect(),
        )
    }

    pub fn intersect(&self, other: &IntervalBox) -> Option<IntervalBox> {
        self.dims
            .iter()
            .zip(&other.dims)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(IntervalBox::new)
    }

    /// Splits the box into `∏ p_j` congruent cells.
    ///
    /// Cell `k` spans `[l_j + k_j/p_j (u_j - l_j), l_j + (k_j+1)/p_j (u_j - l_j)]`
    /// in dimension `j`. Cells are returned in row-major order of `k` (the last
    /// dimension varies fastest). Outer cell faces coincide with the parent.
    pub fn partition(&self, p: &[usize]) -> Result<Vec<IntervalBox>> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "partition vector",
                expected: self.dim(),
                found: p.len(),
            });
        }
        if let Some(j) = p.iter().position(|&pj| pj == 0) {
            return Err(Error::InvalidArgument(format!(
                "partition count for dimension {j} must be positive"
            )));
        }
        let total: usize = p.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut k = vec![0usize; p.len()];
        for _ in 0..total {
            let dims = self
                .dims
                .iter()
                .zip(p)
                .zip(&k)
                .map(|((iv, &pj), &kj)| {
                    let lo = grid_point(iv, kj, pj);
                    let hi = grid_point(iv, kj + 1, pj);
                    Interval::raw(lo, hi)
                })
                .collect();
            cells.push(IntervalBox::new(dims));
            increment_index(&mut k, p);
        }
        Ok(cells)
    }

    /// Midpoint of each dimension.
    pub fn center(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::mid).collect()
    }
}

/// `l + k/p (u - l)`, pinned to the exact endpoints at `k = 0` and `k = p`.
pub(crate) fn grid_point(iv: &Interval, k: usize, p: usize) -> f64 {
    if k == 0 {
        iv.lo
    } else if k == p {
        iv.hi
    } else {
        let t = k as f64 / p as f64;
        (iv.lo + t * (iv.hi - iv.lo)).clamp(iv.lo, iv.hi)
    }
}

/// Advances a row-major multi-index bounded by `limits` (exclusive).
pub(crate) fn increment_index(k: &mut [usize], limits: &[usize]) {
    for j in (0..k.len()).rev() {
        k[j] += 1;
        if k[j] < limits[j] {
            return;
        }
        k[j] = 0;
    }
}

impl From<Vec<Interval>> for IntervalBox {
    fn from(dims: Vec<Interval>) -> Self {
        Self::new(dims)
    }
}

impl std::ops::Index<usize> for IntervalBox {
    type Output = Interval;

    fn index(&self, j: usize) -> &Interval {
        &self.dims[j]
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, iv) in self.dims.iter().enumerate() {
            if j > 0 {
                write!(f, " x ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn product_error_matches_fma() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let a = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-200..200));
            let b = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-60..60));
            let p = a * b;
            assert_eq!(product_error(a, b, p), a.mul_add(b, -p), "{a} {b}");
        }
    }

    fn close(a: Interval, lo: f64, hi: f64) -> bool {
        (a.lo() - lo).abs() < 1e-12 && (a.hi() - hi).abs() < 1e-12 && a.contains(lo) && a.contains(hi)
    }

    #[test]
    fn add_examples() {
        assert!(close(iv(1.0, 2.0) + iv(3.0, 4.0), 4.0, 6.0));
        assert!(close(iv(0.0, 0.0) + iv(-0.3, 2.5), -0.3, 2.5));
        assert!(close(iv(-1.0, 1.0) + iv(-1.0, 1.0), -2.0, 2.0));
    }

    #[test]
    fn mul_examples() {
        assert!(close(iv(-1.0, 2.0) * iv(3.0, 4.0), -4.0, 8.0));
        assert_eq!(iv(0.0, 0.0) * iv(-7.0, 3.0), Interval::zero());
        assert!(close(iv(-1.0, 1.0) * iv(-1.0, 1.0), -1.0, 1.0));
    }

    #[test]
    fn trig_examples() {
        let s0 = iv(0.0, 0.0).sin();
        assert!(s0.contains(0.0) && s0.width() < 1e-15);
        assert!(close(iv(0.0, PI).sin(), 0.0, 1.0));
        assert!(close(iv(0.0, PI).cos(), -1.0, 1.0));
        assert_eq!(iv(0.0, 7.0).sin(), iv(-1.0, 1.0));
        // A monotone arc has no critical point inside.
        let s = iv(0.1, 0.2).sin();
        assert!(s.contains(0.1f64.sin()) && s.contains(0.2f64.sin()) && s.hi() < 0.2);
    }

    #[test]
    fn invalid_interval_rejected() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn even_power_tightening() {
        let sq = iv(-1.0, 1.0).powi(2);
        assert_eq!(sq.lo(), 0.0);
        assert!(close(sq, 0.0, 1.0));
        assert!(close(iv(-2.0, 1.0).powi(3), -8.0, 1.0));
        assert!(close(iv(-2.0, 1.0).powi(4), 0.0, 16.0));
    }

    #[test]
    fn partition_examples() {
        let unit = IntervalBox::from_bounds(&[(0.0, 1.0)]).unwrap();
        let halves = unit.partition(&[2]).unwrap();
        assert_eq!(halves, vec![
            IntervalBox::from_bounds(&[(0.0, 0.5)]).unwrap(),
            IntervalBox::from_bounds(&[(0.5, 1.0)]).unwrap(),
        ]);

        let sq = IntervalBox::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert_eq!(sq.partition(&[1, 1]).unwrap(), vec![sq.clone()]);

        let r = IntervalBox::from_bounds(&[(0.0, 2.0), (0.0, 3.0)]).unwrap();
        let cells = r.partition(&[2, 3]).unwrap();
        assert_eq!(cells.len(), 6);
        for (idx, c) in cells.iter().enumerate() {
            let (k1, k2) = (idx / 3, idx % 3);
            assert_eq!(c[0], iv(k1 as f64, k1 as f64 + 1.0));
            assert_eq!(c[1], iv(k2 as f64, k2 as f64 + 1.0));
        }

        assert!(r.partition(&[0, 1]).is_err());
        assert!(r.partition(&[1]).is_err());
    }

    #[test]
    fn center_examples() {
        assert_eq!(IntervalBox::from_bounds(&[(0.0, 1.0)]).unwrap().center(), vec![0.5]);
        assert_eq!(IntervalBox::from_bounds(&[(0.3, 0.3)]).unwrap().center(), vec![0.3]);
        let cells = IntervalBox::from_bounds(&[(0.0, 1.0)]).unwrap().partition(&[2]).unwrap();
        assert_eq!(cells[1].center(), vec![0.75]);
    }
}
