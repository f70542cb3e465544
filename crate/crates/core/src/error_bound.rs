//! Certified approximation error of a Bernstein controller abstraction.
//!
//! Two independent upper bounds on `sup_X |κ(x) − P(x)|` are available:
//!
//! * the a priori bound `(L/2) · sqrt(Σ 1/d_j) · max_j (u_j − l_j)`, which
//!   needs nothing but the Lipschitz constant `L` and the degree;
//! * the sampling bound: split `X` into a grid of `∏ p_j` cells, measure the
//!   deviation at every cell centre and add `δ(p) = L · sqrt(Σ (w_j/p_j)²)`,
//!   which covers the distance from any point to its cell centre (both `κ`
//!   and `P` are `L`-Lipschitz).
//!
//! `p` is chosen so that `δ(p)` does not exceed a requested precision `δ̄`.
//! The certified value is the smaller of the two plus the slack from
//! floating-point basis conversion.

use rayon::prelude::*;
use serde::Serialize;

use crate::bernstein::{BernsteinAbstraction, ControllerApprox, DegreeVector};
use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, IntervalBox};
use crate::lipschitz::{network_lipschitz, sqrt_up};
use crate::nn::Network;

/// Largest number of cell centres a sampling sweep may visit.
pub const DEFAULT_MAX_SAMPLES: usize = 50_000_000;

const CHUNK: usize = 4096;

/// A priori error bound `(L/2) · sqrt(Σ_j 1/d_j) · max_j (u_j − l_j)`.
pub fn t_error(lipschitz: f64, d: &DegreeVector, x: &IntervalBox) -> f64 {
    if lipschitz == 0.0 {
        return 0.0;
    }
    let inv_sum = d
        .as_slice()
        .iter()
        .fold(0.0, |acc, &k| add_up(acc, 1.0 / f64::from(k) * (1.0 + f64::EPSILON)));
    mul_up(mul_up(lipschitz / 2.0, sqrt_up(inv_sum)), x.max_width())
}

/// `δ(p) = L · sqrt(Σ_j ((u_j − l_j)/p_j)²)`.
pub fn sampling_precision(x: &IntervalBox, lipschitz: f64, p: &[usize]) -> f64 {
    let s: f64 = x
        .iter()
        .zip(p)
        .map(|(iv, &pj)| (iv.width() / pj as f64).powi(2))
        .sum();
    lipschitz * s.sqrt()
}

/// Grid resolution `p_j = ⌈L (u_j − l_j) sqrt(m) / δ̄⌉` (at least 1), which
/// guarantees `δ(p) ≤ δ̄`.
pub fn adaptive_partition(x: &IntervalBox, lipschitz: f64, delta_bar: f64) -> Result<Vec<usize>> {
    if !(delta_bar > 0.0) || !delta_bar.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sampling precision must be positive, got {delta_bar}"
        )));
    }
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz constant must be finite and non-negative, got {lipschitz}"
        )));
    }
    let sqrt_m = (x.dim() as f64).sqrt();
    let mut p: Vec<usize> = x
        .iter()
        .map(|iv| {
            let v = (lipschitz * iv.width() * sqrt_m / delta_bar).ceil();
            if v >= usize::MAX as f64 {
                usize::MAX
            } else {
                (v as usize).max(1)
            }
        })
        .collect();
    // Rounding in the formula can leave δ(p) an ulp above δ̄.
    while sampling_precision(x, lipschitz, &p) > delta_bar {
        let j = (0..p.len())
            .max_by(|&a, &b| {
                let wa = x[a].width() / p[a] as f64;
                let wb = x[b].width() / p[b] as f64;
                wa.total_cmp(&wb)
            })
            .expect("non-empty box");
        p[j] = p[j].saturating_add(1);
    }
    Ok(p)
}

fn cell_count(p: &[usize]) -> Option<usize> {
    p.iter().try_fold(1usize, |acc, &pj| acc.checked_mul(pj))
}

/// Visits every cell centre of the `p`-grid on `x` (in parallel chunks) and
/// returns the component-wise maximum of `f` over all centres.
pub fn sweep_centers<F>(x: &IntervalBox, p: &[usize], slots: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let total = cell_count(p).ok_or(Error::SamplingBudget {
        cells: p.iter().map(|&v| v as f64).product(),
        limit: usize::MAX,
    })?;
    let m = p.len();
    let chunks = total.div_ceil(CHUNK);
    let center = |k: &[usize], out: &mut [f64]| {
        for j in 0..m {
            let iv = x[j];
            let t = (2 * k[j] + 1) as f64 / (2 * p[j]) as f64;
            out[j] = (iv.lo() + t * (iv.hi() - iv.lo())).clamp(iv.lo(), iv.hi());
        }
    };
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut k = vec![0usize; m];
            let mut rem = start;
            for j in (0..m).rev() {
                k[j] = rem % p[j];
                rem /= p[j];
            }
            let mut point = vec![0.0; m];
            let mut acc = vec![0.0f64; slots];
            for _ in start..end {
                center(&k, &mut point);
                let v = f(&point)?;
                for (a, b) in acc.iter_mut().zip(&v) {
                    if b.is_nan() {
                        return Err(Error::NonFinite(format!("deviation at {point:?}")));
                    }
                    *a = a.max(*b);
                }
                crate::interval::increment_index(&mut k, p);
            }
            Ok(acc)
        })
        .try_reduce(
            || vec![0.0; slots],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect()),
        )
}

/// Result of the sampling-based bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingBound {
    /// `δ(p) + max_k |P(c_k) − κ(c_k)|` per output.
    pub eps: Vec<f64>,
    pub max_deviation: Vec<f64>,
    pub partition: Vec<usize>,
    pub delta_p: f64,
    pub samples: usize,
}

/// Sampling-based error bound of `approx` against `kappa` over `x`.
///
/// `lipschitz` must be a valid Lipschitz constant of `kappa` over `x`; the
/// Bernstein approximation inherits it.
pub fn s_error<K, A>(
    kappa: K,
    approx: A,
    x: &IntervalBox,
    lipschitz: f64,
    delta_bar: f64,
    outputs: usize,
    max_samples: usize,
) -> Result<SamplingBound>
where
    K: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    A: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let p = adaptive_partition(x, lipschitz, delta_bar)?;
    let samples = match cell_count(&p) {
        Some(n) if n <= max_samples => n,
        _ => {
            return Err(Error::SamplingBudget {
                cells: p.iter().map(|&v| v as f64).product(),
                limit: max_samples,
            })
        }
    };
    let delta_p = sampling_precision(x, lipschitz, &p);
    let max_deviation = sweep_centers(x, &p, outputs, |c| {
        let k = kappa(c)?;
        let a = approx(c)?;
        Ok(k.iter().zip(&a).map(|(u, v)| (u - v).abs()).collect())
    })?;
    let eps = max_deviation.iter().map(|&d| add_up(delta_p, d)).collect();
    Ok(SamplingBound {
        eps,
        max_deviation,
        partition: p,
        delta_p,
        samples,
    })
}

/// Error certificate of one controller output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub eps_t: f64,
    /// Sampling bound; infinite when the sampling budget was exceeded.
    pub eps_s: f64,
    pub conversion_slack: f64,
    pub eps_used: f64,
    pub lipschitz: f64,
    pub p: Vec<usize>,
    pub delta_p: f64,
    pub samples: usize,
}

/// Options for [`certify`].
#[derive(Clone, Copy, Debug)]
pub struct CertifyOptions {
    pub delta_bar: f64,
    pub max_samples: usize,
    /// Use this Lipschitz constant instead of computing one.
    pub lipschitz: Option<f64>,
}

impl CertifyOptions {
    pub fn new(delta_bar: f64) -> Self {
        Self {
            delta_bar,
            max_samples: DEFAULT_MAX_SAMPLES,
            lipschitz: None,
        }
    }
}

/// Certifies every output of `approx` against `net`, producing
/// `κ_o(x) ∈ P_o(x) + [−ε_o, ε_o]` on the approximation domain.
pub fn certify(
    net: &Network,
    approx: ControllerApprox,
    opts: CertifyOptions,
) -> Result<(BernsteinAbstraction, Vec<ErrorReport>)> {
    let x = approx.domain.clone();
    let outputs = approx.outputs.len();
    let lipschitz = match opts.lipschitz {
        Some(l) => l,
        None => network_lipschitz(net, &x)?,
    };
    let eps_t = t_error(lipschitz, &approx.degree, &x);
    let m = x.dim() as f64;

    // Distance between the nominal grid nodes k/d (mapped into X) and the
    // points actually fed to the network.
    let coord_mag = x.iter().map(|iv| iv.mag()).fold(0.0, f64::max);
    let node_err = mul_up(lipschitz, 4.0 * f64::EPSILON * (coord_mag + 1.0) * m.sqrt());

    // Rounding introduced when the unit-box polynomial was composed with the
    // affine change of variables, measured against the worst monomial scale.
    let compose_err: Vec<f64> = approx
        .outputs
        .iter()
        .map(|o| compose_rounding_bound(&o.unit_poly, &x))
        .collect();

    let p = adaptive_partition(&x, lipschitz, opts.delta_bar)?;
    let delta_p = sampling_precision(&x, lipschitz, &p);
    let sweep = match cell_count(&p) {
        Some(n) if n <= opts.max_samples => {
            let maxima = sweep_centers(&x, &p, 3 * outputs, |c| {
                let k = net.eval(c)?;
                let stable = approx.eval_stable(c)?;
                let power = approx.eval(c)?;
                let mut out = Vec::with_capacity(3 * outputs);
                out.extend(k.iter().zip(&stable).map(|(a, b)| (a - b).abs()));
                out.extend(stable.iter().zip(&power).map(|(a, b)| (a - b).abs()));
                out.extend(k.iter().map(|v| v.abs()));
                Ok(out)
            })?;
            Some((n, maxima))
        }
        _ => None,
    };

    let mut reports = Vec::with_capacity(outputs);
    for (o, out) in approx.outputs.iter().enumerate() {
        let dc_err = out.coeffs.eval_error_bound();
        let (lo, hi) = out.coeffs.hull();
        let value_scale = lo.abs().max(hi.abs());
        let (eps_s, samples, observed, kappa_scale) = match &sweep {
            Some((n, maxima)) => (
                add_up(add_up(delta_p, maxima[o]), dc_err),
                *n,
                maxima[outputs + o],
                maxima[2 * outputs + o],
            ),
            None => (f64::INFINITY, 0, 0.0, value_scale),
        };
        // Floating-point network evaluation versus the exact composition.
        let eval_err = 64.0 * f64::EPSILON * (kappa_scale.max(value_scale) + 1.0);
        let conversion_slack = [node_err, out.conversion_bound, compose_err[o], observed, eval_err]
            .into_iter()
            .fold(0.0, add_up);
        let eps_used = add_up(eps_t.min(eps_s), conversion_slack);
        reports.push(ErrorReport {
            eps_t,
            eps_s,
            conversion_slack,
            eps_used,
            lipschitz,
            p: p.clone(),
            delta_p,
            samples,
        });
    }
    let eps = reports.iter().map(|r| r.eps_used).collect();
    Ok((BernsteinAbstraction { approx, eps }, reports))
}

/// Bound on the rounding error committed by substituting
/// `x' = (x − l)/(u − l)` into `unit_poly` and evaluating the result at a
/// point of `x`.
fn compose_rounding_bound(unit_poly: &crate::poly::MultiPoly, x: &IntervalBox) -> f64 {
    let spread: Vec<f64> = x
        .iter()
        .map(|iv| {
            let w = iv.hi() - iv.lo();
            (iv.mag() + iv.lo().abs()) / w
        })
        .collect();
    let mut mass = 0.0f64;
    for (e, c) in unit_poly.terms() {
        let mut t = c.abs();
        for (j, &k) in e.iter().enumerate() {
            t *= spread[j].max(1.0).powi(k as i32);
        }
        mass += t;
    }
    let ops = f64::from(unit_poly.total_degree()) + unit_poly.nvars() as f64 + 4.0;
    mass * 4.0 * ops * f64::EPSILON
}
