//! Bernstein polynomial abstraction of a controller over a box.
//!
//! A controller `κ` on `X = [l, u]` is first pulled back to the unit box via
//! `x'_j = (x_j − l_j)/(u_j − l_j)`. Its values on the uniform grid `k/d` are
//! the Bernstein coefficients; the resulting polynomial is expanded into the
//! power basis and finally composed with the inverse substitution to give a
//! polynomial over `X` itself.
//!
//! Coefficients are kept twice: as the raw Bernstein tensor (evaluated with
//! de Casteljau's algorithm, which is numerically stable) and as power-basis
//! polynomials. The rounding committed during the basis change is tracked and
//! reported so the error module can fold it into the certified bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::interval::{increment_index, IntervalBox};
use crate::nn::Network;
use crate::poly::{binomial, MultiPoly, Vars};

/// Per-dimension polynomial degrees, all at least 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct DegreeVector(Vec<u32>);

impl DegreeVector {
    pub fn new(d: Vec<u32>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidArgument("degree vector is empty".into()));
        }
        if let Some(j) = d.iter().position(|&k| k == 0) {
            return Err(Error::InvalidArgument(format!(
                "degree for dimension {j} must be at least 1"
            )));
        }
        Ok(Self(d))
    }

    /// The same degree in every one of `dim` dimensions.
    pub fn uniform(dim: usize, d: u32) -> Result<Self> {
        Self::new(vec![d; dim])
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of grid nodes `∏ (d_j + 1)`.
    pub fn node_count(&self) -> usize {
        self.0.iter().map(|&k| k as usize + 1).product()
    }

    fn shape(&self) -> Vec<usize> {
        self.0.iter().map(|&k| k as usize + 1).collect()
    }
}

impl TryFrom<Vec<u32>> for DegreeVector {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        DegreeVector::new(v)
    }
}

impl From<DegreeVector> for Vec<u32> {
    fn from(d: DegreeVector) -> Self {
        d.0
    }
}

/// Default variable names `x1, …, xm`.
pub fn default_vars(m: usize) -> Vars {
    Vars::new((1..=m).map(|j| format!("x{j}")))
}

/// Bernstein coefficients `f(k/d)` as a row-major tensor (last index fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinCoeffs {
    degree: DegreeVector,
    values: Vec<f64>,
}

impl BernsteinCoeffs {
    pub fn new(degree: DegreeVector, values: Vec<f64>) -> Result<Self> {
        if values.len() != degree.node_count() {
            return Err(Error::DimensionMismatch {
                what: "Bernstein coefficient tensor",
                expected: degree.node_count(),
                found: values.len(),
            });
        }
        Ok(Self { degree, values })
    }

    pub fn degree(&self) -> &DegreeVector {
        &self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Range of the coefficients, which encloses the polynomial's range on
    /// the unit box.
    pub fn hull(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Tensor-product de Casteljau evaluation at `x ∈ [0, 1]^m`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let d = self.degree.as_slice();
        if x.len() != d.len() {
            return Err(Error::DimensionMismatch {
                what: "evaluation point",
                expected: d.len(),
                found: x.len(),
            });
        }
        if let Some(j) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {j} = {} lies outside the unit box",
                x[j]
            )));
        }
        let mut data = self.values.clone();
        let mut len = data.len();
        // Contract the trailing dimension each round.
        for j in (0..d.len()).rev() {
            let n = d[j] as usize + 1;
            let outer = len / n;
            let t = x[j];
            for o in 0..outer {
                let slice = &mut data[o * n..(o + 1) * n];
                for r in 1..n {
                    for i in 0..n - r {
                        slice[i] = (1.0 - t) * slice[i] + t * slice[i + 1];
                    }
                }
                data[o] = data[o * n];
            }
            len = outer;
        }
        Ok(data[0])
    }

    /// Upper bound on the rounding error of [`BernsteinCoeffs::eval`]: every
    /// de Casteljau step is a convex combination costing at most three
    /// roundings.
    pub fn eval_error_bound(&self) -> f64 {
        let steps: u32 = self.degree.as_slice().iter().sum();
        let max_abs = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        4.0 * f64::from(steps) * f64::EPSILON * max_abs
    }

    /// Expands into the power basis over `vars`, returning the polynomial
    /// and an upper bound on `|B(x) − P(x)|` over the unit box caused by
    /// rounding the power coefficients.
    pub fn to_power_basis(&self, vars: Vars) -> Result<(MultiPoly, f64)> {
        let d = self.degree.as_slice();
        if vars.len() != d.len() {
            return Err(Error::DimensionMismatch {
                what: "variable list",
                expected: d.len(),
                found: vars.len(),
            });
        }
        let shape = self.degree.shape();
        let mut values = self.values.clone();
        let mut mass: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let mut rel_err = 0.0;
        // x^k (1−x)^{d−k} = Σ_{i≥k} C(d,k) C(d−k,i−k) (−1)^{i−k} x^i,
        // applied one dimension at a time.
        for j in 0..d.len() {
            let dj = d[j];
            let n = shape[j];
            let stride: usize = shape[j + 1..].iter().product();
            let outer: usize = shape[..j].iter().product();
            let weights: Vec<Vec<f64>> = (0..=dj)
                .map(|i| {
                    (0..=i)
                        .map(|k| {
                            let c = binomial(dj, k) * binomial(dj - k, i - k);
                            let c = c as f64;
                            if (i - k) % 2 == 0 {
                                c
                            } else {
                                -c
                            }
                        })
                        .collect()
                })
                .collect();
            let mut next = vec![0.0; values.len()];
            let mut next_mass = vec![0.0; values.len()];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for i in 0..n {
                        let mut acc = 0.0;
                        let mut acc_mass = 0.0;
                        for (k, w) in weights[i].iter().enumerate() {
                            acc += w * values[base + k * stride];
                            acc_mass += w.abs() * mass[base + k * stride];
                        }
                        next[base + i * stride] = acc;
                        next_mass[base + i * stride] = acc_mass;
                    }
                }
            }
            values = next;
            mass = next_mass;
            rel_err += (f64::from(dj) + 3.0) * f64::EPSILON;
        }

        let mut terms = Vec::with_capacity(values.len());
        let mut idx = vec![0usize; d.len()];
        let mut err = 0.0;
        for (v, m) in values.iter().zip(&mass) {
            let e: SmallVec<[u32; 6]> = idx.iter().map(|&k| k as u32).collect();
            terms.push((e, *v));
            err += m * rel_err;
            increment_index(&mut idx, &shape);
        }
        let poly = MultiPoly::from_terms(vars, terms)?;
        Ok((poly, err * (1.0 + 1e-6)))
    }
}

/// Evaluates `f` on the grid `k/d` of the unit box, in parallel.
///
/// `f` returns one value per output; exactly `∏ (d_j + 1)` calls are made.
pub fn sample_grid<F>(f: F, d: &DegreeVector, outputs: usize) -> Result<Vec<BernsteinCoeffs>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let shape = d.shape();
    let degs = d.as_slice();
    let total = d.node_count();
    let samples: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut x = vec![0.0; shape.len()];
            for j in (0..shape.len()).rev() {
                let k = rem % shape[j];
                rem /= shape[j];
                x[j] = k as f64 / f64::from(degs[j]);
            }
            let y = f(&x)?;
            if y.len() != outputs {
                return Err(Error::DimensionMismatch {
                    what: "sampled function output",
                    expected: outputs,
                    found: y.len(),
                });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("Bernstein sample at {x:?}")));
            }
            Ok(y)
        })
        .collect::<Result<_>>()?;
    (0..outputs)
        .map(|o| BernsteinCoeffs::new(d.clone(), samples.iter().map(|y| y[o]).collect()))
        .collect()
}

/// Bernstein polynomial of a scalar function on the unit box, in the power
/// basis over `x1, …, xm`.
pub fn bernstein_unit<F>(f: F, d: &DegreeVector) -> Result<MultiPoly>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let coeffs = sample_grid(|x| Ok(vec![f(x)]), d, 1)?;
    let (poly, _) = coeffs[0].to_power_basis(default_vars(d.len()))?;
    Ok(poly)
}

/// Approximation of one controller output.
#[derive(Clone, Debug, Serialize)]
pub struct OutputApprox {
    /// Bernstein coefficients over the unit box.
    pub coeffs: BernsteinCoeffs,
    /// Power-basis polynomial over the unit box.
    pub unit_poly: MultiPoly,
    /// Power-basis polynomial over the original box.
    pub poly: MultiPoly,
    /// Bound on `|coeffs(x') − unit_poly(x')|` from the basis change.
    pub conversion_bound: f64,
}

/// Uncertified Bernstein approximation of every controller output.
#[derive(Clone, Debug, Serialize)]
pub struct ControllerApprox {
    pub domain: IntervalBox,
    pub degree: DegreeVector,
    pub outputs: Vec<OutputApprox>,
}

impl ControllerApprox {
    /// Maps a point of the domain to unit-box coordinates, clamped into
    /// `[0, 1]` against rounding at the faces.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.domain
            .iter()
            .zip(x)
            .map(|(iv, &v)| ((v - iv.lo()) / (iv.hi() - iv.lo())).clamp(0.0, 1.0))
            .collect()
    }

    /// Power-basis evaluation over the original coordinates.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.outputs.iter().map(|o| o.poly.eval(x)).collect()
    }

    /// De Casteljau evaluation at a point of the domain.
    pub fn eval_stable(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.to_unit(x);
        self.outputs.iter().map(|o| o.coeffs.eval(&u)).collect()
    }

    pub fn polys(&self) -> Vec<MultiPoly> {
        self.outputs.iter().map(|o| o.poly.clone()).collect()
    }
}

/// Builds the Bernstein approximation of `net` over `x` with degree `d`.
pub fn build_approx(net: &Network, x: &IntervalBox, d: &DegreeVector) -> Result<ControllerApprox> {
    let m = net.input_dim();
    if x.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "approximation box",
            expected: m,
            found: x.dim(),
        });
    }
    if d.len() != m {
        return Err(Error::DimensionMismatch {
            what: "degree vector",
            expected: m,
            found: d.len(),
        });
    }
    for (j, iv) in x.iter().enumerate() {
        if !(iv.hi() > iv.lo()) {
            return Err(Error::DegenerateDimension {
                dim: j,
                lo: iv.lo(),
                hi: iv.hi(),
            });
        }
    }
    let lo: Vec<f64> = x.iter().map(|iv| iv.lo()).collect();
    let width: Vec<f64> = x.iter().map(|iv| iv.hi() - iv.lo()).collect();
    let rescaled = |u: &[f64]| {
        let p: Vec<f64> = u
            .iter()
            .zip(lo.iter().zip(&width))
            .map(|(&t, (&l, &w))| l + w * t)
            .collect();
        net.eval(&p)
    };
    let coeffs = sample_grid(rescaled, d, net.output_dim())?;
    let vars = default_vars(m);
    let scale: Vec<f64> = width.iter().map(|w| 1.0 / w).collect();
    let shift: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| -l / w).collect();
    let outputs = coeffs
        .into_iter()
        .map(|c| {
            let (unit_poly, conversion_bound) = c.to_power_basis(vars.clone())?;
            let poly = unit_poly.affine_compose(&scale, &shift)?;
            Ok(OutputApprox {
                coeffs: c,
                unit_poly,
                poly,
                conversion_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControllerApprox {
        domain: x.clone(),
        degree: d.clone(),
        outputs,
    })
}

/// `P_{κ,d}` over `x` for every output of `net`.
pub fn approx_controller(net: &Network, x: &IntervalBox, d: &DegreeVector) -> Result<Vec<MultiPoly>> {
    build_approx(net, x, d).map(|a| a.polys())
}

/// A controller approximation together with its certified per-output error
/// bounds: `κ_o(x) ∈ P_o(x) + [−ε_o, ε_o]` for every `x` in the domain.
#[derive(Clone, Debug, Serialize)]
pub struct BernsteinAbstraction {
    pub approx: ControllerApprox,
    pub eps: Vec<f64>,
}

impl BernsteinAbstraction {
    pub fn domain(&self) -> &IntervalBox {
        &self.approx.domain
    }

    pub fn degree(&self) -> &DegreeVector {
        &self.approx.degree
    }

    pub fn polys(&self) -> Vec<MultiPoly> {
        self.approx.polys()
    }
}
