//! Certified Lipschitz constants of feed-forward networks over an input box.
//!
//! Intervals are pushed forward layer by layer. Each layer contributes the
//! factor `sup |act'| · ‖W‖` over its pre-activation box, and the network
//! constant is the product of the factors. ReLU layers zero the rows of
//! neurons that are provably inactive. All norms are induced 2-norms,
//! bounded from above by [`matrix_opnorm_ub`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, Interval, IntervalBox};
use crate::nn::{sigmoid, tanh, Activation, Matrix, Network};

/// Relative shrink applied to subtracted terms computed through libm, so the
/// derivative suprema are never underestimated.
const SUP_SAFETY: f64 = 1e-9;

/// Pre- and post-activation enclosures of one layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerIntervals {
    pub pre_activation: IntervalBox,
    pub post_activation: IntervalBox,
}

/// Interval image of a monotone activation.
pub fn activation_image(act: Activation, y: Interval) -> Interval {
    match act {
        Activation::Linear => y,
        Activation::Relu => Interval::raw(y.lo().max(0.0), y.hi().max(0.0)),
        Activation::Sigmoid => {
            let r = y.monotone_libm(sigmoid);
            Interval::raw(r.lo().max(0.0), r.hi().min(1.0))
        }
        Activation::Tanh => {
            let r = y.monotone_libm(tanh);
            Interval::raw(r.lo().max(-1.0), r.hi().min(1.0))
        }
    }
}

/// `W · x + b` in interval arithmetic.
pub fn affine_image(w: &Matrix, b: &[f64], x: &IntervalBox) -> IntervalBox {
    (0..w.rows())
        .map(|i| {
            w.row(i)
                .iter()
                .zip(x.iter())
                .fold(Interval::point(b[i]), |acc, (&wij, xj)| acc + xj.scale(wij))
        })
        .collect::<Vec<_>>()
        .into()
}

/// Layer-by-layer interval enclosures of the network over `x`.
pub fn propagate_intervals(net: &Network, x: &IntervalBox) -> Result<Vec<LayerIntervals>> {
    if x.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input box",
            expected: net.input_dim(),
            found: x.dim(),
        });
    }
    let mut current = x.clone();
    let mut out = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let pre = affine_image(&layer.weights, &layer.bias, &current);
        let post: IntervalBox = pre
            .iter()
            .map(|&y| activation_image(layer.act, y))
            .collect::<Vec<_>>()
            .into();
        current = post.clone();
        out.push(LayerIntervals {
            pre_activation: pre,
            post_activation: post,
        });
    }
    Ok(out)
}

/// Enclosure of the network output over `x` (the zero-order abstraction).
pub fn output_enclosure(net: &Network, x: &IntervalBox) -> Result<IntervalBox> {
    let layers = propagate_intervals(net, x)?;
    Ok(layers
        .last()
        .map(|l| l.post_activation.clone())
        .expect("networks have at least one layer"))
}

/// Supremum of the activation derivative over a pre-activation interval.
pub fn derivative_sup(act: Activation, y: Interval) -> f64 {
    match act {
        Activation::Linear => 1.0,
        Activation::Relu => {
            if y.hi() <= 0.0 {
                0.0
            } else {
                1.0
            }
        }
        Activation::Sigmoid => {
            if y.contains_zero() {
                0.25
            } else {
                let m = (0.5 - sigmoid(y.lo()))
                    .powi(2)
                    .min((0.5 - sigmoid(y.hi())).powi(2));
                (0.25 - m * (1.0 - SUP_SAFETY)).min(0.25)
            }
        }
        Activation::Tanh => {
            if y.contains_zero() {
                1.0
            } else {
                let m = tanh(y.lo()).powi(2).min(tanh(y.hi()).powi(2));
                (1.0 - m * (1.0 - SUP_SAFETY)).min(1.0)
            }
        }
    }
}

/// Lipschitz factor of a single layer over its pre-activation box.
pub fn layer_lipschitz(act: Activation, w: &Matrix, pre: &IntervalBox) -> f64 {
    match act {
        Activation::Linear => matrix_opnorm_ub(w),
        Activation::Relu => {
            let keep: Vec<bool> = pre.iter().map(|y| y.hi() > 0.0).collect();
            if keep.iter().all(|&k| k) {
                matrix_opnorm_ub(w)
            } else if keep.iter().all(|&k| !k) {
                0.0
            } else {
                matrix_opnorm_ub(&w.mask_rows(&keep)).min(matrix_opnorm_ub(w))
            }
        }
        Activation::Sigmoid | Activation::Tanh => {
            let sup = pre
                .iter()
                .map(|&y| derivative_sup(act, y))
                .fold(0.0, f64::max);
            mul_up(sup, matrix_opnorm_ub(w))
        }
    }
}

/// Box-independent layer bound: `¼‖W‖` for sigmoid, `‖W‖` otherwise.
pub fn layer_lipschitz_global(act: Activation, w: &Matrix) -> f64 {
    match act {
        Activation::Sigmoid => mul_up(0.25, matrix_opnorm_ub(w)),
        _ => matrix_opnorm_ub(w),
    }
}

/// Network Lipschitz constant with its per-layer factors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub lipschitz: f64,
    pub layer_factors: Vec<f64>,
}

/// Product of the per-layer factors over the propagated pre-activation boxes.
pub fn network_lipschitz_report(net: &Network, x: &IntervalBox) -> Result<LipschitzReport> {
    let layers = propagate_intervals(net, x)?;
    let factors: Vec<f64> = net
        .layers()
        .iter()
        .zip(&layers)
        .map(|(layer, iv)| layer_lipschitz(layer.act, &layer.weights, &iv.pre_activation))
        .collect();
    let lipschitz = factors.iter().fold(1.0, |acc, &f| mul_up(acc, f));
    if !lipschitz.is_finite() {
        return Err(Error::NonFinite("Lipschitz constant".into()));
    }
    Ok(LipschitzReport {
        lipschitz,
        layer_factors: factors,
    })
}

pub fn network_lipschitz(net: &Network, x: &IntervalBox) -> Result<f64> {
    network_lipschitz_report(net, x).map(|r| r.lipschitz)
}

/// Square root rounded upward.
pub(crate) fn sqrt_up(x: f64) -> f64 {
    let s = x.sqrt();
    if s.mul_add(s, -x) < 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Upward-rounded `‖W‖₁`, `‖W‖_∞` and `‖W‖_F`.
fn analytic_norms(w: &Matrix) -> (f64, f64, f64) {
    let mut col = vec![0.0f64; w.cols()];
    let mut row_max = 0.0f64;
    let mut frob2 = 0.0f64;
    for i in 0..w.rows() {
        let mut rs = 0.0f64;
        for (j, &v) in w.row(i).iter().enumerate() {
            let a = v.abs();
            rs = add_up(rs, a);
            col[j] = add_up(col[j], a);
            frob2 = add_up(frob2, mul_up(a, a));
        }
        row_max = row_max.max(rs);
    }
    let col_max = col.into_iter().fold(0.0, f64::max);
    (col_max, row_max, sqrt_up(frob2))
}

/// Gram matrix of the smaller side: `WᵀW` or `WWᵀ`.
fn gram(w: &Matrix) -> Matrix {
    let (n, by_cols) = if w.cols() <= w.rows() {
        (w.cols(), true)
    } else {
        (w.rows(), false)
    };
    let mut g = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let s: f64 = if by_cols {
                (0..w.rows()).map(|i| w.get(i, a) * w.get(i, b)).sum()
            } else {
                w.row(a).iter().zip(w.row(b)).map(|(x, y)| x * y).sum()
            };
            g.set(a, b, s);
            g.set(b, a, s);
        }
    }
    g
}

/// Largest eigenvalue estimate of a symmetric PSD matrix by power iteration.
fn power_iteration(g: &Matrix) -> f64 {
    let n = g.rows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let gv = g.mul_vec(&v);
        let next: f64 = gv.iter().zip(&v).map(|(a, b)| a * b).sum();
        let done = (next - lambda).abs() <= 1e-15 * next.abs();
        lambda = next;
        v = gv;
        if done {
            break;
        }
    }
    lambda.max(0.0)
}

/// Whether the symmetric matrix `g` is positive definite, via a
/// floating-point Cholesky factorisation that must succeed on `g − αI` with
/// `α` covering the factorisation's backward error.
fn is_positive_definite(g: &Matrix) -> bool {
    let n = g.rows();
    let trace: f64 = (0..n).map(|i| g.get(i, i)).sum();
    if trace <= 0.0 {
        return false;
    }
    let alpha = 2.0 * (n as f64 + 2.0) * f64::EPSILON * trace + f64::MIN_POSITIVE;
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let mut d = g.get(j, j) - alpha;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    true
}

/// Certified upper bound on the spectral norm `‖W‖₂`.
///
/// Returns the minimum of `sqrt(‖W‖₁‖W‖_∞)`, `‖W‖_F` and a power-iteration
/// estimate inflated by `1 + 1e-6`. The estimate is only used once
/// `c²I − Gram(W)` has been shown positive definite (with margins for the
/// rounding in forming the Gram matrix), so the result never falls below the
/// true norm.
pub fn matrix_opnorm_ub(w: &Matrix) -> f64 {
    if w.data().iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let (n1, ninf, nf) = analytic_norms(w);
    let analytic = sqrt_up(mul_up(n1, ninf)).min(nf);

    let g = gram(w);
    let n = g.rows();
    let k = w.rows().max(w.cols()) as f64;
    // |fl(G) − G| ≤ γ_k |W|ᵀ|W|, whose 2-norm is at most γ_k ‖W‖_F².
    let gram_err = mul_up((k + 2.0) * f64::EPSILON, mul_up(nf, nf));
    let sigma = power_iteration(&g).sqrt();

    for inflate in [1e-6, 1e-4, 1e-2] {
        let c = sigma * (1.0 + inflate);
        if c >= analytic {
            break;
        }
        let shift = c * c - gram_err;
        let mut m = Matrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let v = if a == b { shift - g.get(a, a) } else { -g.get(a, b) };
                m.set(a, b, v);
            }
        }
        if is_positive_definite(&m) {
            return c.next_up();
        }
    }
    analytic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn boxed(b: &[(f64, f64)]) -> IntervalBox {
        IntervalBox::from_bounds(b).unwrap()
    }

    #[test]
    fn opnorm_examples() {
        assert!((matrix_opnorm_ub(&Matrix::identity(3)) - 1.0).abs() < 1e-9);
        assert!((matrix_opnorm_ub(&mat(&[&[3.0, 0.0], &[0.0, 2.0]])) - 3.0).abs() < 1e-9);
        assert!((matrix_opnorm_ub(&mat(&[&[1.0, 1.0], &[1.0, 1.0]])) - 2.0).abs() < 1e-9);
        assert_eq!(matrix_opnorm_ub(&Matrix::zeros(2, 3)), 0.0);
    }

    #[test]
    fn opnorm_uses_certified_power_estimate() {
        // WᵀW = 5 I, so ‖W‖ = sqrt(5), while sqrt(‖W‖₁‖W‖_∞) = 3 and
        // ‖W‖_F = sqrt(10).
        let w = mat(&[&[1.0, 2.0], &[-2.0, 1.0], &[0.0, 0.0]]);
        let ub = matrix_opnorm_ub(&w);
        assert!(ub >= 5f64.sqrt());
        assert!(ub <= 5f64.sqrt() * (1.0 + 2e-6));
    }

    #[test]
    fn propagate_examples() {
        let lin = Network::new(
            1,
            vec![Layer::new(mat(&[&[1.0]]), vec![0.0], Activation::Linear).unwrap()],
        )
        .unwrap();
        let li = propagate_intervals(&lin, &boxed(&[(0.0, 1.0)])).unwrap();
        assert_eq!(li[0].pre_activation, boxed(&[(0.0, 1.0)]));
        assert_eq!(li[0].post_activation, boxed(&[(0.0, 1.0)]));

        let relu = activation_image(Activation::Relu, Interval::new(-2.0, -1.0).unwrap());
        assert_eq!(relu, Interval::zero());
        let sig = activation_image(Activation::Sigmoid, Interval::zero());
        assert!(sig.contains(0.5) && sig.width() < 1e-14);
    }

    #[test]
    fn layer_factor_examples() {
        let w = mat(&[&[2.0, -1.0], &[0.5, 1.0]]);
        let norm = matrix_opnorm_ub(&w);
        let around_zero = boxed(&[(-1.0, 1.0), (-0.5, 2.0)]);
        assert_eq!(layer_lipschitz(Activation::Sigmoid, &w, &around_zero), mul_up(0.25, norm));

        let dead = boxed(&[(-3.0, -1.0), (-2.0, 0.0)]);
        assert_eq!(layer_lipschitz(Activation::Relu, &w, &dead), 0.0);

        let t = layer_lipschitz(Activation::Tanh, &mat(&[&[1.0]]), &boxed(&[(1.0, 2.0)]));
        let expected = 1.0 - 1f64.tanh().powi(2);
        assert!((t - expected).abs() < 1e-8 && t >= expected, "{t} vs {expected}");
        assert!((t - 0.41997).abs() < 1e-5);
    }

    #[test]
    fn network_examples() {
        let id = Network::new(
            2,
            vec![Layer::new(Matrix::identity(2), vec![0.0; 2], Activation::Linear).unwrap()],
        )
        .unwrap();
        let l = network_lipschitz(&id, &boxed(&[(0.0, 1.0), (0.0, 1.0)])).unwrap();
        assert!((l - 1.0).abs() < 1e-9);

        let w1 = mat(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let w2 = mat(&[&[0.0, 2.0]]);
        let stacked = Network::new(
            2,
            vec![
                Layer::new(w1.clone(), vec![0.0; 2], Activation::Linear).unwrap(),
                Layer::new(w2.clone(), vec![0.0], Activation::Linear).unwrap(),
            ],
        )
        .unwrap();
        let l = network_lipschitz(&stacked, &boxed(&[(0.0, 1.0), (0.0, 1.0)])).unwrap();
        assert!((l - 6.0).abs() < 1e-8);

        let dead = Network::new(
            1,
            vec![
                Layer::new(mat(&[&[1.0], &[2.0]]), vec![-5.0, -5.0], Activation::Relu).unwrap(),
                Layer::new(mat(&[&[1.0, 1.0]]), vec![0.0], Activation::Linear).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(network_lipschitz(&dead, &boxed(&[(0.0, 1.0)])).unwrap(), 0.0);
    }
}
