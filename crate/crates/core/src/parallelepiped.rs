//! Folding Taylor-model remainders into auxiliary parameters.
//!
//! After a control step the state models have the form
//! `q(s) + B·r + N(s, r) + I`, where `r ∈ [-1, 1]^n` are the auxiliary
//! parameters introduced at the previous fold. Everything except `q` is
//! re-expressed as `c + M·r' + J` with fresh parameters `r'`, a matrix `M`
//! whose columns follow an orthogonalization of `B` (Lohner's QR scheme),
//! and a residual interval `J` that only collects rounding.

use crate::error::Result;
use crate::interval::{add_up, mul_up, Interval, IntervalBox};
use crate::poly::MultiPoly;
use crate::taylor::TaylorModel;

fn pt(x: f64) -> Interval {
    Interval::raw(x, x)
}

/// Orthonormal basis whose leading vectors span the dominant columns of `b`.
fn orthonormal_basis(b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b.len();
    let col = |k: usize| (0..n).map(|j| b[j][k]).collect::<Vec<f64>>();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut cols: Vec<Vec<f64>> = (0..n).map(col).collect();
    cols.sort_by(|a, c| norm(c).total_cmp(&norm(a)));
    let unit = (0..n).map(|k| {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        e
    });
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for mut v in cols.into_iter().chain(unit) {
        if q.len() == n {
            break;
        }
        let scale = norm(&v);
        if scale == 0.0 || !scale.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for u in &q {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, a) in v.iter_mut().zip(u) {
                    *x -= d * a;
                }
            }
        }
        let r = norm(&v);
        if r > 1e-8 * scale {
            q.push(v.iter().map(|x| x / r).collect());
        }
    }
    // q holds basis vectors; return them as the columns of Q (row-major).
    (0..n).map(|j| (0..n).map(|k| q[k][j]).collect()).collect()
}

/// Enclosure of `{B·r + e : r ∈ [-1,1]^n, |e| ≤ ρ}` as `M·r' + J`.
struct Fold {
    m: Vec<Vec<f64>>,
    residual: Vec<f64>,
    volume: f64,
}

fn fold_with(q: &[Vec<f64>], b: &[Vec<f64>], rho: &[f64]) -> Fold {
    let n = b.len();
    // w_k bounds |(Qᵀ v)_k| for every v in the set.
    let w: Vec<f64> = (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for l in 0..n {
                let a = (0..n).fold(Interval::zero(), |s, j| s + pt(q[j][k]) * pt(b[j][l]));
                acc = add_up(acc, a.mag());
            }
            for j in 0..n {
                acc = add_up(acc, mul_up(q[j][k].abs(), rho[j]));
            }
            acc
        })
        .collect();
    // |v_j| bound, for the defect of Q from orthogonality.
    let vb: Vec<f64> = (0..n)
        .map(|j| b[j].iter().fold(rho[j], |s, x| add_up(s, x.abs())))
        .collect();
    let mut m = vec![vec![0.0; n]; n];
    let mut residual = vec![0.0; n];
    for j in 0..n {
        let mut res = 0.0;
        for k in 0..n {
            // (I − Q Qᵀ)_jk
            let qq = (0..n).fold(Interval::zero(), |s, l| s + pt(q[j][l]) * pt(q[k][l]));
            let g = pt(if j == k { 1.0 } else { 0.0 }) - qq;
            res = add_up(res, mul_up(g.mag(), vb[k]));
            m[j][k] = q[j][k] * w[k];
            let err = (pt(q[j][k]) * pt(w[k]) - pt(m[j][k])).mag();
            res = add_up(res, err);
        }
        residual[j] = res;
    }
    let volume = w.iter().product();
    Fold { m, residual, volume }
}

/// Re-expresses `x` over fresh auxiliary parameters at indices
/// `first..first + n` of the model variables.
pub(crate) fn fold_remainders(x: &[TaylorModel], first: usize) -> Result<Vec<TaylorModel>> {
    let n = x.len();
    let aux = first..first + n;
    let is_aux = |i: usize| aux.contains(&i);
    let domain: IntervalBox = x[0].domain().clone();
    let vars = x[0].vars().clone();
    let order = x[0].order();

    let mut base = Vec::with_capacity(n);
    let mut b = vec![vec![0.0; n]; n];
    let mut centers = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    for (j, tm) in x.iter().enumerate() {
        let mut keep = Vec::new();
        let mut rest = Vec::new();
        for (e, c) in tm.poly().terms() {
            let aux_deg: u32 = e.iter().enumerate().filter(|(i, _)| is_aux(*i)).map(|(_, &k)| k).sum();
            let total: u32 = e.iter().sum();
            if aux_deg == 0 {
                keep.push((e.clone(), c));
            } else if aux_deg == 1 && total == 1 {
                let k = e.iter().position(|&k| k == 1).expect("one unit exponent") - first;
                b[j][k] = c;
            } else {
                rest.push((e.clone(), c));
            }
        }
        let rest = MultiPoly::from_terms(vars.clone(), rest)?;
        let e = tm.rem() + rest.bound(&domain)?;
        let c = e.mid();
        centers.push(c);
        rho.push(add_up(e.hi(), -c).max(add_up(c, -e.lo())));
        base.push(MultiPoly::from_terms(vars.clone(), keep)?);
    }

    let q = orthonormal_basis(&b);
    let identity: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|k| if j == k { 1.0 } else { 0.0 }).collect()).collect();
    let qr = fold_with(&q, &b, &rho);
    let boxed = fold_with(&identity, &b, &rho);
    let fold = if qr.volume.is_finite() && qr.volume < boxed.volume { qr } else { boxed };

    let params: Vec<TaylorModel> = aux
        .clone()
        .map(|i| TaylorModel::var(vars.clone(), domain.clone(), i, order))
        .collect::<Result<_>>()?;
    (0..n)
        .map(|j| {
            let mut tm = TaylorModel::new(base[j].clone(), Interval::zero(), domain.clone(), order)?
                .add_scalar(centers[j])
                .add_rem(Interval::symmetric(fold.residual[j]));
            for k in 0..n {
                if fold.m[j][k] != 0.0 {
                    tm = tm.add(&params[k].scale(fold.m[j][k]))?;
                }
            }
            Ok(tm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Vars;

    fn setup() -> (Vars, IntervalBox) {
        let vars = Vars::new(["s1", "s2", "r1", "r2", "t"]);
        let dom = IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (0.0, 0.1)]).unwrap();
        (vars, dom)
    }

    fn tm(vars: &Vars, dom: &IntervalBox, terms: &[(&[u32], f64)], rem: f64) -> TaylorModel {
        let p = MultiPoly::from_terms(vars.clone(), terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap();
        TaylorModel::new(p, Interval::symmetric(rem), dom.clone(), 4).unwrap()
    }

    #[test]
    fn remainder_becomes_parameter() {
        let (v, d) = setup();
        let x = vec![
            tm(&v, &d, &[(&[1, 0, 0, 0, 0], 0.5)], 0.01),
            tm(&v, &d, &[(&[0, 1, 0, 0, 0], 0.25), (&[0, 0, 0, 0, 0], 1.0)], 0.02),
        ];
        let f = fold_remainders(&x, 2).unwrap();
        assert_eq!(f[0].poly().coeff(&[0, 0, 1, 0, 0]).abs(), 0.01);
        assert_eq!(f[1].poly().coeff(&[0, 0, 0, 1, 0]).abs(), 0.02);
        assert!(f[0].rem().width() < 1e-15);
    }

    #[test]
    fn fold_encloses_samples() {
        // A rotated, skewed parallelepiped plus nonlinear aux terms.
        let (v, d) = setup();
        let x = vec![
            tm(&v, &d, &[(&[1, 0, 0, 0, 0], 0.3), (&[0, 0, 1, 0, 0], 0.05), (&[0, 0, 0, 1, 0], 0.04), (&[1, 0, 1, 0, 0], 0.002)], 1e-3),
            tm(&v, &d, &[(&[0, 1, 0, 0, 0], 0.2), (&[0, 0, 1, 0, 0], 0.049), (&[0, 0, 0, 1, 0], -0.041), (&[0, 0, 2, 0, 0], 0.003)], 2e-3),
        ];
        let f = fold_remainders(&x, 2).unwrap();
        // Every point of the original set must be reachable by the fold for
        // the same s: check that the folded range in each dim contains it and
        // that the 2-D set inclusion holds via the inverse map.
        let m: Vec<Vec<f64>> = (0..2)
            .map(|j| (0..2).map(|k| f[j].poly().coeff(&[0, 0, (k == 0) as u32, (k == 1) as u32, 0])).collect())
            .collect();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let mut rng = 1u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..2000 {
            let p = [next(), next(), next(), next(), 0.0];
            let e = [next(), next()];
            let val: Vec<f64> = (0..2)
                .map(|j| x[j].poly().eval(&p).unwrap() + e[j] * x[j].rem().hi())
                .collect();
            let mut q = p;
            q[2] = 0.0;
            q[3] = 0.0;
            let base: Vec<f64> = (0..2).map(|j| f[j].poly().eval(&q).unwrap()).collect();
            let dv = [val[0] - base[0], val[1] - base[1]];
            let r1 = (m[1][1] * dv[0] - m[0][1] * dv[1]) / det;
            let r2 = (m[0][0] * dv[1] - m[1][0] * dv[0]) / det;
            assert!(r1.abs() <= 1.0 + 1e-9 && r2.abs() <= 1.0 + 1e-9, "{r1} {r2}");
        }
    }

    #[test]
    fn rotation_keeps_volume() {
        // B = rotation by 0.3 rad scaled by 0.1; QR must not inflate it.
        let (v, d) = setup();
        let (c, s) = (0.3f64.cos() * 0.1, 0.3f64.sin() * 0.1);
        let x = vec![
            tm(&v, &d, &[(&[0, 0, 1, 0, 0], c), (&[0, 0, 0, 1, 0], -s)], 0.0),
            tm(&v, &d, &[(&[0, 0, 1, 0, 0], s), (&[0, 0, 0, 1, 0], c)], 0.0),
        ];
        let f = fold_remainders(&x, 2).unwrap();
        for j in 0..2 {
            let enc = f[j].enclosure();
            assert!(enc.width() <= 2.0 * (c + s) * (1.0 + 1e-9));
        }
        let m00 = f[0].poly().coeff(&[0, 0, 1, 0, 0]);
        let m01 = f[0].poly().coeff(&[0, 0, 0, 1, 0]);
        let m10 = f[1].poly().coeff(&[0, 0, 1, 0, 0]);
        let m11 = f[1].poly().coeff(&[0, 0, 0, 1, 0]);
        assert!(((m00 * m11 - m01 * m10).abs() - 0.01).abs() < 1e-9);
    }
}
