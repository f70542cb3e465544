use nncs_reach::interval::{Interval, IntervalBox};
use nncs_reach::poly::{MultiPoly, Vars};
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = (Interval, f64)> {
    // An interval with a member point.
    (-1e3..1e3f64, 0.0..10.0f64, 0.0..=1.0f64).prop_map(|(lo, w, t)| {
        let iv = Interval::new(lo, lo + w).unwrap();
        (iv, (lo + t * w).clamp(iv.lo(), iv.hi()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn binary_ops_enclose_points((a, x) in interval(), (b, y) in interval()) {
        let (px, py) = (Interval::point(x), Interval::point(y));
        for (exact, on_points, on_sets) in [
            (x + y, px + py, a + b),
            (x - y, px - py, a - b),
            (x * y, px * py, a * b),
        ] {
            prop_assert!(on_points.contains(exact), "{on_points} ∌ {exact}");
            prop_assert!(on_sets.contains(exact), "{on_sets} ∌ {exact}");
        }
    }
}

proptest! {
    #[test]
    fn unary_ops_enclose_points((a, x) in interval(), n in 0u32..6) {
        prop_assert!(a.sin().contains(x.sin()));
        prop_assert!(a.cos().contains(x.cos()));
        prop_assert!(a.sqr().contains(x * x));
        let p = a.powi(n);
        let v = x.powi(n as i32);
        prop_assert!(p.inflate(1e-12 * v.abs()).contains(v), "{p} ∌ {v}");
    }

    #[test]
    fn partition_covers_parent(
        bounds in prop::collection::vec((-5.0..5.0f64, 0.01..3.0f64), 1..4),
        p in prop::collection::vec(1usize..6, 3),
        probes in prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 3), 50),
    ) {
        let b = IntervalBox::from_bounds(&bounds.iter().map(|&(l, w)| (l, l + w)).collect::<Vec<_>>()).unwrap();
        let p = &p[..b.dim()];
        let cells = b.partition(p).unwrap();
        prop_assert_eq!(cells.len(), p.iter().product::<usize>());
        for c in &cells {
            prop_assert!(c.is_subset_of(&b));
            prop_assert!(c.contains(&c.center()));
        }
        for t in probes {
            let x: Vec<f64> = b.iter().zip(&t).map(|(iv, s)| (iv.lo() + s * iv.width()).min(iv.hi())).collect();
            prop_assert!(cells.iter().any(|c| c.contains(&x)), "{:?} not covered", x);
        }
        // Cells only share faces: total volume is the parent's.
        let vol = |bx: &IntervalBox| bx.iter().map(|iv| iv.width()).product::<f64>();
        let sum: f64 = cells.iter().map(vol).sum();
        prop_assert!((sum - vol(&b)).abs() <= 1e-9 * vol(&b));
    }
}

fn vars() -> Vars {
    Vars::new(["x", "y", "z"])
}

/// Sparse polynomial with small integer coefficients, so that ring
/// identities hold exactly in floating point.
fn poly() -> impl Strategy<Value = MultiPoly> {
    prop::collection::vec((prop::collection::vec(0u32..3, 3), -4i32..=4), 0..6)
        .prop_map(|terms| MultiPoly::from_terms(vars(), terms.into_iter().map(|(e, c)| (e, f64::from(c)))).unwrap())
}

proptest! {
    #[test]
    fn ring_laws(p in poly(), q in poly(), r in poly()) {
        prop_assert_eq!(p.add(&q).unwrap(), q.add(&p).unwrap());
        prop_assert_eq!(p.mul(&q).unwrap(), q.mul(&p).unwrap());
        prop_assert_eq!(p.add(&q).unwrap().add(&r).unwrap(), p.add(&q.add(&r).unwrap()).unwrap());
        prop_assert_eq!(p.mul(&q).unwrap().mul(&r).unwrap(), p.mul(&q.mul(&r).unwrap()).unwrap());
        prop_assert_eq!(
            p.mul(&q.add(&r).unwrap()).unwrap(),
            p.mul(&q).unwrap().add(&p.mul(&r).unwrap()).unwrap()
        );
        prop_assert!(p.sub(&p).unwrap().is_zero());
    }

    #[test]
    fn bound_contains_values(
        p in poly(),
        lo in prop::collection::vec(-2.0..2.0f64, 3),
        w in prop::collection::vec(0.0..2.0f64, 3),
        probes in prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 3), 1000),
    ) {
        let b = IntervalBox::from_bounds(&lo.iter().zip(&w).map(|(l, w)| (*l, l + w)).collect::<Vec<_>>()).unwrap();
        let bound = p.bound(&b).unwrap();
        for t in probes {
            let x: Vec<f64> = b.iter().zip(&t).map(|(iv, s)| (iv.lo() + s * iv.width()).min(iv.hi())).collect();
            let v = p.eval(&x).unwrap();
            prop_assert!(bound.inflate(1e-12 * (1.0 + v.abs())).contains(v), "{} ∌ {}", bound, v);
        }
    }

    #[test]
    fn affine_compose_matches_substitution(
        p in poly(),
        scale in prop::collection::vec(-2.0..2.0f64, 3),
        shift in prop::collection::vec(-2.0..2.0f64, 3),
        probes in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 1000),
    ) {
        let q = p.affine_compose(&scale, &shift).unwrap();
        for x in probes {
            let y: Vec<f64> = x.iter().zip(&scale).zip(&shift).map(|((x, s), t)| s * x + t).collect();
            let (a, b) = (q.eval(&x).unwrap(), p.eval(&y).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{} vs {}", a, b);
        }
    }
}
