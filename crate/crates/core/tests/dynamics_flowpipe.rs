mod common;

use nncs_reach::config::{load_system, system_to_json};
use nncs_reach::dynamics::{lie_derivative, parse_expr, SystemSpec};
use nncs_reach::flowpipe::{verify, verify_interval_baseline, Verdict, VerifyParams};
use nncs_reach::bernstein::DegreeVector;
use nncs_reach::interval::{Interval, IntervalBox};
use nncs_reach::nn::{Activation, Layer, Matrix, Network};
use nncs_reach::poly::Vars;
use nncs_reach::simulate::{default_dt, simulate_many};
use nncs_reach::taylor::TaylorModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{benchmark, random_point};

const BENCHMARKS: [&str; 6] = ["ex1", "ex2", "ex3", "ex4", "ex5", "ex6"];

/// Init box widened by one unit, with controls in [-2, 2].
fn probe_boxes(sys: &SystemSpec) -> (IntervalBox, IntervalBox) {
    let x = IntervalBox::new(sys.init.iter().map(|iv| iv.inflate(1.0)).collect());
    let u = IntervalBox::new(vec![Interval::new(-2.0, 2.0).unwrap(); sys.n_control()]);
    (x, u)
}

#[test]
fn benchmark_dynamics_print_and_reparse() {
    for name in BENCHMARKS {
        let (file, _) = benchmark(name);
        let sys = &file.system;
        for e in &sys.rhs {
            let text = e.display(&sys.symbols).to_string();
            assert_eq!(&parse_expr(&text, &sys.symbols).unwrap(), e, "{name}: {text}");
        }
        let back = load_system(&system_to_json(sys).to_string()).unwrap();
        assert_eq!(back.rhs, sys.rhs);
        assert_eq!(back.init, sys.init);
        assert_eq!(back.goal, sys.goal);
        assert_eq!((back.control_step, back.steps), (sys.control_step, sys.steps));
    }
}

#[test]
fn evaluation_backends_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for name in BENCHMARKS {
        let (file, _) = benchmark(name);
        let sys = &file.system;
        let (xb, ub) = probe_boxes(sys);
        let names: Vec<String> = sys.symbols.state.iter().chain(&sys.symbols.control).cloned().collect();
        let vars = Vars::new(names);
        let domain = IntervalBox::new(xb.iter().chain(ub.iter()).copied().collect());
        let tms: Vec<TaylorModel> =
            (0..domain.dim()).map(|i| TaylorModel::var(vars.clone(), domain.clone(), i, 5).unwrap()).collect();
        let (x_tm, u_tm) = tms.split_at(sys.n_state());
        for e in &sys.rhs {
            let over_box = e.eval_interval(&xb, &ub).unwrap();
            let tm = e.eval_tm(x_tm, u_tm, 5).unwrap();
            for _ in 0..500 {
                let x = random_point(&mut rng, &xb);
                let u = random_point(&mut rng, &ub);
                let v = e.eval(&x, &u).unwrap();
                let at_point = e.eval_interval(&IntervalBox::point(&x), &IntervalBox::point(&u)).unwrap();
                let xu: Vec<f64> = x.iter().chain(&u).copied().collect();
                assert!(at_point.contains(v), "{name}: {at_point} ∌ {v}");
                assert!(over_box.contains(v), "{name}: {over_box} ∌ {v}");
                let enc = tm.eval_enclosure(&xu).unwrap();
                assert!(enc.inflate(1e-12 * (1.0 + v.abs())).contains(v), "{name}: {enc} ∌ {v}");
            }
        }
    }
}

#[test]
fn lie_derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for name in BENCHMARKS {
        let (file, _) = benchmark(name);
        let sys = &file.system;
        let (xb, ub) = probe_boxes(sys);
        for e in &sys.rhs {
            let lie = lie_derivative(e, &sys.rhs);
            for _ in 0..100 {
                let x = random_point(&mut rng, &xb);
                let u = random_point(&mut rng, &ub);
                let f = sys.eval(&x, &u).unwrap();
                let h = 1e-5;
                let shifted = |s: f64| -> Vec<f64> { x.iter().zip(&f).map(|(a, b)| a + s * b).collect() };
                let fd = (e.eval(&shifted(h), &u).unwrap() - e.eval(&shifted(-h), &u).unwrap()) / (2.0 * h);
                let exact = lie.eval(&x, &u).unwrap();
                assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{name}: {fd} vs {exact}");
            }
        }
    }
}

/// Damped oscillator under a small tanh controller.
fn oscillator() -> (SystemSpec, Network) {
    let sys = SystemSpec::parse(
        vec!["x1".into(), "x2".into()],
        vec!["u".into()],
        &["x2", "-x1 - 0.5*x2 + u"],
        0.1,
        10,
        IntervalBox::from_bounds(&[(0.5, 0.55), (-0.1, -0.05)]).unwrap(),
        IntervalBox::new(vec![Interval::entire(); 2]),
    )
    .unwrap();
    let hidden = Layer::new(
        Matrix::from_rows(&[vec![0.8, -0.3], vec![0.2, 0.6], vec![-0.5, 0.4]]).unwrap(),
        vec![0.1, -0.2, 0.05],
        Activation::Tanh,
    )
    .unwrap();
    let out = Layer::new(Matrix::from_rows(&[vec![-0.7, -0.4, 0.3]]).unwrap(), vec![0.0], Activation::Linear).unwrap();
    (sys, Network::new(2, vec![hidden, out]).unwrap())
}

fn params() -> VerifyParams {
    VerifyParams::new(DegreeVector::new(vec![2, 2]).unwrap(), 0.005)
}

fn max_width(b: &IntervalBox) -> f64 {
    b.iter().map(Interval::width).fold(0.0, f64::max)
}

#[test]
fn flowpipes_tile_the_horizon_and_hold_trajectories() {
    let (sys, net) = oscillator();
    let v = verify(&sys, &net, &params()).unwrap();
    assert!(v.is_yes(), "{v}");
    assert_eq!(v.step, sys.steps);

    let horizon = sys.control_step * sys.steps as f64;
    assert_eq!(v.flowpipes.first().unwrap().t_lo, 0.0);
    assert!((v.flowpipes.last().unwrap().t_hi - horizon).abs() < 1e-12);
    for w in v.flowpipes.windows(2) {
        assert!(w[0].t_hi >= w[1].t_lo - 1e-12 && w[0].t_lo < w[1].t_lo, "gap between pipes");
    }

    let trajs = simulate_many(&sys, &net, 50, 1, default_dt(&sys)).unwrap();
    for tr in &trajs {
        for (t, x) in tr.times.iter().zip(&tr.states) {
            let p = v.pipe_at(*t).unwrap();
            assert!(p.enclosure.iter().zip(x).all(|(iv, s)| iv.inflate(1e-9).contains(*s)), "t = {t}");
        }
        for (k, b) in v.step_boxes.iter().enumerate() {
            let i = ((k as f64 * sys.control_step) / default_dt(&sys)).round() as usize;
            assert!(b.iter().zip(&tr.states[i]).all(|(iv, s)| iv.inflate(1e-9).contains(*s)));
        }
    }
}

#[test]
fn unreachable_goal_is_not_claimed() {
    let (mut sys, net) = oscillator();
    sys.goal = IntervalBox::from_bounds(&[(5.0, 6.0), (5.0, 6.0)]).unwrap();
    let v = verify(&sys, &net, &params()).unwrap();
    assert!(!v.is_yes(), "{v}");
}

#[test]
fn extra_error_never_narrows_flowpipes() {
    let (sys, net) = oscillator();
    let mut last: Option<Verdict> = None;
    for extra in [0.0, 0.01, 0.05] {
        let mut p = params();
        p.extra_eps = extra;
        let v = verify(&sys, &net, &p).unwrap();
        if let Some(prev) = &last {
            for (a, b) in prev.step_boxes.iter().zip(&v.step_boxes) {
                assert!(max_width(a) <= max_width(b) + 1e-12, "extra {extra}: {} > {}", max_width(a), max_width(b));
            }
        }
        last = Some(v);
    }
}

#[test]
fn bernstein_sets_no_wider_than_interval_baseline() {
    let (sys, net) = oscillator();
    let bern = verify(&sys, &net, &params()).unwrap();
    let intv = verify_interval_baseline(&sys, &net, &params()).unwrap();
    assert_eq!(bern.step_boxes.len(), intv.step_boxes.len());
    for (a, b) in bern.step_boxes.iter().zip(&intv.step_boxes) {
        assert!(max_width(a) <= max_width(b), "{} > {}", max_width(a), max_width(b));
    }
}

#[test]
fn verdict_json_shape() {
    let (sys, net) = oscillator();
    let v = verify(&sys, &net, &params()).unwrap();
    let j: serde_json::Value = serde_json::from_str(&v.to_json().to_string()).unwrap();
    assert_eq!(j["kind"], "Yes");
    assert_eq!(j["step"], sys.steps);
    assert_eq!(j["eps"].as_array().unwrap().len(), v.per_step_eps.len());
}
