//! Closed-loop reachability: per control step, abstract the controller over
//! the current reachable set, then integrate the plant for one control period
//! with Taylor-model flowpipes.
//!
//! State sets are Taylor models over normalized initial-state variables
//! `s ∈ [-1, 1]^n`, so dependencies on the initial state survive across
//! control steps. Flowpipes add a local time variable `t ∈ [0, h]`.

use serde::Serialize;

use crate::bernstein::{build_approx, DegreeVector};
use crate::dynamics::SystemSpec;
use crate::series::SeriesTape;
use crate::error::{Error, Result};
use crate::error_bound::{certify, CertifyOptions, ErrorReport, DEFAULT_MAX_SAMPLES};
use crate::interval::{add_up, mul_up, Interval, IntervalBox};
use crate::lipschitz::output_enclosure;
use crate::nn::Network;
use crate::parallelepiped::fold_remainders;
use crate::poly::Vars;
use crate::taylor::{compose_poly, TaylorModel, DEFAULT_ORDER};

/// How the controller is abstracted at each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Bernstein polynomial plus certified error bound.
    Bernstein,
    /// Interval enclosure of the network output over the state box.
    Interval,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernstein" => Ok(Mode::Bernstein),
            "interval" => Ok(Mode::Interval),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (expected bernstein or interval)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyParams {
    /// Bernstein degree per state dimension.
    pub degree: DegreeVector,
    /// Sampling precision for the error bound.
    pub delta_bar: f64,
    pub tm_order: u32,
    /// Integration sub-steps per control step.
    pub substeps: usize,
    pub mode: Mode,
    /// A state box wider than this in any dimension counts as blow-up.
    pub width_cap: f64,
    /// Sampling budget for the error bound; beyond it the a priori bound is used.
    pub max_samples: usize,
    /// Report the first step whose state box lies in the goal.
    pub check_every_step: bool,
    /// Width given to degenerate state dimensions before approximation.
    pub thicken: f64,
    /// Extra slack added to every controller error bound.
    pub extra_eps: f64,
    /// Replace the state Taylor models by their box every this many steps.
    pub rebox_every: Option<usize>,
    /// Carry remainders between control steps as auxiliary parameters.
    pub symbolic_remainder: bool,
}

impl VerifyParams {
    pub fn new(degree: DegreeVector, delta_bar: f64) -> Self {
        Self {
            degree,
            delta_bar,
            tm_order: DEFAULT_ORDER,
            substeps: 10,
            mode: Mode::Bernstein,
            width_cap: 100.0,
            max_samples: DEFAULT_MAX_SAMPLES,
            check_every_step: false,
            thicken: 1e-9,
            extra_eps: 0.0,
            rebox_every: None,
            symbolic_remainder: true,
        }
    }

    fn validate(&self, sys: &SystemSpec) -> Result<()> {
        if self.degree.len() != sys.n_state() {
            return Err(Error::DimensionMismatch {
                what: "degree vector",
                expected: sys.n_state(),
                found: self.degree.len(),
            });
        }
        let positive = [
            ("delta_bar", self.delta_bar),
            ("width_cap", self.width_cap),
            ("thicken", self.thicken),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tm_order == 0 || self.substeps == 0 {
            return Err(Error::InvalidArgument("tm_order and substeps must be at least 1".into()));
        }
        if !(self.extra_eps >= 0.0) {
            return Err(Error::InvalidArgument("extra_eps must be non-negative".into()));
        }
        Ok(())
    }
}

/// One flowpipe segment.
#[derive(Clone, Debug, Serialize)]
pub struct Flowpipe {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Interval enclosure of the reachable states over `[t_lo, t_hi]`.
    #[serde(rename = "box")]
    pub enclosure: IntervalBox,
    /// Control step this segment belongs to.
    #[serde(skip)]
    pub step: usize,
    /// State Taylor models over the initial variables and local time.
    #[serde(skip)]
    pub tm: Vec<TaylorModel>,
}

/// Everything computed for one control step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub u_tm: Vec<TaylorModel>,
    pub pipes: Vec<Flowpipe>,
    pub next_init: Vec<TaylorModel>,
    pub eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    Yes,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub step: usize,
    pub flowpipes: Vec<Flowpipe>,
    /// Controller error bounds per step and output.
    pub per_step_eps: Vec<Vec<f64>>,
    /// Box enclosures of `X_0, X_1, ...`.
    pub step_boxes: Vec<IntervalBox>,
    /// Why the run stopped early, if it did.
    pub reason: Option<String>,
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    kind: VerdictKind,
    step: usize,
    eps: &'a [Vec<f64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        self.kind == VerdictKind::Yes
    }

    /// `{"kind": ..., "step": n, "eps": [...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(VerdictJson {
            kind: self.kind,
            step: self.step,
            eps: &self.per_step_eps,
            reason: self.reason.as_deref(),
        })
        .expect("verdict serializes")
    }

    /// Per completed step, the largest flowpipe width in each dimension.
    pub fn step_widths(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in &self.flowpipes {
            if p.step >= out.len() {
                out.resize(p.step + 1, vec![0.0; p.enclosure.dim()]);
            }
            for (w, iv) in out[p.step].iter_mut().zip(p.enclosure.iter()) {
                *w = w.max(iv.width());
            }
        }
        out
    }

    /// The flowpipe whose time span contains `t` (the earlier one at shared
    /// endpoints).
    pub fn pipe_at(&self, t: f64) -> Option<&Flowpipe> {
        let i = self.flowpipes.partition_point(|p| p.t_hi < t);
        self.flowpipes.get(i).filter(|p| p.t_lo <= t)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            VerdictKind::Yes => "Yes",
            VerdictKind::Unknown => "Unknown",
        };
        write!(f, "{kind}({})", self.step)
    }
}

/// Variables of the state Taylor models: one per state, optionally one
/// auxiliary remainder parameter per state, then local time.
pub fn flow_vars(sys: &SystemSpec, aux: bool) -> Vars {
    let states = sys.symbols.state.iter();
    let params = states.clone().map(|s| format!("{s}_0"));
    let rems = states.filter(|_| aux).map(|s| format!("{s}_r"));
    Vars::new(params.chain(rems).chain(std::iter::once("t".to_string())))
}

/// `[-1, 1]^p × [0, h]`.
pub fn flow_domain(p: usize, h: f64) -> IntervalBox {
    let mut dims = vec![Interval::raw(-1.0, 1.0); p];
    dims.push(Interval::raw(0.0, h));
    IntervalBox::new(dims)
}

/// Linear Taylor models `mid_j + r_j · s_j` covering `b`.
pub fn box_tms(b: &IntervalBox, vars: &Vars, domain: &IntervalBox, order: u32) -> Result<Vec<TaylorModel>> {
    b.iter()
        .enumerate()
        .map(|(j, iv)| {
            let m = iv.mid();
            let r = add_up(iv.hi(), -m).max(add_up(m, -iv.lo()));
            let s = TaylorModel::var(vars.clone(), domain.clone(), j, order)?;
            Ok(s.scale(r).add_scalar(m))
        })
        .collect()
}

fn enclosure_box(tms: &[TaylorModel]) -> IntervalBox {
    IntervalBox::new(tms.iter().map(TaylorModel::enclosure).collect())
}

fn thicken(b: &IntervalBox, eps: f64) -> IntervalBox {
    IntervalBox::new(
        b.iter()
            .map(|iv| {
                if iv.width() < eps {
                    let m = iv.mid();
                    iv.hull(&Interval::raw((m - eps / 2.0).next_down(), (m + eps / 2.0).next_up()))
                } else {
                    *iv
                }
            })
            .collect(),
    )
}

/// Abstracts the controller over the state set `x_set`:
/// `U = P(x) + [−ε, ε]` as Taylor models over the same variables.
pub fn controller_tm(
    net: &Network,
    x_set: &[TaylorModel],
    degree: &DegreeVector,
    opts: CertifyOptions,
    thicken_eps: f64,
) -> Result<(Vec<TaylorModel>, Vec<ErrorReport>)> {
    let b = thicken(&enclosure_box(x_set), thicken_eps);
    let approx = build_approx(net, &b, degree)?;
    let (abs, reports) = certify(net, approx, opts)?;
    let order = x_set[0].order();
    // Unit-box coordinates x' = (x − l) / w.
    let unit: Vec<TaylorModel> = x_set
        .iter()
        .zip(b.iter())
        .map(|(tm, iv)| tm.add_scalar(-iv.lo()).div_scalar(iv.hi() - iv.lo()))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(abs.eps.len());
    for (o, &eps) in abs.approx.outputs.iter().zip(&abs.eps) {
        let u = compose_poly(&o.unit_poly, &unit, order)?;
        out.push(u.add_rem(Interval::symmetric(eps)));
    }
    Ok((out, reports))
}

/// Zero-order abstraction: the interval enclosure of the network output.
pub fn controller_tm_interval(net: &Network, x_set: &[TaylorModel]) -> Result<Vec<TaylorModel>> {
    let b = enclosure_box(x_set);
    let like = &x_set[0];
    output_enclosure(net, &b)?
        .iter()
        .map(|&iv| TaylorModel::from_interval(like.vars().clone(), like.domain().clone(), iv, like.order()))
        .collect()
}

const APRIORI_ITERATIONS: usize = 50;

/// A box `B` with `X + [0, h] · f(B, U) ⊆ B`, which therefore contains every
/// trajectory from `X` under constant controls in `U` for time `h`.
pub fn apriori_enclosure(sys: &SystemSpec, x: &IntervalBox, u: &IntervalBox, h: f64) -> Result<IntervalBox> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let time = Interval::raw(0.0, h);
    let inflate = |b: &IntervalBox| {
        IntervalBox::new(b.iter().map(|iv| iv.inflate(0.1 * iv.width() + 1e-4)).collect())
    };
    let picard = |b: &IntervalBox| -> Result<IntervalBox> {
        let f = sys.eval_interval(b, u)?;
        Ok(IntervalBox::new(
            x.iter().zip(f.iter()).map(|(&xi, &fi)| xi + time * fi).collect(),
        ))
    };
    let mut b = inflate(x);
    for _ in 0..APRIORI_ITERATIONS {
        let next = picard(&b)?;
        if !next.iter().all(Interval::is_finite) {
            break;
        }
        if next.is_subset_of(&b) {
            return Ok(next);
        }
        b = inflate(&b.hull(&next));
    }
    Err(Error::Integration {
        time: h,
        msg: "no a priori enclosure found".into(),
    })
}

/// Result of one integration sub-step.
#[derive(Clone, Debug)]
pub struct SubStep {
    /// State models over `(s, t)` with `t ∈ [0, h]`.
    pub tm: Vec<TaylorModel>,
    pub enclosure: IntervalBox,
    /// State models at `t = h`.
    pub end: Vec<TaylorModel>,
}

/// Integrates `ẋ = f(x, u)` for time `h` from the state models `x0` under the
/// constant control models `u_tm`, by a time-Taylor expansion of order `k`,
/// with the Lagrange remainder bounded over the a priori enclosure.
pub fn tm_integrate_step(
    sys: &SystemSpec,
    tape: &SeriesTape,
    x0: &[TaylorModel],
    u_tm: &[TaylorModel],
    h: f64,
    order: u32,
) -> Result<SubStep> {
    let n = sys.n_state();
    let time_var = x0[0].vars().len() - 1;
    let domain = flow_domain(time_var, h);
    let x0: Vec<TaylorModel> = x0.iter().map(|t| t.with_domain(domain.clone())).collect::<Result<_>>()?;
    let u_tm: Vec<TaylorModel> = u_tm.iter().map(|t| t.with_domain(domain.clone())).collect::<Result<_>>()?;
    let xb = enclosure_box(&x0);
    let ub = enclosure_box(&u_tm);
    let apriori = apriori_enclosure(sys, &xb, &ub, h)?;

    let t = TaylorModel::var(x0[0].vars().clone(), domain.clone(), time_var, order)?;
    let k = order as usize;
    let coeffs = tape.series(&x0, &u_tm, k)?;
    let tops = tape.series(apriori.dims(), ub.dims(), k + 1)?;
    // h^{k+1}, rounded up.
    let tail = (0..=order).fold(1.0, |acc, _| mul_up(acc, h));

    let mut tms = Vec::with_capacity(n);
    let mut boxes = Vec::with_capacity(n);
    let mut ends = Vec::with_capacity(n);
    for j in 0..n {
        let zero = || TaylorModel::constant(x0[0].vars().clone(), domain.clone(), 0.0, order);
        let mut acc = match &coeffs[j][k] {
            Some(c) => c.clone(),
            None => zero()?,
        };
        for i in (0..k).rev() {
            acc = acc.mul(&t, order)?;
            if let Some(c) = &coeffs[j][i] {
                acc = acc.add(c)?;
            }
        }
        let top = tops[j][k + 1].unwrap_or(Interval::zero());
        let rem = top * Interval::raw(0.0, tail);
        if !rem.is_finite() {
            return Err(Error::Integration {
                time: h,
                msg: "remainder is not finite".into(),
            });
        }
        let tm = acc.add_rem(rem);
        let enc = tm.enclosure();
        if !enc.is_finite() {
            return Err(Error::Integration {
                time: h,
                msg: "flowpipe is not finite".into(),
            });
        }
        let b = enc.intersect(&apriori[j]).ok_or_else(|| Error::Integration {
            time: h,
            msg: "flowpipe misses its a priori enclosure".into(),
        })?;
        ends.push(tm.substitute(time_var, h)?);
        boxes.push(b);
        tms.push(tm);
    }
    Ok(SubStep {
        tm: tms,
        enclosure: IntervalBox::new(boxes),
        end: ends,
    })
}

enum StepFailure {
    Blowup(String),
    Error(Error),
}

impl From<Error> for StepFailure {
    fn from(e: Error) -> Self {
        match e {
            Error::Integration { .. } | Error::Divergence { .. } => StepFailure::Blowup(e.to_string()),
            other => StepFailure::Error(other),
        }
    }
}

/// Runs the reachability loop with the Bernstein abstraction.
pub fn verify(sys: &SystemSpec, net: &Network, params: &VerifyParams) -> Result<Verdict> {
    run(sys, net, params, params.mode)
}

/// The same loop with the interval abstraction of the controller.
pub fn verify_interval_baseline(sys: &SystemSpec, net: &Network, params: &VerifyParams) -> Result<Verdict> {
    run(sys, net, params, Mode::Interval)
}

fn run(sys: &SystemSpec, net: &Network, params: &VerifyParams, mode: Mode) -> Result<Verdict> {
    params.validate(sys)?;
    let n = sys.n_state();
    if net.input_dim() != n {
        return Err(Error::DimensionMismatch {
            what: "network input",
            expected: n,
            found: net.input_dim(),
        });
    }
    if net.output_dim() != sys.n_control() {
        return Err(Error::DimensionMismatch {
            what: "network output",
            expected: sys.n_control(),
            found: net.output_dim(),
        });
    }
    let order = params.tm_order;
    let tape = SeriesTape::new(&sys.rhs);
    let vars = flow_vars(sys, params.symbolic_remainder);
    let dc = sys.control_step;
    let h_nominal = dc / params.substeps as f64;
    let base_domain = flow_domain(vars.len() - 1, h_nominal);
    let mut x = box_tms(&sys.init, &vars, &base_domain, order)?;

    let mut verdict = Verdict {
        kind: VerdictKind::Unknown,
        step: 0,
        flowpipes: Vec::new(),
        per_step_eps: Vec::new(),
        step_boxes: vec![enclosure_box(&x)],
        reason: None,
    };
    if params.check_every_step && enclosure_box(&x).is_subset_of(&sys.goal) {
        verdict.kind = VerdictKind::Yes;
        return Ok(verdict);
    }

    for i in 0..sys.steps {
        if let Some(r) = params.rebox_every {
            if r > 0 && i > 0 && i % r == 0 {
                x = box_tms(&enclosure_box(&x), &vars, &base_domain, order)?;
            }
        }
        match control_step(sys, net, params, mode, &tape, &x, i) {
            Ok(step) => {
                let next_box = enclosure_box(&step.next_init);
                let too_wide = step
                    .pipes
                    .iter()
                    .map(|p| p.enclosure.max_width())
                    .chain(std::iter::once(next_box.max_width()))
                    .any(|w| !(w <= params.width_cap));
                verdict.flowpipes.extend(step.pipes);
                verdict.per_step_eps.push(step.eps);
                if too_wide {
                    verdict.step = i;
                    verdict.reason = Some(format!("flowpipe width exceeded {} during step {}", params.width_cap, i + 1));
                    return Ok(verdict);
                }
                verdict.step_boxes.push(next_box.clone());
                x = if params.symbolic_remainder {
                    fold_remainders(&step.next_init, n)?
                } else {
                    step.next_init
                };
                verdict.step = i + 1;
                if params.check_every_step && next_box.is_subset_of(&sys.goal) {
                    verdict.kind = VerdictKind::Yes;
                    return Ok(verdict);
                }
            }
            Err(StepFailure::Blowup(msg)) => {
                verdict.step = i;
                verdict.reason = Some(format!("integration failed during step {}: {msg}", i + 1));
                return Ok(verdict);
            }
            Err(StepFailure::Error(e)) => return Err(e),
        }
    }
    if verdict.step_boxes.last().is_some_and(|b| b.is_subset_of(&sys.goal)) {
        verdict.kind = VerdictKind::Yes;
    } else {
        verdict.reason = Some("final reachable set is not inside the goal".into());
    }
    Ok(verdict)
}

/// One iteration of the loop: abstract the controller over `x`, then
/// integrate for one control period.
fn control_step(
    sys: &SystemSpec,
    net: &Network,
    params: &VerifyParams,
    mode: Mode,
    tape: &SeriesTape,
    x: &[TaylorModel],
    i: usize,
) -> std::result::Result<StepResult, StepFailure> {
    let order = params.tm_order;
    let (u_tm, eps) = match mode {
        Mode::Bernstein => {
            let opts = CertifyOptions {
                delta_bar: params.delta_bar,
                max_samples: params.max_samples,
                lipschitz: None,
            };
            let (u, reports) = controller_tm(net, x, &params.degree, opts, params.thicken)?;
            let eps: Vec<f64> = reports.iter().map(|r| add_up(r.eps_used, params.extra_eps)).collect();
            let u = u
                .into_iter()
                .map(|t| t.add_rem(Interval::symmetric(params.extra_eps)))
                .collect::<Vec<_>>();
            (u, eps)
        }
        Mode::Interval => {
            let u = controller_tm_interval(net, x)?;
            let u = u
                .into_iter()
                .map(|t| t.add_rem(Interval::symmetric(params.extra_eps)))
                .collect::<Vec<_>>();
            (u, vec![params.extra_eps; sys.n_control()])
        }
    };
    for t in &u_tm {
        if !t.enclosure().is_finite() {
            return Err(StepFailure::Blowup("controller abstraction is not finite".into()));
        }
    }

    let dc = sys.control_step;
    let base = i as f64 * dc;
    let end = (i + 1) as f64 * dc;
    let abs_time = |tau: f64| if tau == dc { end } else { base + tau };
    let h_min = dc / 1000.0;
    // Sub-step boundaries in local time; differences of neighbours are exact.
    let mut marks: Vec<f64> = (0..=params.substeps)
        .map(|m| if m == params.substeps { dc } else { dc * m as f64 / params.substeps as f64 })
        .collect();
    marks.reverse();
    let mut cur = x.to_vec();
    let mut pipes = Vec::new();
    let mut a = marks.pop().expect("at least two marks");
    while let Some(&b) = marks.last() {
        let h = b - a;
        match tm_integrate_step(sys, tape, &cur, &u_tm, h, order) {
            Ok(sub) => {
                pipes.push(Flowpipe {
                    t_lo: abs_time(a),
                    t_hi: abs_time(b),
                    enclosure: sub.enclosure,
                    step: i,
                    tm: sub.tm,
                });
                cur = sub.end;
                a = b;
                marks.pop();
            }
            Err(e @ Error::Integration { .. }) => {
                if h / 2.0 < h_min {
                    return Err(e.into());
                }
                marks.push(a + h / 2.0);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(StepResult {
        u_tm,
        pipes,
        next_init: cur,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer, Matrix};

    fn scalar_sys(rhs: &str, init: (f64, f64), goal: (f64, f64), dc: f64, steps: usize) -> SystemSpec {
        SystemSpec::parse(
            vec!["x".into()],
            vec!["u".into()],
            &[rhs],
            dc,
            steps,
            IntervalBox::from_bounds(&[init]).unwrap(),
            IntervalBox::from_bounds(&[goal]).unwrap(),
        )
        .unwrap()
    }

    fn constant_net(inputs: usize, c: f64) -> Network {
        let layer = Layer::new(Matrix::zeros(1, inputs), vec![c], Activation::Linear).unwrap();
        Network::new(inputs, vec![layer]).unwrap()
    }

    fn one_var_tm(lo: f64, hi: f64, order: u32) -> Vec<TaylorModel> {
        let vars = Vars::new(["x_0", "t"]);
        let dom = flow_domain(1, 0.1);
        box_tms(&IntervalBox::from_bounds(&[(lo, hi)]).unwrap(), &vars, &dom, order).unwrap()
    }

    #[test]
    fn controller_constant_and_linear() {
        let x = one_var_tm(0.0, 1.0, 4);
        let deg = DegreeVector::new(vec![2]).unwrap();
        let (u, _) = controller_tm(&constant_net(1, 0.7), &x, &deg, CertifyOptions::new(0.01), 1e-9).unwrap();
        assert!((u[0].poly().constant_term() - 0.7).abs() < 1e-15);
        assert!(u[0].rem().mag() < 1e-12);

        let layer = Layer::new(Matrix::from_rows(&[vec![2.0]]).unwrap(), vec![0.0], Activation::Linear).unwrap();
        let net = Network::new(1, vec![layer]).unwrap();
        // The sampled bound carries a slack of at most δ̄ on top of the
        // (zero) observed deviation.
        let (u, _) = controller_tm(&net, &x, &deg, CertifyOptions::new(1e-6), 1e-9).unwrap();
        // x = 0.5 + 0.5 s, so 2x = 1 + s.
        assert!((u[0].poly().constant_term() - 1.0).abs() < 1e-12);
        assert!((u[0].poly().coeff(&[1, 0]) - 1.0).abs() < 1e-12);
        assert!(u[0].rem().mag() <= 1.1e-6, "{}", u[0].rem());
    }

    #[test]
    fn controller_tm_encloses_network() {
        let x = one_var_tm(0.0, 1.0, 4);
        let layer = Layer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0], Activation::Sigmoid).unwrap();
        let net = Network::new(1, vec![layer]).unwrap();
        let deg = DegreeVector::new(vec![2]).unwrap();
        let (u, reports) = controller_tm(&net, &x, &deg, CertifyOptions::new(0.01), 1e-9).unwrap();
        for k in 0..=100 {
            let v = f64::from(k) / 100.0;
            let s = 2.0 * v - 1.0;
            let iv = u[0].eval_enclosure(&[s, 0.0]).unwrap();
            assert!(iv.contains(crate::nn::sigmoid(v)), "{v}: {iv}");
        }
        assert!(reports[0].eps_used > 0.0);
    }

    #[test]
    fn apriori_examples() {
        let zero = scalar_sys("0", (1.0, 2.0), (0.0, 3.0), 0.1, 1);
        let u = IntervalBox::point(&[0.0]);
        let x = IntervalBox::from_bounds(&[(1.0, 2.0)]).unwrap();
        assert_eq!(apriori_enclosure(&zero, &x, &u, 0.1).unwrap(), x);

        let one = scalar_sys("1", (0.0, 0.0), (0.0, 1.0), 0.1, 1);
        let b = apriori_enclosure(&one, &IntervalBox::point(&[0.0]), &u, 0.1).unwrap();
        assert!(b[0].lo() <= 0.0 && b[0].hi() >= 0.1);

        let lin = scalar_sys("x", (1.0, 1.0), (0.0, 2.0), 0.1, 1);
        let b = apriori_enclosure(&lin, &IntervalBox::point(&[1.0]), &u, 0.1).unwrap();
        assert!(b[0].lo() <= 1.0 && b[0].hi() >= 0.1f64.exp());

        assert!(apriori_enclosure(&lin, &IntervalBox::point(&[1.0]), &u, 0.0).is_err());
    }

    fn integrate(rhs: &str, x0: f64, h: f64, k: u32) -> SubStep {
        let sys = scalar_sys(rhs, (x0, x0), (-10.0, 10.0), h, 1);
        let tape = SeriesTape::new(&sys.rhs);
        let vars = flow_vars(&sys, false);
        let dom = flow_domain(1, h);
        let x = box_tms(&sys.init, &vars, &dom, k).unwrap();
        let u = vec![TaylorModel::constant(vars, dom, 0.0, k).unwrap()];
        tm_integrate_step(&sys, &tape, &x, &u, h, k).unwrap()
    }

    #[test]
    fn integrate_examples() {
        let still = integrate("0", 0.5, 0.1, 3);
        assert_eq!(still.tm[0].poly().constant_term(), 0.5);
        assert_eq!(still.tm[0].poly().len(), 1);
        assert_eq!(still.tm[0].rem(), Interval::zero());

        let ramp = integrate("1", 0.0, 0.1, 2);
        assert_eq!(ramp.tm[0].poly().coeff(&[0, 1]), 1.0);
        assert_eq!(ramp.tm[0].poly().len(), 1);
        assert_eq!(ramp.tm[0].rem(), Interval::zero());

        let exp = integrate("x", 1.0, 0.1, 4);
        let p = exp.tm[0].poly();
        let mut fact = 1.0;
        for i in 0..=4u32 {
            if i > 0 {
                fact *= f64::from(i);
            }
            assert!((p.coeff(&[0, i]) - 1.0 / fact).abs() < 1e-15, "t^{i}");
        }
        assert!(exp.tm[0].rem().mag() <= 0.11f64.exp() * 1e-5 / 120.0 * 1.01);
        let end = exp.end[0].eval_enclosure(&[0.0, 0.0]).unwrap();
        assert!(end.contains(0.1f64.exp()), "{end}");
    }

    #[test]
    fn decay_reaches_goal() {
        let sys = scalar_sys("-x + 0*u", (1.0, 1.1), (0.0, 0.5), 0.5, 4);
        let params = VerifyParams::new(DegreeVector::new(vec![1]).unwrap(), 0.01);
        let v = verify(&sys, &constant_net(1, 0.0), &params).unwrap();
        assert!(v.is_yes(), "{v} {:?}", v.reason);
        // Exact solution at t = 2: [e^-2, 1.1 e^-2].
        let last = v.step_boxes.last().unwrap();
        assert!(last[0].contains((-2.0f64).exp()) && last[0].contains(1.1 * (-2.0f64).exp()));
    }

    #[test]
    fn entire_goal_is_reached() {
        let mut sys = scalar_sys("-x + u", (1.0, 1.1), (0.0, 0.5), 0.2, 3);
        sys.goal = IntervalBox::new(vec![Interval::entire()]);
        let params = VerifyParams::new(DegreeVector::new(vec![2]).unwrap(), 0.01);
        let v = verify(&sys, &constant_net(1, 0.3), &params).unwrap();
        assert_eq!((v.kind, v.step), (VerdictKind::Yes, 3));
    }

    #[test]
    fn flowpipes_tile_time() {
        let sys = scalar_sys("-x + u", (1.0, 1.1), (0.0, 0.5), 0.3, 4);
        let mut params = VerifyParams::new(DegreeVector::new(vec![2]).unwrap(), 0.01);
        params.substeps = 7;
        let v = verify(&sys, &constant_net(1, 0.1), &params).unwrap();
        assert_eq!(v.flowpipes.len(), 28);
        assert_eq!(v.flowpipes[0].t_lo, 0.0);
        for w in v.flowpipes.windows(2) {
            assert_eq!(w[0].t_hi, w[1].t_lo);
            assert!(w[0].t_lo < w[0].t_hi);
        }
        assert_eq!(v.flowpipes.last().unwrap().t_hi, 4.0 * 0.3);
    }

    #[test]
    fn constant_controller_modes_agree() {
        let sys = scalar_sys("-x + u", (1.0, 1.1), (0.0, 0.5), 0.2, 5);
        let params = VerifyParams::new(DegreeVector::new(vec![2]).unwrap(), 0.01);
        let net = constant_net(1, 0.25);
        let a = verify(&sys, &net, &params).unwrap();
        let b = verify_interval_baseline(&sys, &net, &params).unwrap();
        assert_eq!((a.kind, a.step), (b.kind, b.step));
        for (x, y) in a.step_boxes.iter().zip(&b.step_boxes) {
            for (p, q) in x.iter().zip(y.iter()) {
                assert!((p.lo() - q.lo()).abs() < 1e-12 && (p.hi() - q.hi()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blowup_is_unknown() {
        let sys = scalar_sys("x^2 + u", (1.0, 1.1), (0.0, 0.5), 0.5, 10);
        let params = VerifyParams::new(DegreeVector::new(vec![2]).unwrap(), 0.01);
        let v = verify(&sys, &constant_net(1, 0.0), &params).unwrap();
        assert_eq!(v.kind, VerdictKind::Unknown);
        assert!(v.step < 3, "{v}");
        assert!(v.reason.is_some());
    }

    #[test]
    fn verdict_json_shape() {
        let sys = scalar_sys("-x + u", (1.0, 1.1), (0.0, 0.2), 0.5, 2);
        let params = VerifyParams::new(DegreeVector::new(vec![1]).unwrap(), 0.01);
        let v = verify(&sys, &constant_net(1, 0.0), &params).unwrap();
        let j = v.to_json();
        assert_eq!(j["kind"], "Unknown");
        assert_eq!(j["step"], 2);
        assert_eq!(j["eps"].as_array().unwrap().len(), 2);
        let pipes = serde_json::to_value(&v.flowpipes).unwrap();
        assert!(pipes[0]["box"][0].is_array());
        assert!(pipes[0]["t_lo"].is_number());
    }
}
