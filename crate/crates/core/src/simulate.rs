//! Closed-loop simulation with zero-order-hold control and classical RK4.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::interval::IntervalBox;
use crate::nn::Network;

/// Sampled states of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectories hold the initial state")
    }
}

/// Default simulation step: `δ_c / 200`.
pub fn default_dt(sys: &SystemSpec) -> f64 {
    sys.control_step / 200.0
}

fn rk4_step(sys: &SystemSpec, x: &[f64], u: &[f64], h: f64) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], k: &[f64], s: f64| a.iter().zip(k).map(|(a, k)| a + s * k).collect::<Vec<_>>();
    let k1 = sys.eval(x, u)?;
    let k2 = sys.eval(&axpy(x, &k1, h / 2.0), u)?;
    let k3 = sys.eval(&axpy(x, &k2, h / 2.0), u)?;
    let k4 = sys.eval(&axpy(x, &k3, h), u)?;
    Ok(x
        .iter()
        .enumerate()
        .map(|(j, xj)| xj + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect())
}

/// Simulates `sys.steps` control periods from `x0`. Each period is split
/// into `ceil(δ_c / dt)` equal RK4 steps and every step is recorded; the
/// control is `κ(x)` at the start of the period.
pub fn simulate(sys: &SystemSpec, net: &Network, x0: &[f64], dt: f64) -> Result<Trajectory> {
    simulate_steps(sys, net, x0, dt, sys.steps)
}

pub fn simulate_steps(sys: &SystemSpec, net: &Network, x0: &[f64], dt: f64, steps: usize) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if x0.len() != sys.n_state() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: sys.n_state(),
            found: x0.len(),
        });
    }
    let dc = sys.control_step;
    let m = (dc / dt).ceil().max(1.0) as usize;
    let h = dc / m as f64;
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    for i in 0..steps {
        let u = net.eval(&x)?;
        let base = i as f64 * dc;
        for k in 1..=m {
            x = rk4_step(sys, &x, &u, h)?;
            let t = if k == m { (i + 1) as f64 * dc } else { base + k as f64 * h };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { time: t });
            }
            times.push(t);
            states.push(x.clone());
        }
    }
    Ok(Trajectory { times, states })
}

/// `count` points drawn uniformly from `b` with a fixed seed.
pub fn sample_box(b: &IntervalBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            b.iter()
                .map(|iv| if iv.is_point() { iv.lo() } else { rng.gen_range(iv.lo()..=iv.hi()) })
                .collect()
        })
        .collect()
}

/// Simulates from `count` random initial states in `sys.init`, in parallel.
pub fn simulate_many(sys: &SystemSpec, net: &Network, count: usize, seed: u64, dt: f64) -> Result<Vec<Trajectory>> {
    sample_box(&sys.init, count, seed)
        .par_iter()
        .map(|x0| simulate(sys, net, x0, dt))
        .collect()
}

/// CSV with a header `run,t,<state names>` and one row per recorded state.
pub fn trajectories_csv(sys: &SystemSpec, trajs: &[Trajectory]) -> String {
    let mut out = String::from("run,t");
    for name in &sys.symbols.state {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (r, tr) in trajs.iter().enumerate() {
        for (t, x) in tr.times.iter().zip(&tr.states) {
            out.push_str(&format!("{r},{t:?}"));
            for v in x {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
    }
    out
}
