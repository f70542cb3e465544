#![allow(dead_code)]

use std::path::PathBuf;

use nncs_reach::config::{read_system_file, SystemFile};
use nncs_reach::interval::IntervalBox;
use nncs_reach::nn::{Activation, Layer, Matrix, Network};
use rand::Rng;

pub const ACTS: [Activation; 3] = [Activation::Relu, Activation::Sigmoid, Activation::Tanh];

/// Hidden activations: `Some(a)` for a homogeneous net, `None` for a random
/// mix.
pub fn random_network<R: Rng>(rng: &mut R, inputs: usize, act: Option<Activation>) -> Network {
    let hidden = rng.gen_range(1..=3);
    let mut layers = Vec::new();
    let mut fan_in = inputs;
    for _ in 0..hidden {
        let width = rng.gen_range(2..=20);
        let a = act.unwrap_or_else(|| ACTS[rng.gen_range(0..3)]);
        layers.push(random_layer(rng, fan_in, width, a));
        fan_in = width;
    }
    layers.push(random_layer(rng, fan_in, 1, Activation::Linear));
    Network::new(inputs, layers).unwrap()
}

pub fn random_layer<R: Rng>(rng: &mut R, n_in: usize, n_out: usize, act: Activation) -> Layer {
    let scale = (3.0 / n_in as f64).sqrt();
    let w: Vec<f64> = (0..n_in * n_out).map(|_| rng.gen_range(-scale..scale)).collect();
    let b: Vec<f64> = (0..n_out).map(|_| rng.gen_range(-0.5..0.5)).collect();
    Layer::new(Matrix::new(n_out, n_in, w).unwrap(), b, act).unwrap()
}

pub fn random_box<R: Rng>(rng: &mut R, dim: usize, max_width: f64) -> IntervalBox {
    let bounds: Vec<(f64, f64)> = (0..dim)
        .map(|_| {
            let c = rng.gen_range(-1.0..1.0);
            let w = rng.gen_range(0.05..max_width);
            (c - w / 2.0, c + w / 2.0)
        })
        .collect();
    IntervalBox::from_bounds(&bounds).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, b: &IntervalBox) -> Vec<f64> {
    b.iter()
        .map(|iv| if iv.width() > 0.0 { rng.gen_range(iv.lo()..=iv.hi()) } else { iv.lo() })
        .collect()
}

pub fn benchmark(name: &str) -> (SystemFile, Network) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks").join(format!("{name}.json"));
    let file = read_system_file(&path).unwrap();
    let text = std::fs::read_to_string(file.model.as_ref().unwrap()).unwrap();
    let net = Network::parse(&text).unwrap();
    (file, net)
}
