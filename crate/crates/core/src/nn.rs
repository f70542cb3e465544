//! Feed-forward controller networks and the plain-text weight format.
//!
//! The weight file is a token-per-line listing:
//!
//! ```text
//! input_dim
//! output_dim
//! H                      (number of hidden layers)
//! width_1 .. width_H     (one per line)
//! act_1 .. act_H act_out (one per line; act_out may be omitted -> linear)
//! weights                (layer by layer, neuron by neuron: incoming
//!                         weights followed by the bias)
//! ```
//!
//! Lines starting with `#` are comments; blank lines are ignored.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element-wise activation function of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Activation::Relu => y.max(0.0),
            Activation::Sigmoid => sigmoid(y),
            Activation::Tanh => tanh(y),
            Activation::Linear => y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "linear" | "affine" => Ok(Activation::Linear),
            _ => Err(format!("unknown activation `{s}`")),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `1 / (1 + e^{-y})`.
pub fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// `2 / (1 + e^{-2y}) - 1`, computed through the library `tanh`.
pub fn tanh(y: f64) -> f64 {
    y.tanh()
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                what: "matrix row",
                expected: cols,
                found: bad.len(),
            });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// `Wᵀ y`.
    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += w * yi;
            }
        }
        out
    }

    /// Copy with the rows selected by `keep` retained and all others zeroed.
    pub fn mask_rows(&self, keep: &[bool]) -> Matrix {
        let mut m = self.clone();
        for (i, &k) in keep.iter().enumerate() {
            if !k {
                m.data[i * self.cols..(i + 1) * self.cols].fill(0.0);
            }
        }
        m
    }
}

/// One affine map followed by an element-wise activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub act: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, act: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                what: "layer bias",
                expected: weights.rows(),
                found: bias.len(),
            });
        }
        if weights.data().iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self { weights, bias, act })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weights.mul_vec(x);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
        y
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.pre_activation(x);
        for v in &mut y {
            *v = self.act.apply(*v);
        }
        y
    }
}

/// A feed-forward network `κ(x) = κ_S(...κ_1(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        let mut width = input_dim;
        for layer in &layers {
            if layer.in_dim() != width {
                return Err(Error::DimensionMismatch {
                    what: "layer input",
                    expected: width,
                    found: layer.in_dim(),
                });
            }
            width = layer.out_dim();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Exact forward pass.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let mut z = x.to_vec();
        for layer in &self.layers {
            z = layer.forward(&z);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network evaluation".into()));
        }
        Ok(z)
    }

    /// Parses the token-per-line weight format described in the module docs.
    pub fn parse(text: &str) -> Result<Network> {
        let mut tokens = Tokens::new(text);
        let input_dim = tokens.next_count("input dimension")?;
        let output_dim = tokens.next_count("output dimension")?;
        let hidden = tokens.next_usize("hidden layer count")?;
        let mut widths = Vec::with_capacity(hidden + 2);
        widths.push(input_dim);
        for h in 0..hidden {
            widths.push(tokens.next_count(&format!("width of hidden layer {}", h + 1))?);
        }
        widths.push(output_dim);

        let mut acts = Vec::with_capacity(hidden + 1);
        for h in 0..hidden {
            let (line, tok) = tokens.next_token(&format!("activation of hidden layer {}", h + 1))?;
            acts.push(parse_activation(line, tok)?);
        }
        // The output activation is optional and defaults to linear.
        match tokens.peek() {
            Some((line, tok)) if tok.parse::<f64>().is_err() => {
                tokens.advance();
                acts.push(parse_activation(line, tok)?);
            }
            _ => acts.push(Activation::Linear),
        }

        let expected: usize = widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let params = tokens.remaining_numbers()?;
        if params.len() != expected {
            let line = tokens.last_line();
            return Err(Error::NetworkFormat {
                line,
                msg: format!("expected {expected} parameters, found {}", params.len()),
            });
        }

        let mut layers = Vec::with_capacity(hidden + 1);
        let mut it = params.into_iter();
        for (s, act) in acts.into_iter().enumerate() {
            let (n_in, n_out) = (widths[s], widths[s + 1]);
            let mut w = Matrix::zeros(n_out, n_in);
            let mut b = vec![0.0; n_out];
            for i in 0..n_out {
                for j in 0..n_in {
                    w.set(i, j, it.next().expect("counted above"));
                }
                b[i] = it.next().expect("counted above");
            }
            layers.push(Layer::new(w, b, act)?);
        }
        Network::new(input_dim, layers)
    }

    /// Writes the network in the weight format accepted by [`Network::parse`].
    ///
    /// Values use Rust's shortest round-trip formatting, so reparsing gives
    /// bit-identical weights.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, s: &dyn fmt::Display| {
            out.push_str(&s.to_string());
            out.push('\n');
        };
        push(&mut out, &self.input_dim);
        push(&mut out, &self.output_dim());
        push(&mut out, &(self.layers.len() - 1));
        for layer in &self.layers[..self.layers.len() - 1] {
            push(&mut out, &layer.out_dim());
        }
        for layer in &self.layers {
            push(&mut out, &layer.act);
        }
        for layer in &self.layers {
            for i in 0..layer.out_dim() {
                for &w in layer.weights.row(i) {
                    push(&mut out, &w);
                }
                push(&mut out, &layer.bias[i]);
            }
        }
        out
    }
}

fn parse_activation(line: usize, tok: &str) -> Result<Activation> {
    tok.parse().map_err(|msg| Error::NetworkFormat { line, msg })
}

/// Non-comment tokens with their 1-based line numbers.
struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let t = l.trim();
                (!t.is_empty() && !t.starts_with('#')).then_some((i + 1, t))
            })
            .collect();
        Self { items, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.items.get(self.pos).copied()
    }

    fn advance(&mut self) {
        self.pos += 1;
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(1, |&(l, _)| l)
    }

    fn next_token(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let t = self.peek().ok_or_else(|| Error::NetworkFormat {
            line: self.last_line(),
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        self.advance();
        Ok(t)
    }

    fn next_usize(&mut self, what: &str) -> Result<usize> {
        let (line, tok) = self.next_token(what)?;
        tok.parse().map_err(|_| Error::NetworkFormat {
            line,
            msg: format!("malformed header: expected {what}, found `{tok}`"),
        })
    }

    fn next_count(&mut self, what: &str) -> Result<usize> {
        let line = self.peek().map_or(self.last_line(), |t| t.0);
        match self.next_usize(what)? {
            0 => Err(Error::NetworkFormat {
                line,
                msg: format!("{what} must be positive"),
            }),
            n => Ok(n),
        }
    }

    fn remaining_numbers(&mut self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.items.len() - self.pos);
        while let Some((line, tok)) = self.peek() {
            let v: f64 = tok.parse().map_err(|_| Error::NetworkFormat {
                line,
                msg: format!("expected a number, found `{tok}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::NetworkFormat {
                    line,
                    msg: "non-finite parameter".into(),
                });
            }
            out.push(v);
            self.advance();
        }
        Ok(out)
    }
}
