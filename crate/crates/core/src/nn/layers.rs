use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use sha2::{Digest, Sha256};

use super::tape::{Tape, Var};

static NEXT_TAG: AtomicU32 = AtomicU32::new(1);

fn fresh_tag() -> u32 {
    NEXT_TAG.fetch_add(1, Ordering::Relaxed)
}

/// Named tensors owned by one network. The tag identifies the set on a tape;
/// clones receive a fresh tag so copied networks train independently.
#[derive(Debug)]
pub struct ParamSet {
    tag: u32,
    names: Vec<String>,
    tensors: Vec<Arc<Array2<f64>>>,
}

impl Clone for ParamSet {
    fn clone(&self) -> Self {
        ParamSet {
            tag: fresh_tag(),
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Arc::new((**t).clone())).collect(),
        }
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            tag: fresh_tag(),
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn tag(&self) -> u32 {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.tensors.push(Arc::new(value));
        self.tensors.len() - 1
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, i: usize) -> &Array2<f64> {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Array2<f64> {
        Arc::make_mut(&mut self.tensors[i])
    }

    pub fn set(&mut self, i: usize, value: Array2<f64>) {
        assert_eq!(value.dim(), self.tensors[i].dim(), "shape of {}", self.names[i]);
        self.tensors[i] = Arc::new(value);
    }

    pub fn leaf(&self, tape: &mut Tape, i: usize) -> Var {
        tape.param((self.tag, i), &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter().map(|t| &**t))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// SHA-256 over names, shapes and little-endian values.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.iter() {
            h.update(name.as_bytes());
            h.update((t.nrows() as u64).to_le_bytes());
            h.update((t.ncols() as u64).to_le_bytes());
            for v in t.iter() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Copies every tensor whose name starts with `prefix` from `other`,
    /// matching by the remainder of the name.
    pub fn copy_prefixed(&mut self, prefix: &str, other: &ParamSet, other_prefix: &str) -> usize {
        let mut copied = 0;
        for i in 0..self.len() {
            let Some(rest) = self.names[i].strip_prefix(prefix) else { continue };
            let want = format!("{other_prefix}{rest}");
            if let Some(j) = other.names.iter().position(|n| *n == want) {
                self.set(i, other.get(j).clone());
                copied += 1;
            }
        }
        copied
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias.
    Glorot,
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    w: usize,
    b: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(set: &mut ParamSet, name: &str, inputs: usize, outputs: usize, init: Init, rng: &mut impl Rng) -> Self {
        let w = match init {
            Init::Zero => Array2::zeros((inputs, outputs)),
            Init::Glorot => {
                let a = (6.0 / (inputs + outputs) as f64).sqrt();
                Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-a..a))
            }
        };
        Linear {
            w: set.add(format!("{name}.weight"), w),
            b: set.add(format!("{name}.bias"), Array2::zeros((1, outputs))),
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, set: &ParamSet, tape: &mut Tape, x: Var) -> Var {
        let w = set.leaf(tape, self.w);
        let b = set.leaf(tape, self.b);
        let xw = tape.matmul(x, w);
        tape.add_row(xw, b)
    }

    pub fn weight_index(&self) -> usize {
        self.w
    }

    pub fn bias_index(&self) -> usize {
        self.b
    }
}

/// Perceptron with tanh on hidden layers and a linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(set: &mut ParamSet, name: &str, sizes: &[usize], last: Init, rng: &mut impl Rng) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let init = if i + 1 == n { last } else { Init::Glorot };
                Linear::new(set, &format!("{name}.{i}"), sizes[i], sizes[i + 1], init, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, set: &ParamSet, tape: &mut Tape, mut x: Var) -> Var {
        for (i, l) in self.layers.iter().enumerate() {
            x = l.forward(set, tape, x);
            if i + 1 < self.layers.len() {
                x = tape.tanh(x);
            }
        }
        x
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }
}

/// Gated recurrent unit with gates ordered reset, update, candidate.
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    wi: usize,
    wh: usize,
    bi: usize,
    bh: usize,
    pub inputs: usize,
    pub hidden: usize,
}

impl Gru {
    pub fn new(set: &mut ParamSet, name: &str, inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let a = (1.0 / hidden as f64).sqrt();
        let mut u = |r, c| Array2::from_shape_fn((r, c), |_| rng.random_range(-a..a));
        let wi = u(inputs, 3 * hidden);
        let wh = u(hidden, 3 * hidden);
        Gru {
            wi: set.add(format!("{name}.w_input"), wi),
            wh: set.add(format!("{name}.w_hidden"), wh),
            bi: set.add(format!("{name}.b_input"), Array2::zeros((1, 3 * hidden))),
            bh: set.add(format!("{name}.b_hidden"), Array2::zeros((1, 3 * hidden))),
            inputs,
            hidden,
        }
    }

    pub fn step(&self, set: &ParamSet, tape: &mut Tape, x: Var, h: Var) -> Var {
        let n = self.hidden;
        let wi = set.leaf(tape, self.wi);
        let wh = set.leaf(tape, self.wh);
        let bi = set.leaf(tape, self.bi);
        let bh = set.leaf(tape, self.bh);
        let xi = tape.matmul(x, wi);
        let xi = tape.add_row(xi, bi);
        let hh = tape.matmul(h, wh);
        let hh = tape.add_row(hh, bh);
        let gate = |tape: &mut Tape, k: usize| {
            let a = tape.slice_cols(xi, k * n, n);
            let b = tape.slice_cols(hh, k * n, n);
            let s = tape.add(a, b);
            tape.sigmoid(s)
        };
        let r = gate(tape, 0);
        let u = gate(tape, 1);
        let xn = tape.slice_cols(xi, 2 * n, n);
        let hn = tape.slice_cols(hh, 2 * n, n);
        let rh = tape.mul(r, hn);
        let pre = tape.add(xn, rh);
        let cand = tape.tanh(pre);
        let keep = tape.one_minus(u);
        let a = tape.mul(keep, cand);
        let b = tape.mul(u, h);
        tape.add(a, b)
    }
}
