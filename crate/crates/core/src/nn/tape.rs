//! Reverse-mode differentiation over row-major batches.
//!
//! Every value is a `batch x width` matrix. Parameters enter the tape as
//! leaves keyed by `(set tag, index)`; gradients come back keyed the same way.
//! Leaves whose set is frozen do not request gradients, so nothing upstream
//! of a purely frozen subgraph is visited on the backward pass.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis};

pub type ParamKey = (u32, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamKey),
    MatMul(Var, Var),
    /// `a + b` with `b` a single row broadcast over the batch.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    OneMinus(Var),
    Concat(Var, Var),
    SliceCols(Var, usize, usize),
}

struct Node {
    value: Arc<Array2<f64>>,
    op: Op,
    grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    frozen: BTreeSet<u32>,
}

pub type Grads = BTreeMap<ParamKey, Array2<f64>>;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape on which parameters of the given sets never receive gradients.
    pub fn with_frozen(frozen: impl IntoIterator<Item = u32>) -> Self {
        Tape {
            nodes: Vec::new(),
            frozen: frozen.into_iter().collect(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, grad: bool) -> Var {
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn param(&mut self, key: ParamKey, value: &Arc<Array2<f64>>) -> Var {
        let grad = !self.frozen.contains(&key.0);
        self.nodes.push(Node {
            value: Arc::clone(value),
            op: Op::Param(key),
            grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn g2(&self, a: Var, b: Var) -> bool {
        self.nodes[a.0].grad || self.nodes[b.0].grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        let g = self.g2(a, b);
        self.push(v, Op::MatMul(a, b), g)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        let g = self.g2(a, row);
        self.push(v, Op::AddRow(a, row), g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let g = self.g2(a, b);
        self.push(v, Op::Add(a, b), g)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        let g = self.g2(a, b);
        self.push(v, Op::Sub(a, b), g)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        let g = self.g2(a, b);
        self.push(v, Op::Mul(a, b), g)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        let g = self.nodes[a.0].grad;
        self.push(v, Op::Tanh(a), g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let g = self.nodes[a.0].grad;
        self.push(v, Op::Sigmoid(a), g)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| 1.0 - x);
        let g = self.nodes[a.0].grad;
        self.push(v, Op::OneMinus(a), g)
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let v = concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("concat of matrices with equal batch");
        let g = self.g2(a, b);
        self.push(v, Op::Concat(a, b), g)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        let g = self.nodes[a.0].grad;
        self.push(v, Op::SliceCols(a, start, len), g)
    }

    /// Propagates the seed gradients back to every non-frozen parameter leaf.
    pub fn backward(&self, seeds: &[(Var, Array2<f64>)]) -> Grads {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        for (v, g) in seeds {
            accumulate(&mut grads[v.0], g.clone());
        }
        let mut out = Grads::new();
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            if !node.grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let send = |grads: &mut Vec<Option<Array2<f64>>>, v: Var, d: Array2<f64>| {
                if self.nodes[v.0].grad {
                    accumulate(&mut grads[v.0], d);
                }
            };
            match node.op {
                Op::Input => {}
                Op::Param(key) => match out.get_mut(&key) {
                    Some(acc) => *acc += &g,
                    None => {
                        out.insert(key, g);
                    }
                },
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].grad {
                        send(&mut grads, a, g.dot(&self.value(b).t()));
                    }
                    if self.nodes[b.0].grad {
                        send(&mut grads, b, self.value(a).t().dot(&g));
                    }
                }
                Op::AddRow(a, row) => {
                    if self.nodes[row.0].grad {
                        send(&mut grads, row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    send(&mut grads, a, g);
                }
                Op::Add(a, b) => {
                    send(&mut grads, b, g.clone());
                    send(&mut grads, a, g);
                }
                Op::Sub(a, b) => {
                    send(&mut grads, b, -&g);
                    send(&mut grads, a, g);
                }
                Op::Mul(a, b) => {
                    if self.nodes[a.0].grad {
                        send(&mut grads, a, &g * self.value(b));
                    }
                    if self.nodes[b.0].grad {
                        send(&mut grads, b, &g * self.value(a));
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let d = ndarray::Zip::from(&g).and(y.as_ref()).map_collect(|&g, &y| g * (1.0 - y * y));
                    send(&mut grads, a, d);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let d = ndarray::Zip::from(&g).and(y.as_ref()).map_collect(|&g, &y| g * y * (1.0 - y));
                    send(&mut grads, a, d);
                }
                Op::OneMinus(a) => send(&mut grads, a, -g),
                Op::Concat(a, b) => {
                    let wa = self.value(a).ncols();
                    send(&mut grads, b, g.slice(s![.., wa..]).to_owned());
                    send(&mut grads, a, g.slice(s![.., ..wa]).to_owned());
                }
                Op::SliceCols(a, start, len) => {
                    let src = self.value(a);
                    let mut d = Array2::zeros(src.raw_dim());
                    d.slice_mut(s![.., start..start + len]).assign(&g);
                    send(&mut grads, a, d);
                }
            }
        }
        out
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}
