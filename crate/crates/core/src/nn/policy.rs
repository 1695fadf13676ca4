//! Policy, critic and synchronizer networks.
//!
//! Inputs are row batches: a pose observation row holds `frames` stacked
//! frames of `frame_dim` values each (oldest first), a goal row holds the
//! encoded goal state, and a recurrent row holds the encoder's hidden state.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layers::{Gru, Init, Linear, Mlp, ParamSet};
use super::tape::{Tape, Var};
use crate::hand::{NUM_DOF, OBS_FRAME_LEN};
use crate::tab::{CRITIC_GOAL_LEN, GOAL_LEN};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub frame_dim: usize,
    pub frames: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
    pub latent: usize,
    pub goal_hidden: usize,
    pub head_hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl NetConfig {
    /// Default hand policy: 16-link observation frames, 5-note goal, 27 actions.
    pub fn hand() -> Self {
        NetConfig {
            frame_dim: OBS_FRAME_LEN,
            frames: 2,
            goal_dim: GOAL_LEN,
            action_dim: NUM_DOF,
            latent: 256,
            goal_hidden: 256,
            head_hidden: vec![256],
            init_log_std: 0.1f64.ln(),
        }
    }

    /// Critic of the picking hand, which also sees the wrongly-tackled flags.
    pub fn right_critic() -> Self {
        NetConfig {
            goal_dim: CRITIC_GOAL_LEN,
            ..Self::hand()
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.frame_dim * self.frames
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.frame_dim, self.frames, self.goal_dim, self.action_dim, self.latent, self.goal_hidden];
        if dims.contains(&0) || self.head_hidden.contains(&0) {
            return Err(Error::Config("network sizes must be positive".into()));
        }
        Ok(())
    }
}

/// A batch of network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub obs: Array2<f64>,
    pub goal: Array2<f64>,
    pub hidden: Array2<f64>,
}

impl NetInput {
    pub fn batch(&self) -> usize {
        self.obs.nrows()
    }

    fn check(&self, cfg: &NetConfig) -> Result<()> {
        let b = self.obs.nrows();
        let want = [(self.obs.dim(), cfg.obs_dim(), "observation"), (self.goal.dim(), cfg.goal_dim, "goal"), (self.hidden.dim(), cfg.latent, "recurrent state")];
        for ((rows, cols), w, what) in want {
            if rows != b || cols != w {
                return Err(Error::Shape(format!("{what}: got {rows}x{cols}, expected {b}x{w}")));
            }
        }
        Ok(())
    }
}

/// Recurrent pose encoder plus goal encoder; the latent is their sum.
#[derive(Debug, Clone)]
pub struct Encoder {
    gru: Gru,
    goal: Mlp,
}

pub struct Encoded {
    pub z: Var,
    pub hidden: Var,
}

impl Encoder {
    fn new(set: &mut ParamSet, prefix: &str, cfg: &NetConfig, rng: &mut impl Rng) -> Self {
        Encoder {
            gru: Gru::new(set, &format!("{prefix}.gru"), cfg.frame_dim, cfg.latent, rng),
            goal: Mlp::new(set, &format!("{prefix}.goal"), &[cfg.goal_dim, cfg.goal_hidden, cfg.latent], Init::Glorot, rng),
        }
    }

    fn forward(&self, set: &ParamSet, tape: &mut Tape, input: &NetInput) -> Encoded {
        let fd = self.gru.inputs;
        let frames = input.obs.ncols() / fd;
        let mut h = tape.input(input.hidden.clone());
        for t in 0..frames {
            let x = tape.input(input.obs.slice(s![.., t * fd..(t + 1) * fd]).to_owned());
            h = self.gru.step(set, tape, x, h);
        }
        let g = tape.input(input.goal.clone());
        let ge = self.goal.forward(set, tape, g);
        Encoded {
            z: tape.add(h, ge),
            hidden: h,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub config: NetConfig,
    pub params: ParamSet,
    encoder: Encoder,
    head: Mlp,
    log_std: usize,
}

pub struct PolicyOutput {
    pub mean: Var,
    pub z: Var,
    pub hidden: Var,
}

impl PolicyNet {
    pub fn new(config: NetConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let encoder = Encoder::new(&mut params, "enc", &config, rng);
        let mut sizes = vec![config.latent];
        sizes.extend(&config.head_hidden);
        sizes.push(config.action_dim);
        let head = Mlp::new(&mut params, "head", &sizes, Init::Glorot, rng);
        let log_std = params.add("log_std", Array2::from_elem((1, config.action_dim), config.init_log_std));
        Ok(PolicyNet {
            config,
            params,
            encoder,
            head,
            log_std,
        })
    }

    pub fn log_std(&self) -> &Array2<f64> {
        self.params.get(self.log_std)
    }

    pub fn log_std_index(&self) -> usize {
        self.log_std
    }

    pub fn encode(&self, tape: &mut Tape, input: &NetInput) -> Result<Encoded> {
        input.check(&self.config)?;
        Ok(self.encoder.forward(&self.params, tape, input))
    }

    pub fn decode(&self, tape: &mut Tape, z: Var) -> Var {
        self.head.forward(&self.params, tape, z)
    }

    pub fn forward(&self, tape: &mut Tape, input: &NetInput) -> Result<PolicyOutput> {
        let e = self.encode(tape, input)?;
        Ok(PolicyOutput {
            mean: self.decode(tape, e.z),
            z: e.z,
            hidden: e.hidden,
        })
    }

    /// Mean action and new recurrent state, without keeping the tape.
    pub fn act(&self, input: &NetInput) -> Result<(Array2<f64>, Array2<f64>)> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, input)?;
        Ok((tape.value(out.mean).clone(), tape.value(out.hidden).clone()))
    }

    pub fn zero_hidden(&self, batch: usize) -> Array2<f64> {
        Array2::zeros((batch, self.config.latent))
    }
}

/// Diagonal Gaussian with state-independent log deviation.
pub mod gaussian {
    use super::*;

    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

    pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(log_std)
            .zip(action)
            .map(|((&m, &ls), &a)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum()
    }

    pub fn sample(mean: &[f64], log_std: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        mean.iter()
            .zip(log_std)
            .map(|(&m, &ls)| {
                let e: f64 = StandardNormal.sample(rng);
                m + ls.exp() * e
            })
            .collect()
    }
}

/// Running mean and second moment per head; predictions are kept unchanged
/// across statistic updates by rescaling the output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopArt {
    pub mean: Vec<f64>,
    pub second: Vec<f64>,
    pub beta: f64,
}

const MIN_SCALE: f64 = 1e-4;

impl PopArt {
    pub fn new(heads: usize, beta: f64) -> Self {
        PopArt {
            mean: vec![0.0; heads],
            second: vec![1.0; heads],
            beta,
        }
    }

    pub fn scale(&self, k: usize) -> f64 {
        (self.second[k] - self.mean[k] * self.mean[k]).max(MIN_SCALE * MIN_SCALE).sqrt()
    }

    pub fn normalize(&self, k: usize, v: f64) -> f64 {
        (v - self.mean[k]) / self.scale(k)
    }

    pub fn denormalize(&self, k: usize, v: f64) -> f64 {
        v * self.scale(k) + self.mean[k]
    }
}

#[derive(Debug, Clone)]
pub struct CriticNet {
    pub config: NetConfig,
    pub params: ParamSet,
    encoder: Encoder,
    heads: Linear,
    pub popart: PopArt,
}

impl CriticNet {
    pub fn new(config: NetConfig, heads: usize, popart_beta: f64, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        if heads == 0 {
            return Err(Error::Config("critic needs at least one head".into()));
        }
        let mut params = ParamSet::new();
        let encoder = Encoder::new(&mut params, "enc", &config, rng);
        let heads_layer = Linear::new(&mut params, "heads", config.latent, heads, Init::Glorot, rng);
        Ok(CriticNet {
            config,
            params,
            encoder,
            heads: heads_layer,
            popart: PopArt::new(heads, popart_beta),
        })
    }

    pub fn num_heads(&self) -> usize {
        self.heads.outputs
    }

    /// Normalized head outputs and the new recurrent state.
    pub fn forward(&self, tape: &mut Tape, input: &NetInput) -> Result<(Var, Var)> {
        input.check(&self.config)?;
        let e = self.encoder.forward(&self.params, tape, input);
        Ok((self.heads.forward(&self.params, tape, e.z), e.hidden))
    }

    /// Un-normalized values, one column per head.
    pub fn values(&self, input: &NetInput) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let (v, _) = self.forward(&mut tape, input)?;
        let mut out = tape.value(v).clone();
        for (k, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|x| self.popart.denormalize(k, x));
        }
        Ok(out)
    }

    /// Moves the statistics toward the targets' batch moments and rescales
    /// the output layer so un-normalized predictions are preserved.
    pub fn update_statistics(&mut self, targets: &Array2<f64>) {
        let k_heads = self.num_heads();
        let old: Vec<(f64, f64)> = (0..k_heads).map(|k| (self.popart.mean[k], self.popart.scale(k))).collect();
        let beta = self.popart.beta;
        for k in 0..k_heads {
            let col = targets.column(k);
            let m = col.mean().unwrap_or(0.0);
            let sq = col.mapv(|x| x * x).mean().unwrap_or(0.0);
            self.popart.mean[k] = (1.0 - beta) * self.popart.mean[k] + beta * m;
            self.popart.second[k] = (1.0 - beta) * self.popart.second[k] + beta * sq;
        }
        let (wi, bi) = (self.heads.weight_index(), self.heads.bias_index());
        for (k, &(mu, sigma)) in old.iter().enumerate() {
            let (mu2, sigma2) = (self.popart.mean[k], self.popart.scale(k));
            self.params.get_mut(wi).column_mut(k).mapv_inplace(|w| w * sigma / sigma2);
            let b = &mut self.params.get_mut(bi)[[0, k]];
            *b = (sigma * *b + mu - mu2) / sigma2;
        }
    }
}

/// Emits latent offsets for both hands from copies of their encoders.
#[derive(Debug, Clone)]
pub struct Synchronizer {
    pub params: ParamSet,
    left: Encoder,
    right: Encoder,
    trunk: Mlp,
    head_left: Linear,
    head_right: Linear,
    left_config: NetConfig,
    right_config: NetConfig,
}

pub struct SyncOutput {
    pub delta_left: Var,
    pub delta_right: Var,
    pub hidden_left: Var,
    pub hidden_right: Var,
}

impl Synchronizer {
    /// Builds a synchronizer whose encoders duplicate the policies' encoders
    /// and whose output heads start at zero.
    pub fn new(left: &PolicyNet, right: &PolicyNet, trunk_hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        let (lc, rc) = (&left.config, &right.config);
        let mut params = ParamSet::new();
        let le = Encoder::new(&mut params, "left.enc", lc, rng);
        let re = Encoder::new(&mut params, "right.enc", rc, rng);
        params.copy_prefixed("left.enc.", &left.params, "enc.");
        params.copy_prefixed("right.enc.", &right.params, "enc.");
        let trunk = Mlp::new(&mut params, "trunk", &[lc.latent + rc.latent, trunk_hidden, trunk_hidden], Init::Glorot, rng);
        let head_left = Linear::new(&mut params, "head_left", trunk_hidden, lc.latent, Init::Zero, rng);
        let head_right = Linear::new(&mut params, "head_right", trunk_hidden, rc.latent, Init::Zero, rng);
        Ok(Synchronizer {
            params,
            left: le,
            right: re,
            trunk,
            head_left,
            head_right,
            left_config: lc.clone(),
            right_config: rc.clone(),
        })
    }

    pub fn forward(&self, tape: &mut Tape, left: &NetInput, right: &NetInput) -> Result<SyncOutput> {
        left.check(&self.left_config)?;
        right.check(&self.right_config)?;
        if left.batch() != right.batch() {
            return Err(Error::Shape("left and right batches differ".into()));
        }
        let el = self.left.forward(&self.params, tape, left);
        let er = self.right.forward(&self.params, tape, right);
        let cat = tape.concat(el.z, er.z);
        let t = self.trunk.forward(&self.params, tape, cat);
        let t = tape.tanh(t);
        Ok(SyncOutput {
            delta_left: self.head_left.forward(&self.params, tape, t),
            delta_right: self.head_right.forward(&self.params, tape, t),
            hidden_left: el.hidden,
            hidden_right: er.hidden,
        })
    }

    /// Indices of the output-head tensors.
    pub fn head_indices(&self) -> [usize; 4] {
        [
            self.head_left.weight_index(),
            self.head_left.bias_index(),
            self.head_right.weight_index(),
            self.head_right.bias_index(),
        ]
    }
}

/// Recurrent states of a two-hand forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub left: Array2<f64>,
    pub right: Array2<f64>,
    pub sync_left: Array2<f64>,
    pub sync_right: Array2<f64>,
}

impl JointState {
    pub fn zeros(batch: usize, left: &NetConfig, right: &NetConfig) -> Self {
        JointState {
            left: Array2::zeros((batch, left.latent)),
            right: Array2::zeros((batch, right.latent)),
            sync_left: Array2::zeros((batch, left.latent)),
            sync_right: Array2::zeros((batch, right.latent)),
        }
    }
}

pub struct JointOutput {
    pub mean_left: Var,
    pub mean_right: Var,
    pub hidden: [Var; 4],
}

/// Both hands decoded from offset latents. Observation and goal come from
/// `left`/`right`; recurrent rows come from `state`.
pub fn joint_forward(
    tape: &mut Tape,
    left_policy: &PolicyNet,
    right_policy: &PolicyNet,
    sync: &Synchronizer,
    left: (&Array2<f64>, &Array2<f64>),
    right: (&Array2<f64>, &Array2<f64>),
    state: &JointState,
) -> Result<JointOutput> {
    let input = |(obs, goal): (&Array2<f64>, &Array2<f64>), h: &Array2<f64>| NetInput {
        obs: obs.clone(),
        goal: goal.clone(),
        hidden: h.clone(),
    };
    let el = left_policy.encode(tape, &input(left, &state.left))?;
    let er = right_policy.encode(tape, &input(right, &state.right))?;
    let s = sync.forward(tape, &input(left, &state.sync_left), &input(right, &state.sync_right))?;
    let zl = tape.add(el.z, s.delta_left);
    let zr = tape.add(er.z, s.delta_right);
    Ok(JointOutput {
        mean_left: left_policy.decode(tape, zl),
        mean_right: right_policy.decode(tape, zr),
        hidden: [el.hidden, er.hidden, s.hidden_left, s.hidden_right],
    })
}
