//! Multi-objective on-policy learning.
//!
//! Each objective channel gets its own advantage estimate, standardized over
//! the rollout buffer. The policy follows one clipped surrogate on the
//! weighted sum of the standardized advantages; the critic regresses every
//! channel through a normalized head.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{AgentObs, Env, EnvSpec, HandIo};
use crate::nn::adam::clip_grad_norm;
use crate::nn::policy::JointOutput;
use crate::nn::{gaussian, joint_forward, Adam, AdamConfig, CriticNet, Grads, JointState, NetConfig, NetInput, PolicyNet, Synchronizer, Tape};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    pub weight: f64,
    /// Imitation channels carry zeros unless an external reward source is attached.
    pub imitation: bool,
}

impl ObjectiveSpec {
    fn goal(name: String, weight: f64) -> Self {
        ObjectiveSpec {
            name,
            weight,
            imitation: false,
        }
    }

    fn imitation(name: &str, weight: f64) -> Self {
        ObjectiveSpec {
            name: name.into(),
            weight,
            imitation: true,
        }
    }
}

/// One goal objective per string at 0.15 plus two imitation slots at 0.05.
pub fn left_objectives(strings: usize) -> Vec<ObjectiveSpec> {
    let mut v: Vec<_> = (1..=strings)
        .map(|s| ObjectiveSpec::goal(format!("string{s}"), 0.15))
        .collect();
    v.push(ObjectiveSpec::imitation("imitation_pose", 0.05));
    v.push(ObjectiveSpec::imitation("imitation_motion", 0.05));
    v
}

pub fn right_objectives() -> Vec<ObjectiveSpec> {
    vec![
        ObjectiveSpec::goal("pick".into(), 0.5),
        ObjectiveSpec::imitation("imitation_pick", 0.5),
    ]
}

/// Fretting objectives followed by the picking goal at `right_weight`.
pub fn joint_objectives(strings: usize, right_weight: f64) -> Vec<ObjectiveSpec> {
    let mut v = left_objectives(strings);
    v.push(ObjectiveSpec::goal("pick".into(), right_weight));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Left,
    Right,
    JointSync,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub workers: usize,
    /// Samples collected per iteration across all workers.
    pub replay: usize,
    pub batch: usize,
    pub epochs: usize,
    pub max_grad_norm: f64,
    pub popart_beta: f64,
    /// Kept for completeness; no discriminator is trained.
    pub gradient_penalty: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gamma: 0.95,
            lambda: 0.95,
            clip: 0.2,
            policy_lr: 5e-6,
            critic_lr: 1e-4,
            workers: 512,
            replay: 4096,
            batch: 256,
            epochs: 5,
            max_grad_norm: 1.0,
            popart_beta: 3e-4,
            gradient_penalty: 10.0,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.gamma) || !unit(self.lambda) || !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::Config("gamma and lambda must lie in (0, 1], clip in (0, 1)".into()));
        }
        if !(self.policy_lr > 0.0 && self.critic_lr > 0.0 && self.max_grad_norm > 0.0 && unit(self.popart_beta)) {
            return Err(Error::Config("step sizes, gradient norm and statistics rate must be positive".into()));
        }
        if self.workers == 0 || self.batch == 0 || self.epochs == 0 || self.replay < self.workers {
            return Err(Error::Config("workers, batch and epochs must be positive and replay >= workers".into()));
        }
        Ok(())
    }

    pub fn steps_per_worker(&self) -> usize {
        self.replay / self.workers
    }
}

/// Generalized advantage estimates and returns for one channel of one worker.
/// `dones[t]` marks the last step of an episode; `last_value` bootstraps the
/// step after the end of the sequence.
pub fn gae(rewards: &[f64], values: &[f64], last_value: f64, dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!(
            "gae: {} rewards, {} values, {} boundaries",
            n,
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let next = if t + 1 < n { values[t + 1] } else { last_value };
        let delta = rewards[t] + gamma * live * next - values[t];
        acc = delta + gamma * lambda * live * acc;
        adv[t] = acc;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Shifts to zero mean and scales to unit deviation; a constant channel
/// becomes all zeros.
pub fn standardize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in x.iter_mut() {
        *v = if sd > 1e-12 { (*v - mean) / sd } else { 0.0 };
    }
}

/// Clipped surrogate loss and its gradients with respect to the Gaussian mean
/// and log deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub loss: f64,
    pub d_mean: Array2<f64>,
    pub d_log_std: Array1<f64>,
    pub clip_fraction: f64,
}

pub fn surrogate(mean: &Array2<f64>, log_std: &[f64], actions: &Array2<f64>, old_logp: &[f64], advantages: &[f64], clip: f64) -> Surrogate {
    let (b, a) = mean.dim();
    let mut d_mean = Array2::zeros((b, a));
    let mut d_log_std = Array1::zeros(a);
    let mut loss = 0.0;
    let mut clipped = 0usize;
    let inv_b = 1.0 / b as f64;
    for i in 0..b {
        let m = mean.row(i).to_vec();
        let act = actions.row(i).to_vec();
        let logp = gaussian::log_prob(&m, log_std, &act);
        let ratio = (logp - old_logp[i]).exp();
        let adv = advantages[i];
        let plain = ratio * adv;
        let bounded = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
        loss -= plain.min(bounded) * inv_b;
        if plain <= bounded {
            let dlogp = -ratio * adv * inv_b;
            for j in 0..a {
                let var = (2.0 * log_std[j]).exp();
                let diff = act[j] - m[j];
                d_mean[[i, j]] = dlogp * diff / var;
                d_log_std[j] += dlogp * (diff * diff / var - 1.0);
            }
        } else {
            clipped += 1;
        }
    }
    Surrogate {
        loss,
        d_mean,
        d_log_std,
        clip_fraction: clipped as f64 * inv_b,
    }
}

/// Surrogate loss of `policy` on a batch and gradients for all of its parameters.
pub fn policy_surrogate_grads(
    policy: &PolicyNet,
    input: &NetInput,
    actions: &Array2<f64>,
    old_logp: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<(Surrogate, Grads)> {
    let mut tape = Tape::new();
    let out = policy.forward(&mut tape, input)?;
    let ls = policy.log_std().row(0).to_vec();
    let sur = surrogate(tape.value(out.mean), &ls, actions, old_logp, advantages, clip);
    let mut grads = tape.backward(&[(out.mean, sur.d_mean.clone())]);
    let key = (policy.params.tag(), policy.log_std_index());
    let dls = sur.d_log_std.clone().insert_axis(Axis(0));
    match grads.get_mut(&key) {
        Some(g) => *g += &dls,
        None => {
            grads.insert(key, dls);
        }
    }
    Ok((sur, grads))
}

/// Joint surrogate of both hands' actions and gradients for the
/// synchronizer's parameters only; both policies stay frozen.
#[allow(clippy::too_many_arguments)]
pub fn joint_surrogate_grads(
    left: &PolicyNet,
    right: &PolicyNet,
    sync: &Synchronizer,
    inputs: &[(Array2<f64>, Array2<f64>); 2],
    state: &JointState,
    actions: &[Array2<f64>; 2],
    old_logp: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<(Surrogate, Grads)> {
    let mut tape = Tape::with_frozen([left.params.tag(), right.params.tag()]);
    let [(lo, lg), (ro, rg)] = inputs;
    let out: JointOutput = joint_forward(&mut tape, left, right, sync, (lo, lg), (ro, rg), state)?;
    let al = left.config.action_dim;
    let mean = concatenate(Axis(1), &[tape.value(out.mean_left).view(), tape.value(out.mean_right).view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let acts = concatenate(Axis(1), &[actions[0].view(), actions[1].view()]).map_err(|e| Error::Shape(e.to_string()))?;
    let mut ls = left.log_std().row(0).to_vec();
    ls.extend(right.log_std().row(0).iter());
    let sur = surrogate(&mean, &ls, &acts, old_logp, advantages, clip);
    let dl = sur.d_mean.slice(s![.., ..al]).to_owned();
    let dr = sur.d_mean.slice(s![.., al..]).to_owned();
    let grads = tape.backward(&[(out.mean_left, dl), (out.mean_right, dr)]);
    Ok((sur, grads))
}

/// Critic input layout for several hands: frames interleaved hand by hand,
/// then the critic goals concatenated.
pub fn critic_net_config(hands: &[HandIo], latent: usize, goal_hidden: usize) -> NetConfig {
    NetConfig {
        frame_dim: hands.iter().map(|h| h.frame_dim).sum(),
        frames: hands[0].frames,
        goal_dim: hands.iter().map(|h| h.critic_goal_dim).sum(),
        action_dim: 1,
        latent,
        goal_hidden,
        head_hidden: vec![],
        init_log_std: 0.0,
    }
}

fn critic_obs_row(obs: &[AgentObs], hands: &[HandIo]) -> (Vec<f64>, Vec<f64>) {
    let frames = hands[0].frames;
    let mut pose = Vec::new();
    for f in 0..frames {
        for (o, h) in obs.iter().zip(hands) {
            pose.extend_from_slice(&o.pose[f * h.frame_dim..(f + 1) * h.frame_dim]);
        }
    }
    let goal = obs.iter().flat_map(|o| o.critic_goal.iter().copied()).collect();
    (pose, goal)
}

fn rows(v: &[Vec<f64>]) -> Array2<f64> {
    let w = v.first().map_or(0, Vec::len);
    Array2::from_shape_vec((v.len(), w), v.concat()).expect("rows of equal width")
}

#[allow(clippy::large_enum_variant)]
pub enum Agents {
    Single {
        policy: PolicyNet,
        critic: CriticNet,
        policy_opt: Adam,
        critic_opt: Adam,
    },
    Joint {
        left: PolicyNet,
        right: PolicyNet,
        sync: Synchronizer,
        critic: CriticNet,
        sync_opt: Adam,
        critic_opt: Adam,
    },
}

/// Per-iteration training summary, written as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub samples: usize,
    pub episodes: usize,
    /// Mean weighted return of the episodes finished in this rollout.
    pub mean_return: f64,
    pub objective_means: Vec<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_f1: Option<f64>,
}

/// Data of one rollout, time-major: row `t * workers + w`.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub workers: usize,
    pub steps: usize,
    /// Per hand.
    pub obs: Vec<Array2<f64>>,
    pub goals: Vec<Array2<f64>>,
    pub hidden: Vec<Array2<f64>>,
    /// Synchronizer encoder states, joint mode only.
    pub sync_hidden: Vec<Array2<f64>>,
    pub actions: Vec<Array2<f64>>,
    pub critic_obs: Array2<f64>,
    pub critic_goal: Array2<f64>,
    pub critic_hidden: Array2<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Array2<f64>,
    pub values: Array2<f64>,
    pub dones: Vec<bool>,
    /// Critic values after the last step, per worker.
    pub bootstrap: Array2<f64>,
}

struct Worker<E> {
    env: E,
    obs: Vec<AgentObs>,
    episode_return: f64,
}

pub struct Learner<E: Env> {
    pub mode: TrainMode,
    pub config: LearnerConfig,
    pub agents: Agents,
    pub objectives: Vec<ObjectiveSpec>,
    spec: EnvSpec,
    workers: Vec<Worker<E>>,
    rng: ChaCha8Rng,
    iteration: usize,
}

impl<E: Env> Learner<E> {
    /// A single-hand learner (left or right mode).
    pub fn single(mode: TrainMode, policy: PolicyNet, critic: CriticNet, envs: Vec<E>, config: LearnerConfig) -> Result<Self> {
        if mode == TrainMode::JointSync {
            return Err(Error::Config("joint-sync mode needs two policies and a synchronizer".into()));
        }
        let agents = Agents::Single {
            policy_opt: Adam::new(AdamConfig::with_lr(config.policy_lr)),
            critic_opt: Adam::new(AdamConfig::with_lr(config.critic_lr)),
            policy,
            critic,
        };
        Self::build(mode, agents, envs, config)
    }

    /// A synchronization learner: only the synchronizer and the critic train.
    pub fn joint(left: PolicyNet, right: PolicyNet, sync: Synchronizer, critic: CriticNet, envs: Vec<E>, config: LearnerConfig) -> Result<Self> {
        let agents = Agents::Joint {
            sync_opt: Adam::new(AdamConfig::with_lr(config.policy_lr)),
            critic_opt: Adam::new(AdamConfig::with_lr(config.critic_lr)),
            left,
            right,
            sync,
            critic,
        };
        Self::build(TrainMode::JointSync, agents, envs, config)
    }

    fn build(mode: TrainMode, agents: Agents, envs: Vec<E>, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        if envs.len() != config.workers {
            return Err(Error::Config(format!("{} environments for {} workers", envs.len(), config.workers)));
        }
        let spec = envs[0].spec();
        if envs.iter().any(|e| e.spec() != spec) {
            return Err(Error::Config("environments disagree on their spec".into()));
        }
        let hands = match mode {
            TrainMode::JointSync => 2,
            _ => 1,
        };
        if spec.hands.len() != hands {
            return Err(Error::Config(format!("{mode:?} mode needs {hands} hand(s), environment has {}", spec.hands.len())));
        }
        let (critic, policies): (&CriticNet, Vec<&PolicyNet>) = match &agents {
            Agents::Single { policy, critic, .. } => (critic, vec![policy]),
            Agents::Joint { left, right, critic, .. } => (critic, vec![left, right]),
        };
        if critic.num_heads() != spec.objectives.len() {
            return Err(Error::Config(format!(
                "critic has {} heads for {} objectives",
                critic.num_heads(),
                spec.objectives.len()
            )));
        }
        for (p, h) in policies.iter().zip(&spec.hands) {
            let c = &p.config;
            if c.frame_dim != h.frame_dim || c.frames != h.frames || c.goal_dim != h.goal_dim || c.action_dim != h.action_dim {
                return Err(Error::Config("policy shape does not match the environment".into()));
            }
        }
        let want = critic_net_config(&spec.hands, critic.config.latent, critic.config.goal_hidden);
        if critic.config.frame_dim != want.frame_dim || critic.config.goal_dim != want.goal_dim {
            return Err(Error::Config("critic shape does not match the environment".into()));
        }
        let workers = envs
            .into_iter()
            .map(|mut env| Worker {
                obs: env.reset(),
                env,
                episode_return: 0.0,
            })
            .collect();
        Ok(Learner {
            mode,
            objectives: spec.objectives.clone(),
            spec,
            agents,
            workers,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn envs(&self) -> impl Iterator<Item = &E> {
        self.workers.iter().map(|w| &w.env)
    }

    fn weights(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| o.weight).collect()
    }

    fn critic(&self) -> &CriticNet {
        match &self.agents {
            Agents::Single { critic, .. } | Agents::Joint { critic, .. } => critic,
        }
    }

    /// Checksums of parameters that must stay fixed in this mode.
    pub fn locked_checksums(&self) -> Vec<String> {
        match &self.agents {
            Agents::Single { .. } => Vec::new(),
            Agents::Joint { left, right, .. } => vec![left.params.checksum(), right.params.checksum()],
        }
    }

    fn critic_input(&self, hidden: &Array2<f64>) -> NetInput {
        let (p, g): (Vec<_>, Vec<_>) = self.workers.iter().map(|w| critic_obs_row(&w.obs, &self.spec.hands)).unzip();
        NetInput {
            obs: rows(&p),
            goal: rows(&g),
            hidden: hidden.clone(),
        }
    }

    fn hand_rows(&self, hand: usize) -> (Array2<f64>, Array2<f64>) {
        let p: Vec<_> = self.workers.iter().map(|w| w.obs[hand].pose.clone()).collect();
        let g: Vec<_> = self.workers.iter().map(|w| w.obs[hand].goal.clone()).collect();
        (rows(&p), rows(&g))
    }

    /// Collects `steps_per_worker` frames from every worker in lockstep.
    pub fn collect(&mut self) -> Result<(RolloutBatch, Vec<f64>)> {
        let w = self.config.workers;
        let steps = self.config.steps_per_worker();
        let hands = self.spec.hands.len();
        let k = self.objectives.len();
        let weights = self.weights();
        let latent = |p: &PolicyNet| p.config.latent;
        let (mut hidden, mut sync_hidden): (Vec<Array2<f64>>, Vec<Array2<f64>>) = match &self.agents {
            Agents::Single { policy, .. } => (vec![Array2::zeros((w, latent(policy)))], vec![]),
            Agents::Joint { left, right, .. } => {
                let z = |p: &PolicyNet| Array2::zeros((w, latent(p)));
                (vec![z(left), z(right)], vec![z(left), z(right)])
            }
        };
        let mut critic_hidden = Array2::zeros((w, self.critic().config.latent));
        let mut b_obs = vec![Vec::with_capacity(steps); hands];
        let mut b_goal = vec![Vec::with_capacity(steps); hands];
        let mut b_hidden = vec![Vec::with_capacity(steps); hands];
        let mut b_sync = vec![Vec::with_capacity(steps); sync_hidden.len()];
        let mut b_act = vec![Vec::with_capacity(steps); hands];
        let (mut b_cobs, mut b_cgoal, mut b_chid) = (Vec::new(), Vec::new(), Vec::new());
        let mut log_probs = Vec::with_capacity(steps * w);
        let mut rewards = Array2::zeros((steps * w, k));
        let mut values = Array2::zeros((steps * w, k));
        let mut dones = Vec::with_capacity(steps * w);
        let mut returns = Vec::new();

        for t in 0..steps {
            let inputs: Vec<(Array2<f64>, Array2<f64>)> = (0..hands).map(|h| self.hand_rows(h)).collect();
            let cin = self.critic_input(&critic_hidden);
            let (means, new_hidden, new_sync, log_stds) = match &self.agents {
                Agents::Single { policy, .. } => {
                    let inp = NetInput {
                        obs: inputs[0].0.clone(),
                        goal: inputs[0].1.clone(),
                        hidden: hidden[0].clone(),
                    };
                    let (m, h) = policy.act(&inp)?;
                    (vec![m], vec![h], vec![], vec![policy.log_std().row(0).to_vec()])
                }
                Agents::Joint { left, right, sync, .. } => {
                    let state = JointState {
                        left: hidden[0].clone(),
                        right: hidden[1].clone(),
                        sync_left: sync_hidden[0].clone(),
                        sync_right: sync_hidden[1].clone(),
                    };
                    let mut tape = Tape::new();
                    let out = joint_forward(&mut tape, left, right, sync, (&inputs[0].0, &inputs[0].1), (&inputs[1].0, &inputs[1].1), &state)?;
                    let v = |x| tape.value(x).clone();
                    (
                        vec![v(out.mean_left), v(out.mean_right)],
                        vec![v(out.hidden[0]), v(out.hidden[1])],
                        vec![v(out.hidden[2]), v(out.hidden[3])],
                        vec![left.log_std().row(0).to_vec(), right.log_std().row(0).to_vec()],
                    )
                }
            };
            let (v_now, c_hidden) = {
                let critic = self.critic();
                let mut tape = Tape::new();
                let (v, h) = critic.forward(&mut tape, &cin)?;
                let mut v = tape.value(v).clone();
                for (c, mut col) in v.axis_iter_mut(Axis(1)).enumerate() {
                    col.mapv_inplace(|x| critic.popart.denormalize(c, x));
                }
                (v, tape.value(h).clone())
            };

            let mut actions = vec![Vec::with_capacity(hands); w];
            let mut lp = vec![0.0; w];
            for (i, acts) in actions.iter_mut().enumerate() {
                for h in 0..hands {
                    let m = means[h].row(i).to_vec();
                    let a = gaussian::sample(&m, &log_stds[h], &mut self.rng);
                    lp[i] += gaussian::log_prob(&m, &log_stds[h], &a);
                    acts.push(a);
                }
            }

            for h in 0..hands {
                b_obs[h].push(inputs[h].0.clone());
                b_goal[h].push(inputs[h].1.clone());
                b_hidden[h].push(hidden[h].clone());
                b_act[h].push(rows(&actions.iter().map(|a| a[h].clone()).collect::<Vec<_>>()));
            }
            for (h, s) in sync_hidden.iter().enumerate() {
                b_sync[h].push(s.clone());
            }
            b_cobs.push(cin.obs.clone());
            b_cgoal.push(cin.goal.clone());
            b_chid.push(critic_hidden.clone());
            log_probs.extend_from_slice(&lp);

            let results: Vec<Result<_>> = self
                .workers
                .par_iter_mut()
                .zip(actions.par_iter())
                .map(|(wk, a)| wk.env.step(a))
                .collect();
            hidden = new_hidden;
            sync_hidden = new_sync;
            critic_hidden = c_hidden;
            for (i, res) in results.into_iter().enumerate() {
                let res = res?;
                let row = t * w + i;
                for c in 0..k {
                    rewards[[row, c]] = res.rewards[c];
                    values[[row, c]] = v_now[[i, c]];
                }
                let wk = &mut self.workers[i];
                wk.episode_return += res.rewards.iter().zip(&weights).map(|(r, w)| r * w).sum::<f64>();
                dones.push(res.done);
                if res.done {
                    returns.push(wk.episode_return);
                    wk.episode_return = 0.0;
                    wk.obs = wk.env.reset();
                    for hid in hidden.iter_mut().chain(sync_hidden.iter_mut()) {
                        hid.row_mut(i).fill(0.0);
                    }
                    critic_hidden.row_mut(i).fill(0.0);
                } else {
                    wk.obs = res.obs;
                }
            }
        }

        let cin = self.critic_input(&critic_hidden);
        let bootstrap = self.critic().values(&cin)?;
        let stack = |v: Vec<Array2<f64>>| -> Array2<f64> {
            let views: Vec<_> = v.iter().map(|a| a.view()).collect();
            concatenate(Axis(0), &views).expect("equal widths")
        };
        let batch = RolloutBatch {
            workers: w,
            steps,
            obs: b_obs.into_iter().map(stack).collect(),
            goals: b_goal.into_iter().map(stack).collect(),
            hidden: b_hidden.into_iter().map(stack).collect(),
            sync_hidden: b_sync.into_iter().map(stack).collect(),
            actions: b_act.into_iter().map(stack).collect(),
            critic_obs: stack(b_cobs),
            critic_goal: stack(b_cgoal),
            critic_hidden: stack(b_chid),
            log_probs,
            rewards,
            values,
            dones,
            bootstrap,
        };
        if returns.is_empty() {
            returns = self.workers.iter().map(|wk| wk.episode_return).collect();
        }
        Ok((batch, returns))
    }

    /// Per-channel advantages (standardized) and returns, time-major rows.
    pub fn advantages(&self, batch: &RolloutBatch) -> Result<(Array2<f64>, Array2<f64>)> {
        let (w, steps) = (batch.workers, batch.steps);
        let k = self.objectives.len();
        let mut adv = Array2::zeros((steps * w, k));
        let mut ret = Array2::zeros((steps * w, k));
        for c in 0..k {
            for i in 0..w {
                let idx: Vec<usize> = (0..steps).map(|t| t * w + i).collect();
                let r: Vec<f64> = idx.iter().map(|&j| batch.rewards[[j, c]]).collect();
                let v: Vec<f64> = idx.iter().map(|&j| batch.values[[j, c]]).collect();
                let d: Vec<bool> = idx.iter().map(|&j| batch.dones[j]).collect();
                let (a, rt) = gae(&r, &v, batch.bootstrap[[i, c]], &d, self.config.gamma, self.config.lambda)?;
                for (n, &j) in idx.iter().enumerate() {
                    adv[[j, c]] = a[n];
                    ret[[j, c]] = rt[n];
                }
            }
            let mut col = adv.column(c).to_vec();
            standardize(&mut col);
            adv.column_mut(c).assign(&Array1::from(col));
        }
        Ok((adv, ret))
    }

    /// One rollout followed by `epochs` passes of minibatch updates.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics> {
        let (batch, returns) = self.collect()?;
        let (adv, ret) = self.advantages(&batch)?;
        let weights = Array1::from(self.weights());
        let combined: Vec<f64> = adv.dot(&weights).to_vec();
        let n = combined.len();
        match &mut self.agents {
            Agents::Single { critic, .. } | Agents::Joint { critic, .. } => critic.update_statistics(&ret),
        }
        let mut order: Vec<usize> = (0..n).collect();
        let (mut ploss, mut vloss, mut clipf, mut updates) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..self.config.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.config.batch) {
                let (pl, cf) = self.policy_step(&batch, &combined, chunk)?;
                let vl = self.critic_step(&batch, &ret, chunk)?;
                ploss += pl;
                clipf += cf;
                vloss += vl;
                updates += 1;
            }
        }
        let u = updates.max(1) as f64;
        let metrics = IterationMetrics {
            iteration: self.iteration,
            samples: n,
            episodes: returns.len(),
            mean_return: returns.iter().sum::<f64>() / returns.len().max(1) as f64,
            objective_means: batch.rewards.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default(),
            policy_loss: ploss / u,
            value_loss: vloss / u,
            clip_fraction: clipf / u,
            probe_f1: None,
        };
        self.iteration += 1;
        Ok(metrics)
    }

    fn policy_step(&mut self, batch: &RolloutBatch, combined: &[f64], idx: &[usize]) -> Result<(f64, f64)> {
        let sel = |a: &Array2<f64>| a.select(Axis(0), idx);
        let old: Vec<f64> = idx.iter().map(|&i| batch.log_probs[i]).collect();
        let adv: Vec<f64> = idx.iter().map(|&i| combined[i]).collect();
        let clip = self.config.clip;
        let max_norm = self.config.max_grad_norm;
        match &mut self.agents {
            Agents::Single { policy, policy_opt, .. } => {
                let input = NetInput {
                    obs: sel(&batch.obs[0]),
                    goal: sel(&batch.goals[0]),
                    hidden: sel(&batch.hidden[0]),
                };
                let (sur, mut grads) = policy_surrogate_grads(policy, &input, &sel(&batch.actions[0]), &old, &adv, clip)?;
                clip_grad_norm(&mut grads, policy.params.tag(), max_norm);
                policy_opt.step(&mut policy.params, &grads);
                Ok((sur.loss, sur.clip_fraction))
            }
            Agents::Joint { left, right, sync, sync_opt, .. } => {
                let state = JointState {
                    left: sel(&batch.hidden[0]),
                    right: sel(&batch.hidden[1]),
                    sync_left: sel(&batch.sync_hidden[0]),
                    sync_right: sel(&batch.sync_hidden[1]),
                };
                let inputs = [
                    (sel(&batch.obs[0]), sel(&batch.goals[0])),
                    (sel(&batch.obs[1]), sel(&batch.goals[1])),
                ];
                let actions = [sel(&batch.actions[0]), sel(&batch.actions[1])];
                let (sur, mut grads) =
                    joint_surrogate_grads(left, right, sync, &inputs, &state, &actions, &old, &adv, clip)?;
                clip_grad_norm(&mut grads, sync.params.tag(), max_norm);
                sync_opt.step(&mut sync.params, &grads);
                Ok((sur.loss, sur.clip_fraction))
            }
        }
    }

    fn critic_step(&mut self, batch: &RolloutBatch, ret: &Array2<f64>, idx: &[usize]) -> Result<f64> {
        let max_norm = self.config.max_grad_norm;
        let (critic, opt) = match &mut self.agents {
            Agents::Single { critic, critic_opt, .. } | Agents::Joint { critic, critic_opt, .. } => (critic, critic_opt),
        };
        let input = NetInput {
            obs: batch.critic_obs.select(Axis(0), idx),
            goal: batch.critic_goal.select(Axis(0), idx),
            hidden: batch.critic_hidden.select(Axis(0), idx),
        };
        let mut tape = Tape::new();
        let (v, _) = critic.forward(&mut tape, &input)?;
        let pred = tape.value(v);
        let b = idx.len() as f64;
        let mut d = Array2::zeros(pred.raw_dim());
        let mut loss = 0.0;
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..pred.ncols() {
                let target = critic.popart.normalize(c, ret[[i, c]]);
                let e = pred[[r, c]] - target;
                loss += 0.5 * e * e / b;
                d[[r, c]] = e / b;
            }
        }
        let mut grads = tape.backward(&[(v, d)]);
        clip_grad_norm(&mut grads, critic.params.tag(), max_norm);
        opt.step(&mut critic.params, &grads);
        Ok(loss)
    }
}
