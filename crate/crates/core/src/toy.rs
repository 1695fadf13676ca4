//! Seeded training run on [`ToyFretEnv`].

use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Env, ToyConfig, ToyFretEnv};
use crate::geometry::{FretboardGeometry, GuitarSpec};
use crate::learner::{critic_net_config, IterationMetrics, Learner, LearnerConfig, TrainMode};
use crate::metrics::{aggregate, left_note_verdicts, NoteResult, Verdict};
use crate::nn::{CriticNet, NetConfig, NetInput, PolicyNet};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainConfig {
    pub iterations: usize,
    pub seed: u64,
    pub workers: usize,
    /// Evaluate the probe melody every this many iterations (and at both ends).
    pub probe_every: usize,
    pub latent: usize,
    pub hidden: usize,
    pub init_log_std: f64,
    pub env: ToyConfig,
    pub learner: LearnerConfig,
}

impl ToyTrainConfig {
    /// Desk-scale defaults: small networks and larger step sizes than the
    /// full-hand configuration.
    pub fn new(iterations: usize, seed: u64, workers: usize) -> Self {
        let env = ToyConfig::default();
        let episode = 30 * env.notes;
        ToyTrainConfig {
            iterations,
            seed,
            workers,
            probe_every: 10,
            latent: 64,
            hidden: 64,
            init_log_std: 0.3f64.ln(),
            env,
            learner: LearnerConfig {
                policy_lr: 3e-4,
                critic_lr: 1e-3,
                workers,
                replay: episode * workers,
                batch: episode,
                epochs: 5,
                popart_beta: 0.1,
                seed,
                ..LearnerConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub metrics: Vec<IterationMetrics>,
    pub policy: PolicyNet,
    pub critic: CriticNet,
}

pub fn toy_net_config(cfg: &ToyTrainConfig, env: &ToyFretEnv) -> NetConfig {
    let io = env.spec().hands[0];
    NetConfig {
        frame_dim: io.frame_dim,
        frames: io.frames,
        goal_dim: io.goal_dim,
        action_dim: io.action_dim,
        latent: cfg.latent,
        goal_hidden: cfg.hidden,
        head_hidden: vec![cfg.hidden],
        init_log_std: cfg.init_log_std,
    }
}

fn geometry() -> Result<Arc<FretboardGeometry>> {
    Ok(Arc::new(FretboardGeometry::new(GuitarSpec::default())?))
}

/// Plays the probe melody with the policy's mean action and returns the
/// fretting F1 over its notes.
pub fn probe_f1(policy: &PolicyNet, config: &ToyConfig) -> Result<f64> {
    let g = geometry()?;
    let score = ToyFretEnv::probe_score(config);
    let mut env = ToyFretEnv::with_score(g, config.clone(), score.clone(), 0)?;
    let mut obs = env.reset();
    let mut hidden = policy.zero_hidden(1);
    loop {
        let input = NetInput {
            obs: Array2::from_shape_vec((1, obs[0].pose.len()), obs[0].pose.clone()).expect("one row"),
            goal: Array2::from_shape_vec((1, obs[0].goal.len()), obs[0].goal.clone()).expect("one row"),
            hidden,
        };
        let (mean, h) = policy.act(&input)?;
        hidden = h;
        let step = env.step(&[mean.row(0).to_vec()])?;
        if step.done {
            break;
        }
        obs = step.obs;
    }
    let results: Vec<NoteResult> = env
        .ledgers()
        .iter()
        .zip(&score.notes)
        .map(|(l, n)| {
            let left = left_note_verdicts(l, n)?;
            Ok(NoteResult {
                note_index: l.note_index,
                chord: false,
                left,
                right: [Verdict::TrueNegative; 6],
                joint: [Verdict::TrueNegative; 6],
            })
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&results)?.track.left.f1)
}

/// Runs the seeded toy training; `on_iteration` sees every metrics record.
pub fn train_toy(cfg: &ToyTrainConfig, mut on_iteration: impl FnMut(&IterationMetrics)) -> Result<ToyRun> {
    let g = geometry()?;
    let envs = (0..cfg.workers)
        .map(|i| ToyFretEnv::new(Arc::clone(&g), cfg.env.clone(), cfg.seed.wrapping_mul(1000).wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = toy_net_config(cfg, &envs[0]);
    let policy = PolicyNet::new(net, &mut rng)?;
    let spec = envs[0].spec();
    let critic_cfg = critic_net_config(&spec.hands, cfg.latent, cfg.hidden);
    let critic = CriticNet::new(critic_cfg, spec.objectives.len(), cfg.learner.popart_beta, &mut rng)?;
    let mut learner = Learner::single(TrainMode::Left, policy, critic, envs, cfg.learner.clone())?;
    let mut metrics = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let probe = it == 0 || (cfg.probe_every > 0 && it % cfg.probe_every == 0);
        let f1 = if probe { Some(probe_f1(single_policy(&learner), &cfg.env)?) } else { None };
        let mut m = learner.train_iteration()?;
        m.probe_f1 = f1;
        on_iteration(&m);
        metrics.push(m);
    }
    let final_f1 = probe_f1(single_policy(&learner), &cfg.env)?;
    if let Some(last) = metrics.last_mut() {
        last.probe_f1 = Some(final_f1);
    }
    let (policy, critic) = match learner.agents {
        crate::learner::Agents::Single { policy, critic, .. } => (policy, critic),
        crate::learner::Agents::Joint { .. } => unreachable!("toy training is single-hand"),
    };
    Ok(ToyRun { metrics, policy, critic })
}

fn single_policy<E: Env>(learner: &Learner<E>) -> &PolicyNet {
    match &learner.agents {
        crate::learner::Agents::Single { policy, .. } => policy,
        crate::learner::Agents::Joint { left, .. } => left,
    }
}
