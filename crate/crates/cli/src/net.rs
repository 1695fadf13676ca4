use std::path::PathBuf;

use clap::{Args, Subcommand};
use fretsync::nn::checkpoint;
use fretsync::nn::policy::{joint_forward, JointState, NetConfig, NetInput, PolicyNet, Synchronizer};
use fretsync::nn::tape::Tape;
use fretsync::toy::{train_toy, ToyTrainConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::failure::{CliResult, Failure};
use crate::manifest::RunManifest;
use crate::{create_dir, read_config, write_text, Outcome};

/// Tensor name prefix of policy checkpoints written by `train-toy`.
pub const POLICY_PREFIX: &str = "policy.";

#[derive(Debug, Subcommand)]
pub enum NetCommand {
    /// Check that a fresh synchronizer leaves both hand policies unchanged.
    CheckSyncInit(SyncArgs),
    /// Train the fretting hand on the one-finger toy task.
    TrainToy(ToyArgs),
}

#[derive(Debug, Args)]
pub struct SyncArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random observation, goal and state rows to compare.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Add this to every synchronizer weight before comparing.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    perturb: f64,
    #[arg(long, default_value_t = 256)]
    trunk_hidden: usize,
    /// Fretting-hand policy checkpoint.
    #[arg(long, requires_all = ["right", "net_config"])]
    left: Option<PathBuf>,
    /// Picking-hand policy checkpoint.
    #[arg(long, requires_all = ["left", "net_config"])]
    right: Option<PathBuf>,
    /// Network shape of both policies (JSON). Defaults to the full hand network.
    #[arg(long)]
    net_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Write metrics, checkpoint, network shape and manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full training configuration (JSON); the flags above override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(cmd: NetCommand) -> CliResult<Outcome> {
    match cmd {
        NetCommand::CheckSyncInit(args) => check_sync_init(args),
        NetCommand::TrainToy(args) => toy(args),
    }
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn load_policy(path: &PathBuf, config: &NetConfig, rng: &mut ChaCha8Rng) -> CliResult<PolicyNet> {
    let mut net = PolicyNet::new(config.clone(), rng)?;
    let bytes = std::fs::read(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    checkpoint::load(&mut net.params, POLICY_PREFIX, &checkpoint::decode(&bytes)?)?;
    Ok(net)
}

fn max_gap(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_sync_init(args: SyncArgs) -> CliResult<Outcome> {
    if args.pairs == 0 {
        return Err(Failure::Validation("--pairs must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let config: NetConfig = match &args.net_config {
        Some(p) => read_config(p)?,
        None => NetConfig::hand(),
    };
    config.validate()?;
    let (left, right) = match (&args.left, &args.right) {
        (Some(l), Some(r)) => (load_policy(l, &config, &mut rng)?, load_policy(r, &config, &mut rng)?),
        _ => (PolicyNet::new(config.clone(), &mut rng)?, PolicyNet::new(config.clone(), &mut rng)?),
    };
    let mut sync = Synchronizer::new(&left, &right, args.trunk_hidden, &mut rng)?;
    if args.perturb != 0.0 {
        for i in 0..sync.params.len() {
            sync.params.get_mut(i).mapv_inplace(|w| w + args.perturb);
        }
    }
    let n = args.pairs;
    let (lo, lg) = (random_rows(&mut rng, n, config.obs_dim()), random_rows(&mut rng, n, config.goal_dim));
    let (ro, rg) = (random_rows(&mut rng, n, config.obs_dim()), random_rows(&mut rng, n, config.goal_dim));
    let state = JointState {
        left: random_rows(&mut rng, n, config.latent),
        right: random_rows(&mut rng, n, config.latent),
        sync_left: random_rows(&mut rng, n, config.latent),
        sync_right: random_rows(&mut rng, n, config.latent),
    };
    let mut tape = Tape::new();
    let joint = joint_forward(&mut tape, &left, &right, &sync, (&lo, &lg), (&ro, &rg), &state)?;
    let (ml, hl) = left.act(&NetInput { obs: lo, goal: lg, hidden: state.left.clone() })?;
    let (mr, hr) = right.act(&NetInput { obs: ro, goal: rg, hidden: state.right.clone() })?;
    let gaps = [
        max_gap(tape.value(joint.mean_left), &ml),
        max_gap(tape.value(joint.mean_right), &mr),
        max_gap(tape.value(joint.hidden[0]), &hl),
        max_gap(tape.value(joint.hidden[1]), &hr),
    ];
    let deviation = gaps.iter().copied().fold(0.0, f64::max);
    let detail = json!({
        "pairs": n,
        "max_deviation": deviation,
        "left_mean": gaps[0],
        "right_mean": gaps[1],
        "left_hidden": gaps[2],
        "right_hidden": gaps[3],
        "perturb": args.perturb,
    });
    if deviation != 0.0 {
        return Err(Failure::Assertion {
            message: format!("synchronized policies deviate by up to {deviation:e}"),
            detail,
        });
    }
    let mut s = detail;
    s["identical"] = json!(true);
    Ok(Outcome::summary(s))
}

fn toy(args: ToyArgs) -> CliResult<Outcome> {
    let mut cfg: ToyTrainConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => ToyTrainConfig::new(200, 7, 4),
    };
    if let Some(it) = args.iters {
        cfg.iterations = it;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.learner.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
        cfg.learner.workers = w;
        cfg.learner.replay = cfg.learner.batch * w;
    }
    if cfg.iterations == 0 {
        return Err(Failure::Validation("--iters must be positive".into()));
    }
    let total = cfg.iterations;
    let run = train_toy(&cfg, |m| {
        if m.iteration % 10 == 0 || m.iteration + 1 == total {
            let probe = m.probe_f1.map(|f| format!(", probe F1 {f:.3}")).unwrap_or_default();
            eprintln!("iteration {:>4}: return {:.3}{probe}", m.iteration, m.mean_return);
        }
    })?;
    let m = &run.metrics;
    let tail = &m[m.len().saturating_sub(10)..];
    let final_return = tail.iter().map(|x| x.mean_return).sum::<f64>() / tail.len() as f64;
    let mut s = json!({
        "iterations": cfg.iterations,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "initial_return": m[0].mean_return,
        "final_return": final_return,
        "initial_probe_f1": m[0].probe_f1,
        "final_probe_f1": m[m.len() - 1].probe_f1,
        "policy_checksum": run.policy.params.checksum(),
    });
    let Some(out) = args.out else {
        return Ok(Outcome::summary(s));
    };
    create_dir(&out)?;
    let mut metrics = String::new();
    for row in m {
        metrics.push_str(&serde_json::to_string(row)?);
        metrics.push('\n');
    }
    let (metrics_path, ckpt_path, net_path) = (out.join("metrics.jsonl"), out.join("policy.fsnn"), out.join("net_config.json"));
    write_text(&metrics_path, &metrics)?;
    std::fs::write(&ckpt_path, checkpoint::encode(&checkpoint::named(&run.policy.params, POLICY_PREFIX)))?;
    write_text(&net_path, &(serde_json::to_string_pretty(&run.policy.config)? + "\n"))?;
    let inputs: Vec<PathBuf> = args.config.as_deref().map(crate::config_path).into_iter().collect();
    let outputs = [metrics_path, ckpt_path, net_path];
    let manifest = RunManifest::new(std::env::args().skip(1).collect(), serde_json::to_value(&cfg)?, Some(cfg.seed), &inputs, &outputs)?;
    s["out"] = json!(out.display().to_string());
    Ok(Outcome { summary: s, manifest: Some((Some(out.join("manifest.json")), manifest)) })
}
