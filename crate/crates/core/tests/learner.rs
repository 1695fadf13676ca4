mod common;

use common::brute_gae;
use fretsync::learner::{gae, standardize, surrogate};
use fretsync::nn::checkpoint::{decode, encode, load, named};
use fretsync::nn::{joint_forward, JointState, NetConfig, NetInput, PolicyNet, Synchronizer, Tape};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(goal_dim: usize) -> NetConfig {
    NetConfig {
        frame_dim: 5,
        frames: 2,
        goal_dim,
        action_dim: 3,
        latent: 8,
        goal_hidden: 6,
        head_hidden: vec![6],
        init_log_std: 0.1f64.ln(),
    }
}

fn rows(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

#[test]
fn gae_cuts_at_episode_ends() {
    let rewards = [1.0, 0.5, -0.25, 2.0];
    let values = [0.2, -0.1, 0.3, 0.0];
    let dones = [false, true, false, false];
    let (adv, ret) = gae(&rewards, &values, 0.7, &dones, 0.9, 0.8).unwrap();
    let want = brute_gae(&rewards, &values, 0.7, &dones, 0.9, 0.8);
    for t in 0..4 {
        assert!((adv[t] - want[t]).abs() < 1e-12);
        assert!((ret[t] - want[t] - values[t]).abs() < 1e-12);
    }
    // Step 1 ends an episode, so step 0 sees only steps 0 and 1.
    let d0 = 1.0 + 0.9 * -0.1 - 0.2;
    let d1 = 0.5 - -0.1;
    assert!((adv[0] - (d0 + 0.72 * d1)).abs() < 1e-12);
}

#[test]
fn gae_rejects_mismatched_lengths() {
    assert!(gae(&[1.0, 2.0], &[0.0], 0.0, &[false, false], 0.9, 0.9).is_err());
}

#[test]
fn standardized_advantages_have_zero_mean_unit_spread() {
    let mut x = vec![1.0, 4.0, -2.0, 0.5, 3.0];
    standardize(&mut x);
    let mean = x.iter().sum::<f64>() / 5.0;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-6);
}

#[test]
fn clipped_rows_contribute_no_gradient() {
    let mean = Array2::zeros((2, 1));
    let actions = Array2::from_elem((2, 1), 0.1);
    let ls = [0.0];
    // Row 0: ratio e^0.5 > 1.2 with positive advantage is clipped; row 1 is not.
    let logp = -0.5 * 0.01 - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let s = surrogate(&mean, &ls, &actions, &[logp - 0.5, logp], &[1.0, 1.0], 0.2);
    assert_eq!(s.clip_fraction, 0.5);
    assert_eq!(s.d_mean[[0, 0]], 0.0);
    assert!(s.d_mean[[1, 0]] != 0.0);
}

#[test]
fn synchronizer_starts_as_the_identity_for_any_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let left = PolicyNet::new(small(4), &mut rng).unwrap();
    let right = PolicyNet::new(small(7), &mut rng).unwrap();
    let sync = Synchronizer::new(&left, &right, 5, &mut rng).unwrap();
    for b in [1, 3, 17] {
        let (lo, lg, ro, rg) = (rows(&mut rng, b, 10), rows(&mut rng, b, 4), rows(&mut rng, b, 10), rows(&mut rng, b, 7));
        let state = JointState::zeros(b, &left.config, &right.config);
        let mut tape = Tape::new();
        let out = joint_forward(&mut tape, &left, &right, &sync, (&lo, &lg), (&ro, &rg), &state).unwrap();
        let (ml, _) = left.act(&NetInput { obs: lo, goal: lg, hidden: state.left.clone() }).unwrap();
        let (mr, _) = right.act(&NetInput { obs: ro, goal: rg, hidden: state.right.clone() }).unwrap();
        assert_eq!(tape.value(out.mean_left), &ml);
        assert_eq!(tape.value(out.mean_right), &mr);
    }
}

#[test]
fn checkpoints_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = PolicyNet::new(small(4), &mut rng).unwrap();
    let mut b = PolicyNet::new(small(4), &mut rng).unwrap();
    assert_ne!(a.params.checksum(), b.params.checksum());
    let bytes = encode(&named(&a.params, "policy"));
    load(&mut b.params, "policy", &decode(&bytes).unwrap()).unwrap();
    assert_eq!(a.params.checksum(), b.params.checksum());
    assert!(decode(&bytes[..bytes.len() - 3]).is_err());
}
