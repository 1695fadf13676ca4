use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fretsync::geometry::{point_to_segment_distance, segment_to_segment_distance};
use fretsync::nn::policy::{joint_forward, JointState, NetConfig, PolicyNet, Synchronizer};
use fretsync::nn::tape::Tape;
use fretsync::oracle::{assign_fingers, finger_tips, left_rest_coordinates, solve_placement, OracleConfig};
use fretsync::reward::left_frame_rewards;
use fretsync::session::detect_presses;
use fretsync::{FretboardGeometry, GuitarSpec, HandSkeleton, Segment, StringTarget, TabNote, CONTROL_HZ};
use nalgebra::Point3;
use ndarray::Array2;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn geometry() -> Arc<FretboardGeometry> {
    Arc::new(FretboardGeometry::new(GuitarSpec::default()).unwrap())
}

fn a_minor() -> TabNote {
    use StringTarget::{Fret, Mute, Open};
    TabNote::new([Open, Fret(1), Fret(2), Fret(2), Open, Mute], Ratio::new(1, 4))
}

fn distances(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut p = || Point3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    let segs: Vec<(Segment, Segment)> = (0..256).map(|_| (Segment::new(p(), p()), Segment::new(p(), p()))).collect();
    let points: Vec<Point3<f64>> = (0..256).map(|_| p()).collect();
    c.bench_function("point_segment_x256", |b| {
        b.iter(|| points.iter().zip(&segs).map(|(q, (s, _))| point_to_segment_distance(q, s).0).sum::<f64>())
    });
    c.bench_function("segment_segment_x256", |b| {
        b.iter(|| segs.iter().map(|(s, t)| segment_to_segment_distance(s, t)).sum::<f64>())
    });
}

fn rewards(c: &mut Criterion) {
    let g = geometry();
    let cfg = OracleConfig::default();
    let sk = HandSkeleton::left();
    let rest = sk.pose(left_rest_coordinates(&g, &cfg)).unwrap();
    let note = a_minor();
    let tips = finger_tips(&rest);
    let a = assign_fingers(&note, 0, &g, &tips).unwrap();
    let placed = solve_placement(&note, &a, &g, None, &cfg).unwrap().pose;
    let history = [&rest, &placed];
    c.bench_function("left_frame_rewards", |b| b.iter(|| left_frame_rewards(black_box(&note), &history, &g, 1.0 / CONTROL_HZ).unwrap()));
    c.bench_function("detect_presses", |b| b.iter(|| detect_presses(black_box(&placed.parts), &g)));
}

fn placement(c: &mut Criterion) {
    let g = geometry();
    let cfg = OracleConfig::default();
    let rest = HandSkeleton::left().pose(left_rest_coordinates(&g, &cfg)).unwrap();
    let note = a_minor();
    let a = assign_fingers(&note, 0, &g, &finger_tips(&rest)).unwrap();
    let warm = solve_placement(&note, &a, &g, None, &cfg).unwrap().pose;
    let mut group = c.benchmark_group("oracle_placement");
    group.bench_function("cold", |b| b.iter(|| solve_placement(black_box(&note), &a, &g, None, &cfg).unwrap()));
    group.bench_function("warm", |b| b.iter(|| solve_placement(black_box(&note), &a, &g, Some(&warm), &cfg).unwrap()));
    group.finish();
}

fn joint(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = NetConfig::hand();
    let left = PolicyNet::new(cfg.clone(), &mut rng).unwrap();
    let right = PolicyNet::new(cfg.clone(), &mut rng).unwrap();
    let sync = Synchronizer::new(&left, &right, 256, &mut rng).unwrap();
    let batch = 32;
    let mut rows = |cols: usize| Array2::from_shape_fn((batch, cols), |_| rng.random_range(-1.0..1.0));
    let (lo, lg, ro, rg) = (rows(cfg.obs_dim()), rows(cfg.goal_dim), rows(cfg.obs_dim()), rows(cfg.goal_dim));
    let state = JointState::zeros(batch, &cfg, &cfg);
    c.bench_function("joint_forward_b32", |b| {
        b.iter_batched(Tape::new, |mut tape| joint_forward(&mut tape, &left, &right, &sync, (&lo, &lg), (&ro, &rg), &state).unwrap().mean_left, BatchSize::SmallInput)
    });
}

criterion_group!(benches, distances, rewards, placement, joint);
criterion_main!(benches);
