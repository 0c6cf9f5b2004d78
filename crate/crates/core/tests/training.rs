use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unrealdc::losses::LossComponents;
use unrealdc::minidoom::{Observation, Role};
use unrealdc::netcore::{NetworkConfig, Parameters};
use unrealdc::replay::{ReplayBuffer, Transition};
use unrealdc::trainer::{auxiliary_gradients, train, TrainConfig, TrainError};

fn map(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("maps").join(name)
}

fn tiny(role: Role, maps: &[&str], steps: u64, workers: usize, seed: u64) -> TrainConfig {
    let mut c = TrainConfig {
        seed,
        role,
        network: "tiny".into(),
        maps: maps.iter().map(|m| map(m)).collect(),
        step_limit: Some(50),
        ..TrainConfig::default()
    };
    c.schedule.steps = steps;
    c.schedule.workers = workers;
    c
}

#[test]
fn single_worker_is_reproducible() {
    let c = tiny(Role::Action, &["corridor.txt"], 2000, 1, 3);
    let a = train(&c, None).unwrap();
    let b = train(&c, None).unwrap();
    assert!(a.applied_updates() >= 100);
    assert_eq!(a.params, b.params);
    assert_eq!(a.optimizer, b.optimizer);
    assert_eq!(a.log, b.log);
}

#[test]
fn worker_counters_add_up() {
    let c = tiny(Role::Navigation, &["nav9.txt", "objects_dense.txt"], 3000, 4, 5);
    let out = train(&c, None).unwrap();
    assert_eq!(out.global_steps, 3000);
    assert_eq!(out.workers.iter().map(|w| w.steps).sum::<u64>(), out.global_steps);
    assert_eq!(out.workers.iter().map(|w| w.applied).sum::<u64>(), out.applied_updates());
    assert!(out.workers.iter().all(|w| w.steps > 0 && w.error.is_none()));
    assert!(out.optimizer.g.tensors().iter().all(|t| t.data.iter().all(|&g| g >= 0.0 && g.is_finite())));
    assert!(out.params.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite())));
    for pair in out.log.windows(2) {
        assert!(pair[0].global_step <= pair[1].global_step);
    }
}

#[test]
fn zero_budget_returns_initial_parameters() {
    let c = tiny(Role::Navigation, &["nav9.txt"], 0, 2, 8);
    let out = train(&c, None).unwrap();
    assert_eq!(out.params, Parameters::init(&NetworkConfig::tiny(3), 8).unwrap());
    assert_eq!(out.applied_updates(), 0);
    assert!(out.log.is_empty());
}

#[test]
fn warm_up_contributes_nothing() {
    let c = tiny(Role::Action, &["corridor.txt"], 0, 1, 0);
    let params = Parameters::init(&NetworkConfig::tiny(5), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut replay = ReplayBuffer::new(100);
    for i in 0..5 {
        // Too short for a replay sequence and no rewarded transition yet.
        replay.push(Transition { observation: Observation::zeros(8, 8), action: i % 5, reward: 0.0, done: false });
    }
    let mut grad = params.zeros_like();
    let mut losses = LossComponents::default();
    auxiliary_gradients(&params, &replay, &c, &mut rng, &mut grad, &mut losses).unwrap();
    assert_eq!(losses, LossComponents::default());
    assert_eq!(grad, params.zeros_like());
}

#[test]
fn checkpoints_and_log_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(Role::Action, &["room1.txt"], 1000, 2, 2);
    c.schedule.checkpoint_interval = 400;
    let out = train(&c, Some(dir.path())).unwrap();
    for name in ["step_000000400.ckpt", "step_000000800.ckpt", "final.ckpt", "train_log.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let text = std::fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
    assert_eq!(text.lines().count(), out.log.len() + 1);
}

#[test]
fn missing_map_names_path() {
    let c = TrainConfig { maps: vec!["nowhere/x.txt".into()], ..TrainConfig::default() };
    match train(&c, None) {
        Err(e @ TrainError::MapFile { .. }) => assert!(e.to_string().contains("nowhere/x.txt")),
        other => panic!("{other:?}"),
    }
}
