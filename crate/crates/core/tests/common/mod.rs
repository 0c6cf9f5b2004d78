#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unrealdc::losses::{PcLoss, PolicyLoss, RpLoss, ValueLoss};
use unrealdc::minidoom::Observation;
use unrealdc::netcore::{forward, gradients, NetworkConfig, Parameters, RecurrentState, RolloutLoss};

pub fn random_frames(config: &NetworkConfig, n: usize, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let data = (0..config.input_height * config.input_width * 3).map(|_| rng.random::<f32>()).collect();
            Observation::new(config.input_height, config.input_width, data)
        })
        .collect()
}

/// Entries smaller than this are below what central differences at h = 1e-5 can resolve
/// (roundoff is about 1e-11 for O(1) losses), so the denominator never drops under it.
pub const GRAD_FLOOR: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(GRAD_FLOOR)
}

/// Max relative error between analytic gradients and central differences over every parameter.
pub fn fd_max_rel_error<L: RolloutLoss>(
    params: &Parameters,
    frames: &[Observation],
    state: &RecurrentState,
    loss: &L,
    h: f64,
) -> (f64, String) {
    let (_, analytic) = gradients(params, frames, state, loss).unwrap();
    let eval = |p: &Parameters| loss.evaluate(&forward(p, frames, state).unwrap()).total();
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for ti in 0..params.tensors().len() {
        for i in 0..params.tensors()[ti].data.len() {
            let orig = params.tensors()[ti].data[i];
            probe.tensors_mut()[ti].data[i] = orig + h;
            let up = eval(&probe);
            probe.tensors_mut()[ti].data[i] = orig - h;
            let down = eval(&probe);
            probe.tensors_mut()[ti].data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.tensors()[ti].data[i];
            let e = rel_err(a, numeric);
            if e > worst.0 {
                worst = (e, format!("{}[{i}] analytic {a:e} numeric {numeric:e}", params.tensors()[ti].id.name()));
            }
        }
    }
    worst
}

/// (head, max relative error, worst entry) for every loss on the tiny profile.
pub fn head_cases(seed: u64) -> Vec<(&'static str, f64, String)> {
    let config = NetworkConfig::tiny(5);
    let params = Parameters::init(&config, seed).unwrap();
    let frames = random_frames(&config, 4, seed + 100);
    let zero = RecurrentState::zeros(&config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 200);
    let carried = RecurrentState {
        hidden: (0..config.recurrent).map(|_| rng.random_range(-0.5..0.5)).collect(),
        cell: (0..config.recurrent).map(|_| rng.random_range(-0.5..0.5)).collect(),
        recent_frames: random_frames(&config, 2, seed + 300),
    };
    let geo = config.geometry().unwrap();
    let regions = geo.pc_h * geo.pc_w;
    let actions = vec![0, 3, 4, 1];
    let h = 1e-5;
    let mut out = Vec::new();
    let pi = PolicyLoss { actions: actions.clone(), advantages: vec![0.7, -1.3, 0.4, 2.0], entropy_beta: 0.01 };
    let (e, w) = fd_max_rel_error(&params, &frames, &carried, &pi, h);
    out.push(("policy", e, w));
    let v = ValueLoss { returns: vec![1.0, -0.5, 0.25, 2.0] };
    let (e, w) = fd_max_rel_error(&params, &frames, &carried, &v, h);
    out.push(("value", e, w));
    // Value replay runs the same loss on a replayed sequence from a fresh state.
    let replay = random_frames(&config, 3, seed + 400);
    let vr = ValueLoss { returns: vec![0.3, 0.9, -1.1] };
    let (e, w) = fd_max_rel_error(&params, &replay, &zero, &vr, h);
    out.push(("value_replay", e, w));
    let rp = RpLoss { step: 2, reward: -0.06 };
    let (e, w) = fd_max_rel_error(&params, &frames[..3], &zero, &rp, h);
    out.push(("reward_prediction", e, w));
    let pc = PcLoss {
        actions,
        targets: (0..4).map(|t| (0..regions).map(|r| 0.1 * (t + r) as f64 - 0.2).collect()).collect(),
    };
    let (e, w) = fd_max_rel_error(&params, &frames, &carried, &pc, h);
    out.push(("pixel_control", e, w));
    out
}
