use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::log::TrainLog;
use super::optim::{clip_global_norm, GlobalStore};
use super::TrainConfig;
use crate::losses::{
    max_q, merge_evals, n_step_returns, pc_pseudo_reward, pc_targets, LossComponents, PcLoss, PolicyLoss, RpLoss,
    ValueLoss,
};
use crate::minidoom::{EventCounts, MapSpec, Observation, ViewDims, WorldOptions, WorldState};
use crate::netcore::{save_checkpoint, HeadMask, NetError, NetworkConfig, Parameters, RecurrentState, RolloutLoss, Trace};
use crate::replay::{ReplayBuffer, Transition};

/// Per-worker counters and the reason it stopped early, if any.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorkerReport {
    pub worker: usize,
    pub steps: u64,
    pub applied: u64,
    pub skipped: u64,
    pub episodes: u64,
    pub error: Option<String>,
}

pub struct WorkerContext<'a> {
    pub id: usize,
    pub store: &'a GlobalStore,
    pub config: &'a TrainConfig,
    pub map: Arc<MapSpec>,
    pub log: &'a TrainLog,
    pub abort: &'a AtomicBool,
    pub checkpoint_dir: Option<&'a Path>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Environment seed of a worker's `episode`-th episode.
pub fn episode_seed(seed: u64, worker: usize, episode: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(worker as u64 + 1)) ^ episode)
}

pub(crate) fn sample_action<R: Rng + ?Sized>(policy: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in policy.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    policy.len() - 1
}

pub fn view_dims(net: &NetworkConfig) -> ViewDims {
    ViewDims { height: net.input_height, width: net.input_width }
}

/// Adds the value-replay, pixel-control and reward-prediction gradients from `replay` into
/// `grad`. Terms whose sampler is still warming up are left at 0.
pub fn auxiliary_gradients<R: Rng + ?Sized>(
    params: &Parameters,
    replay: &ReplayBuffer,
    config: &TrainConfig,
    rng: &mut R,
    grad: &mut Parameters,
    losses: &mut LossComponents,
) -> Result<(), NetError> {
    let net = &params.config;
    let w = &config.losses;
    let zero = RecurrentState::zeros(net);
    if w.lambda_vr > 0.0 || w.lambda_pc > 0.0 {
        if let Ok((seq, boot)) = replay.sample_bootstrapped_sequence(config.replay.sequence, rng) {
            let mask = if w.lambda_pc > 0.0 { HeadMask::PIXEL_CONTROL } else { HeadMask::ACTOR_CRITIC };
            let mut trace = Trace::new(params, &zero, mask)?;
            for t in &seq {
                trace.push(&t.observation)?;
            }
            let boot_out = match &boot {
                Some(frame) => Some(Trace::new(params, trace.state(), mask)?.push(frame)?.clone()),
                None => None,
            };
            let rewards: Vec<f64> = seq.iter().map(|t| t.reward).collect();
            let dones: Vec<bool> = seq.iter().map(|t| t.done).collect();
            let actions: Vec<usize> = seq.iter().map(|t| t.action).collect();
            let mut parts = Vec::new();
            if w.lambda_vr > 0.0 {
                let returns = n_step_returns(&rewards, &dones, boot_out.as_ref().map(|o| o.value), w.gamma);
                let e = ValueLoss { returns }.evaluate(trace.outputs());
                losses.value_replay = e.total();
                parts.push((w.lambda_vr, e));
            }
            if w.lambda_pc > 0.0 {
                let geo = net.geometry()?;
                let regions = (geo.pc_h, geo.pc_w);
                let mut prs = Vec::with_capacity(seq.len());
                for (i, t) in seq.iter().enumerate() {
                    // The frame after a terminal step is never observed; its pseudo-reward is 0.
                    let next = if i + 1 < seq.len() { Some(&seq[i + 1].observation) } else { boot.as_ref() };
                    prs.push(match next {
                        Some(f) => pc_pseudo_reward(&t.observation, f, regions).map_err(|e| NetError::Config(e.to_string()))?,
                        None => vec![0.0; regions.0 * regions.1],
                    });
                }
                let boot_q = boot_out.as_ref().map(|o| max_q(&o.pc_q, net.actions));
                let targets = pc_targets(&prs, boot_q.as_deref(), w.gamma_pc);
                let e = PcLoss { actions, targets }.evaluate(trace.outputs());
                losses.pixel_control = e.total();
                parts.push((w.lambda_pc, e));
            }
            let merged = merge_evals(&parts);
            trace.backward(&merged.grads, 1.0, grad);
        }
    }
    if w.lambda_rp > 0.0 {
        if let Ok(batch) = replay.sample_rp_batch(config.replay.rp_batch, rng) {
            let scale = w.lambda_rp / batch.len() as f64;
            let mut total = 0.0;
            for s in &batch {
                let state = RecurrentState { recent_frames: s.frames[..2].to_vec(), ..zero.clone() };
                let mut trace = Trace::new(params, &state, HeadMask::REWARD_PREDICTION)?;
                trace.push(&s.frames[2])?;
                let e = RpLoss { step: 0, reward: s.reward }.evaluate(trace.outputs());
                total += e.total();
                trace.backward(&e.grads, scale, grad);
            }
            losses.reward_prediction = total / batch.len() as f64;
        }
    }
    Ok(())
}

struct Episode {
    env: WorldState,
    obs: Observation,
    state: RecurrentState,
    index: u64,
    events: EventCounts,
    reward: f64,
}

/// Runs rollouts and asynchronous updates until the global step budget is spent or
/// `abort` is raised.
pub fn worker_loop(ctx: WorkerContext<'_>) -> WorkerReport {
    let mut report = WorkerReport { worker: ctx.id, ..Default::default() };
    if let Err(e) = run(&ctx, &mut report) {
        report.error = Some(e);
    }
    report
}

fn run(ctx: &WorkerContext<'_>, report: &mut WorkerReport) -> Result<(), String> {
    let cfg = ctx.config;
    let net = cfg.network_config().map_err(|e| e.to_string())?;
    let role = cfg.role;
    let profile = cfg.profile();
    let budget = cfg.schedule.steps;
    let opt = cfg.optimizer;
    let options = WorldOptions { view: view_dims(&net), mode: cfg.episode_mode };
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed, ctx.id, u64::MAX));
    let mut replay = ReplayBuffer::new(cfg.replay.capacity);
    let start = |index: u64| {
        let (env, obs) = WorldState::reset(ctx.map.clone(), episode_seed(cfg.seed, ctx.id, index), options);
        Episode { env, obs, state: RecurrentState::zeros(&net), index, events: EventCounts::default(), reward: 0.0 }
    };
    let mut ep = start(0);
    let net_err = |e: NetError| format!("network: {e}");

    while !ctx.abort.load(Ordering::SeqCst) {
        let limit = ctx.store.claim_steps(cfg.schedule.rollout as u64, budget) as usize;
        if limit == 0 {
            break;
        }
        let local = ctx.store.snapshot();
        let mut trace = Trace::new(&local, &ep.state, HeadMask::ACTOR_CRITIC).map_err(net_err)?;
        let (mut actions, mut rewards, mut dones) = (Vec::new(), Vec::new(), Vec::new());
        let mut finished = false;
        for _ in 0..limit {
            let out = trace.push(&ep.obs).map_err(net_err)?;
            let a = sample_action(&out.policy, &mut rng);
            let outcome = ep.env.step(role.actions()[a], &profile).map_err(|e| format!("environment: {e}"))?;
            replay.push(Transition { observation: ep.obs.clone(), action: a, reward: outcome.reward, done: outcome.done });
            ep.events.add(&outcome.events);
            ep.reward += outcome.reward;
            actions.push(a);
            rewards.push(outcome.reward);
            dones.push(outcome.done);
            ep.obs = outcome.observation;
            if outcome.done {
                finished = true;
                break;
            }
        }
        let n = actions.len();
        if n < limit {
            ctx.store.release_steps((limit - n) as u64);
        }
        let bootstrap = if finished {
            None
        } else {
            let mut next = Trace::new(&local, trace.state(), HeadMask::ACTOR_CRITIC).map_err(net_err)?;
            Some(next.push(&ep.obs).map_err(net_err)?.value)
        };
        let returns = n_step_returns(&rewards, &dones, bootstrap, cfg.losses.gamma);
        let advantages = returns.iter().zip(trace.outputs()).map(|(r, o)| r - o.value).collect();
        let pi = PolicyLoss { actions, advantages, entropy_beta: cfg.losses.entropy_beta }.evaluate(trace.outputs());
        let v = ValueLoss { returns }.evaluate(trace.outputs());
        let mut losses = LossComponents { policy: pi.total(), value: v.total(), ..Default::default() };
        let eval = merge_evals(&[(1.0, pi), (1.0, v)]);
        let mut grad = local.zeros_like();
        trace.backward(&eval.grads, 1.0, &mut grad);
        let next_state = trace.state().clone();
        drop(trace);
        auxiliary_gradients(&local, &replay, cfg, &mut rng, &mut grad, &mut losses).map_err(net_err)?;

        let before = ctx.store.add_steps(n as u64);
        report.steps += n as u64;
        if opt.clip_norm > 0.0 {
            clip_global_norm(&mut grad, opt.clip_norm);
        }
        let lr = if opt.anneal && budget > 0 {
            opt.learning_rate * (1.0 - before as f64 / budget as f64).max(0.0)
        } else {
            opt.learning_rate
        };
        let finite = [losses.policy, losses.value, losses.value_replay, losses.reward_prediction, losses.pixel_control]
            .iter()
            .all(|v| v.is_finite());
        if finite && ctx.store.apply(&grad, lr, opt.decay, opt.epsilon) {
            report.applied += 1;
        } else {
            // apply() counts its own rejections.
            if !finite {
                ctx.store.record_skip();
            }
            report.skipped += 1;
        }

        let interval = cfg.schedule.checkpoint_interval;
        if let (Some(dir), true) = (ctx.checkpoint_dir, interval > 0) {
            let after = before + n as u64;
            if before / interval != after / interval {
                let path = dir.join(format!("step_{:09}.ckpt", after / interval * interval));
                if let Err(e) = save_checkpoint(&path, &ctx.store.snapshot()) {
                    ctx.abort.store(true, Ordering::SeqCst);
                    return Err(format!("checkpoint {}: {e}", path.display()));
                }
            }
        }

        if finished {
            ctx.log
                .record(|| ctx.store.steps(), ctx.id, ep.index, &ep.events, ep.reward, losses)
                .map_err(|e| {
                    ctx.abort.store(true, Ordering::SeqCst);
                    format!("training log: {e}")
                })?;
            report.episodes += 1;
            ep = start(ep.index + 1);
        } else {
            ep.state = next_state;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_follows_cumulative_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0; 3];
        for _ in 0..30_000 {
            counts[sample_action(&[0.2, 0.0, 0.8], &mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 30_000.0 - 0.2).abs() < 0.01);
    }

    #[test]
    fn episode_seeds_differ() {
        assert_ne!(episode_seed(1, 0, 0), episode_seed(1, 1, 0));
        assert_ne!(episode_seed(1, 0, 0), episode_seed(1, 0, 1));
        assert_eq!(episode_seed(5, 2, 3), episode_seed(5, 2, 3));
    }
}
