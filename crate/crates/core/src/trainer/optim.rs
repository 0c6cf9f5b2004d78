use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::netcore::{Parameters, Tensor};

/// Squared-gradient moving averages shared by every worker, plus update counters.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedOptimizerState {
    pub g: Parameters,
    pub steps: u64,
    pub skipped: u64,
}

impl SharedOptimizerState {
    pub fn new(like: &Parameters) -> SharedOptimizerState {
        SharedOptimizerState { g: like.zeros_like(), steps: 0, skipped: 0 }
    }
}

fn rmsprop_block(p: &mut [f64], g: &mut [f64], grad: &[f64], lr: f64, decay: f64, eps: f64) {
    for ((p, g), &d) in p.iter_mut().zip(g.iter_mut()).zip(grad) {
        *g = decay * *g + (1.0 - decay) * d * d;
        *p -= lr * d / (*g + eps).sqrt();
    }
}

/// `g <- decay g + (1 - decay) grad^2; p <- p - lr grad / sqrt(g + eps)`. A non-finite
/// gradient leaves everything untouched, bumps `skipped` and returns false.
pub fn rmsprop_apply(
    params: &mut Parameters,
    grads: &Parameters,
    state: &mut SharedOptimizerState,
    lr: f64,
    decay: f64,
    eps: f64,
) -> bool {
    assert!(eps > 0.0, "rmsprop epsilon must be positive");
    if !grads.is_finite() {
        state.skipped += 1;
        return false;
    }
    for ((p, g), d) in params.tensors_mut().iter_mut().zip(state.g.tensors_mut()).zip(grads.tensors()) {
        rmsprop_block(&mut p.data, &mut g.data, &d.data, lr, decay, eps);
    }
    state.steps += 1;
    true
}

struct Block {
    param: Tensor,
    g: Vec<f64>,
}

/// Global parameters and optimizer statistics, one lock per parameter array. Readers may
/// see different arrays at different versions; each apply is atomic per array.
pub struct GlobalStore {
    config: crate::netcore::NetworkConfig,
    blocks: Vec<Mutex<Block>>,
    steps: AtomicU64,
    /// Steps reserved by workers for rollouts in progress or done.
    claimed: AtomicU64,
    applied: AtomicU64,
    skipped: AtomicU64,
}

impl GlobalStore {
    pub fn new(params: Parameters) -> GlobalStore {
        let config = params.config;
        let blocks = params
            .tensors()
            .iter()
            .map(|t| Mutex::new(Block { g: vec![0.0; t.data.len()], param: t.clone() }))
            .collect();
        GlobalStore {
            config,
            blocks,
            steps: AtomicU64::new(0),
            claimed: AtomicU64::new(0),
            applied: AtomicU64::new(0),
            skipped: AtomicU64::new(0),
        }
    }

    pub fn snapshot(&self) -> Parameters {
        let mut p = Parameters::zeros(&self.config).expect("store config was validated");
        for (dst, b) in p.tensors_mut().iter_mut().zip(&self.blocks) {
            dst.data.copy_from_slice(&b.lock().unwrap().param.data);
        }
        p
    }

    pub fn optimizer_state(&self) -> SharedOptimizerState {
        let mut g = Parameters::zeros(&self.config).expect("store config was validated");
        for (dst, b) in g.tensors_mut().iter_mut().zip(&self.blocks) {
            dst.data.copy_from_slice(&b.lock().unwrap().g);
        }
        SharedOptimizerState { g, steps: self.applied(), skipped: self.skipped() }
    }

    /// Shared-RMSProp step; false (and counted) when the gradient is not finite.
    pub fn apply(&self, grads: &Parameters, lr: f64, decay: f64, eps: f64) -> bool {
        if !grads.is_finite() {
            self.skipped.fetch_add(1, Ordering::SeqCst);
            return false;
        }
        for (b, d) in self.blocks.iter().zip(grads.tensors()) {
            let mut b = b.lock().unwrap();
            let Block { param, g } = &mut *b;
            rmsprop_block(&mut param.data, g, &d.data, lr, decay, eps);
        }
        self.applied.fetch_add(1, Ordering::SeqCst);
        true
    }

    pub fn record_skip(&self) {
        self.skipped.fetch_add(1, Ordering::SeqCst);
    }

    /// Adds `n` environment steps; returns the counter value before the addition.
    pub fn add_steps(&self, n: u64) -> u64 {
        self.steps.fetch_add(n, Ordering::SeqCst)
    }

    /// Reserves up to `want` steps of a `budget`; returns how many were granted (0 once spent).
    pub fn claim_steps(&self, want: u64, budget: u64) -> u64 {
        let mut cur = self.claimed.load(Ordering::SeqCst);
        loop {
            let take = want.min(budget.saturating_sub(cur));
            if take == 0 {
                return 0;
            }
            match self.claimed.compare_exchange(cur, cur + take, Ordering::SeqCst, Ordering::SeqCst) {
                Ok(_) => return take,
                Err(now) => cur = now,
            }
        }
    }

    /// Returns reserved steps a rollout did not use.
    pub fn release_steps(&self, n: u64) {
        self.claimed.fetch_sub(n, Ordering::SeqCst);
    }

    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::SeqCst)
    }

    pub fn applied(&self) -> u64 {
        self.applied.load(Ordering::SeqCst)
    }

    pub fn skipped(&self) -> u64 {
        self.skipped.load(Ordering::SeqCst)
    }
}

/// Scales `grads` so its global L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Parameters, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm.is_finite() && norm > max_norm && max_norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claims_never_exceed_budget() {
        let store = GlobalStore::new(Parameters::init(&crate::netcore::NetworkConfig::tiny(3), 0).unwrap());
        let granted: u64 = std::thread::scope(|s| {
            let hs: Vec<_> = (0..4)
                .map(|_| {
                    s.spawn(|| {
                        let mut got = 0;
                        loop {
                            let g = store.claim_steps(7, 1000);
                            if g == 0 {
                                break got;
                            }
                            if g > 3 {
                                store.release_steps(3);
                                got += g - 3;
                            } else {
                                got += g;
                            }
                        }
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).sum()
        });
        assert_eq!(granted, 1000);
    }
    use crate::netcore::{NetworkConfig, ParamId};

    fn scalar_case() -> (Parameters, Parameters, SharedOptimizerState) {
        let c = NetworkConfig::tiny(3);
        let p = Parameters::zeros(&c).unwrap();
        let mut grad = p.zeros_like();
        grad.get_mut(ParamId::ValueB)[0] = 1.0;
        let s = SharedOptimizerState::new(&p);
        (p, grad, s)
    }

    #[test]
    fn scalar_update_by_hand() {
        let (mut p, grad, mut s) = scalar_case();
        assert!(rmsprop_apply(&mut p, &grad, &mut s, 0.1, 0.99, 0.01));
        assert!((s.g.get(ParamId::ValueB)[0] - 0.01).abs() < 1e-15);
        let delta = p.get(ParamId::ValueB)[0];
        assert!((delta - -0.1 / 0.02f64.sqrt()).abs() < 1e-12);
        assert!((delta - -0.7071).abs() < 1e-4);
        // Everything else saw a zero gradient.
        assert_eq!(p.max_abs(), delta.abs());
    }

    #[test]
    fn zero_gradient_only_decays() {
        let c = NetworkConfig::tiny(3);
        let mut p = Parameters::init(&c, 4).unwrap();
        let before = p.clone();
        let mut s = SharedOptimizerState::new(&p);
        s.g.tensors_mut().iter_mut().for_each(|t| t.data.iter_mut().for_each(|v| *v = 2.0));
        let zero = p.zeros_like();
        rmsprop_apply(&mut p, &zero, &mut s, 0.1, 0.9, 0.01);
        assert_eq!(p, before);
        assert!(s.g.tensors().iter().all(|t| t.data.iter().all(|&v| (v - 1.8).abs() < 1e-15)));
    }

    #[test]
    fn state_dependence() {
        let (mut p, grad, mut s) = scalar_case();
        rmsprop_apply(&mut p, &grad, &mut s, 0.1, 0.99, 0.01);
        let first = p.get(ParamId::ValueB)[0];
        rmsprop_apply(&mut p, &grad, &mut s, 0.1, 0.99, 0.01);
        let second = p.get(ParamId::ValueB)[0] - first;
        assert_ne!(first, second);
        assert!(second.abs() < first.abs());
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let (mut p, mut grad, mut s) = scalar_case();
        grad.get_mut(ParamId::FcW)[0] = f64::NAN;
        let before = p.clone();
        assert!(!rmsprop_apply(&mut p, &grad, &mut s, 0.1, 0.99, 0.01));
        assert_eq!((p, s.skipped, s.steps), (before, 1, 0));
    }

    #[test]
    fn store_matches_plain_apply() {
        let c = NetworkConfig::tiny(5);
        let p = Parameters::init(&c, 2).unwrap();
        let grad = Parameters::init(&c, 3).unwrap();
        let store = GlobalStore::new(p.clone());
        let (mut q, mut s) = (p, SharedOptimizerState::new(&grad));
        for _ in 0..3 {
            store.apply(&grad, 0.01, 0.99, 0.1);
            rmsprop_apply(&mut q, &grad, &mut s, 0.01, 0.99, 0.1);
        }
        assert_eq!(store.snapshot(), q);
        assert_eq!(store.optimizer_state(), s);
    }

    #[test]
    fn clipping() {
        let (_, mut grad, _) = scalar_case();
        grad.get_mut(ParamId::ValueB)[0] = 80.0;
        assert_eq!(clip_global_norm(&mut grad, 40.0), 80.0);
        assert_eq!(grad.get(ParamId::ValueB)[0], 40.0);
    }
}
