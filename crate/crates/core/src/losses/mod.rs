//! Actor-critic and auxiliary-task losses, the pixel-change pseudo-reward and the
//! combined objective.
//!
//! The scalar functions here operate on plain sequences. The [`RolloutLoss`]
//! implementations in [`objectives`] wrap them for use with the network's backward pass.

mod objectives;

pub use objectives::{merge_evals, PcLoss, PolicyLoss, RpLoss, ValueLoss};

use serde::{Deserialize, Serialize};

use crate::minidoom::Observation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("non-finite log-probability at step {0}")]
    NonFiniteLogProb(usize),
    #[error("non-finite loss component {0}")]
    NonFinite(&'static str),
    #[error("frame {frame_h}x{frame_w} does not divide into {regions_h}x{regions_w} regions")]
    Indivisible { frame_h: usize, frame_w: usize, regions_h: usize, regions_w: usize },
    #[error("frames differ in shape")]
    FrameMismatch,
    #[error("invalid loss weights: {0}")]
    Weights(String),
}

/// Discount factors and auxiliary-loss coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub gamma: f64,
    pub gamma_pc: f64,
    pub lambda_vr: f64,
    pub lambda_rp: f64,
    pub lambda_pc: f64,
    /// Entropy bonus coefficient; 0 gives the bare policy-gradient loss.
    pub entropy_beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { gamma: 0.99, gamma_pc: 0.9, lambda_vr: 1.0, lambda_rp: 1.0, lambda_pc: 0.05, entropy_beta: 0.01 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        for (name, g) in [("gamma", self.gamma), ("gamma_pc", self.gamma_pc)] {
            if !(0.0..=1.0).contains(&g) {
                return Err(LossError::Weights(format!("{name} = {g} outside [0, 1]")));
            }
        }
        for (name, l) in [
            ("lambda_vr", self.lambda_vr),
            ("lambda_rp", self.lambda_rp),
            ("lambda_pc", self.lambda_pc),
            ("entropy_beta", self.entropy_beta),
        ] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(LossError::Weights(format!("{name} = {l} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Consecutive steps of experience. `bootstrap` is V of the state after the last step,
/// present iff the last step is non-terminal.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub frames: Vec<Observation>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap: Option<f64>,
}

impl Rollout {
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        n_step_returns(&self.rewards, &self.dones, self.bootstrap, gamma)
    }
}

/// `R_t = r_t + gamma * R_{t+1}`, seeded with the bootstrap value; a done flag at step t
/// cuts the recursion so `R_t = r_t`.
pub fn n_step_returns(rewards: &[f64], dones: &[bool], bootstrap: Option<f64>, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap.unwrap_or(0.0);
    for t in (0..rewards.len()).rev() {
        if dones.get(t).copied().unwrap_or(false) {
            acc = 0.0;
        }
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// `sum_t -(R_t - V(s_t)) log pi(a_t|s_t)`; the advantage is a constant.
pub fn policy_loss(returns: &[f64], values: &[f64], log_probs: &[f64]) -> Result<f64, LossError> {
    let mut total = 0.0;
    for (t, ((r, v), lp)) in returns.iter().zip(values).zip(log_probs).enumerate() {
        if !lp.is_finite() {
            return Err(LossError::NonFiniteLogProb(t));
        }
        total += -(r - v) * lp;
    }
    Ok(total)
}

/// Policy loss minus `beta` times the summed policy entropy.
pub fn policy_loss_with_entropy(
    returns: &[f64],
    values: &[f64],
    log_probs: &[f64],
    entropies: &[f64],
    beta: f64,
) -> Result<f64, LossError> {
    Ok(policy_loss(returns, values, log_probs)? - beta * entropies.iter().sum::<f64>())
}

/// `sum_t 1/2 (R_t - V(s_t))^2`.
pub fn value_loss(returns: &[f64], values: &[f64]) -> f64 {
    returns.iter().zip(values).map(|(r, v)| 0.5 * (r - v) * (r - v)).sum()
}

/// Value replay: the TD loss on replayed data with fresh value estimates.
pub fn vr_loss(returns: &[f64], values: &[f64]) -> f64 {
    value_loss(returns, values)
}

/// Reward-sign class. Index order matches the reward-prediction logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RewardClass {
    Zero = 0,
    Positive = 1,
    Negative = 2,
}

impl RewardClass {
    pub const ALL: [RewardClass; 3] = [RewardClass::Zero, RewardClass::Positive, RewardClass::Negative];

    pub fn of(reward: f64) -> RewardClass {
        if reward == 0.0 {
            RewardClass::Zero
        } else if reward > 0.0 {
            RewardClass::Positive
        } else {
            RewardClass::Negative
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardClass::Zero => "zero",
            RewardClass::Positive => "positive",
            RewardClass::Negative => "negative",
        }
    }
}

pub(crate) fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Cross-entropy of softmax(logits) against the sign class of `reward`.
pub fn rp_loss(logits: &[f64; 3], reward: f64) -> f64 {
    -log_softmax(logits)[RewardClass::of(reward).index()]
}

/// Per-region mean absolute pixel difference, averaged over channels. Row-major `regions.0 x regions.1`.
pub fn pc_pseudo_reward(
    frame_t: &Observation,
    frame_t1: &Observation,
    regions: (usize, usize),
) -> Result<Vec<f64>, LossError> {
    let (h, w) = (frame_t.height, frame_t.width);
    if frame_t1.height != h || frame_t1.width != w {
        return Err(LossError::FrameMismatch);
    }
    let (rh, rw) = regions;
    if rh == 0 || rw == 0 || h % rh != 0 || w % rw != 0 {
        return Err(LossError::Indivisible { frame_h: h, frame_w: w, regions_h: rh, regions_w: rw });
    }
    let (ch, cw) = (h / rh, w / rw);
    let (a, b) = (frame_t.data(), frame_t1.data());
    let mut out = vec![0.0; rh * rw];
    for row in 0..h {
        for col in 0..w {
            let i = (row * w + col) * 3;
            let d: f64 = (0..3).map(|k| (a[i + k] as f64 - b[i + k] as f64).abs()).sum();
            out[(row / ch) * rw + col / cw] += d;
        }
    }
    let norm = (ch * cw * 3) as f64;
    out.iter_mut().for_each(|v| *v /= norm);
    Ok(out)
}

/// n-step Q-learning targets per region: `pr_t + gamma pr_{t+1} + ... + gamma^k max_a Q(s_n)`.
pub fn pc_targets(pseudo_rewards: &[Vec<f64>], bootstrap_max_q: Option<&[f64]>, gamma_pc: f64) -> Vec<Vec<f64>> {
    let Some(first) = pseudo_rewards.first() else { return Vec::new() };
    let mut acc: Vec<f64> = match bootstrap_max_q {
        Some(q) => q.to_vec(),
        None => vec![0.0; first.len()],
    };
    let mut out = vec![Vec::new(); pseudo_rewards.len()];
    for t in (0..pseudo_rewards.len()).rev() {
        for (a, pr) in acc.iter_mut().zip(&pseudo_rewards[t]) {
            *a = pr + gamma_pc * *a;
        }
        out[t] = acc.clone();
    }
    out
}

/// Q value of `action` in every region of a `regions x actions` map.
pub fn q_for_action(pc_q: &[f64], action: usize, actions: usize) -> Vec<f64> {
    pc_q.chunks_exact(actions).map(|cell| cell[action]).collect()
}

pub fn max_q(pc_q: &[f64], actions: usize) -> Vec<f64> {
    pc_q.chunks_exact(actions).map(|cell| cell.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
}

/// `sum_t sum_region 1/2 (target - Q(region, a_t))^2`.
pub fn pc_loss(q_taken: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    q_taken
        .iter()
        .zip(targets)
        .flat_map(|(q, y)| q.iter().zip(y).map(|(a, b)| 0.5 * (b - a) * (b - a)))
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub policy: f64,
    pub value: f64,
    pub value_replay: f64,
    pub reward_prediction: f64,
    pub pixel_control: f64,
}

/// `L = L_pi + L_V + lambda_VR L_VR + lambda_RP L_RP + lambda_PC L_PC`.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> Result<f64, LossError> {
    for (name, v) in [
        ("policy", c.policy),
        ("value", c.value),
        ("value_replay", c.value_replay),
        ("reward_prediction", c.reward_prediction),
        ("pixel_control", c.pixel_control),
    ] {
        if !v.is_finite() {
            return Err(LossError::NonFinite(name));
        }
    }
    Ok(c.policy
        + c.value
        + w.lambda_vr * c.value_replay
        + w.lambda_rp * c.reward_prediction
        + w.lambda_pc * c.pixel_control)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn returns_examples() {
        assert_eq!(n_step_returns(&[0.0, 0.0, 1.0], &[false, false, true], None, 1.0), vec![1.0, 1.0, 1.0]);
        assert_eq!(n_step_returns(&[1.0], &[false], Some(2.0), 0.99), vec![1.0 + 0.99 * 2.0]);
        assert_eq!(n_step_returns(&[0.0; 4], &[false, false, false, true], None, 0.9), vec![0.0; 4]);
    }

    #[test]
    fn done_cuts_recursion() {
        let r = n_step_returns(&[1.0, 2.0, 3.0], &[false, true, false], Some(10.0), 0.5);
        assert_eq!(r, vec![1.0 + 0.5 * 2.0, 2.0, 3.0 + 5.0]);
    }

    #[test]
    fn policy_loss_examples() {
        assert_eq!(policy_loss(&[0.3, -1.0], &[0.3, -1.0], &[-0.5, -2.0]).unwrap(), 0.0);
        assert_eq!(policy_loss(&[1.0], &[0.0], &[0.0]).unwrap(), 0.0);
        let l = policy_loss(&[1.0], &[0.0], &[0.5f64.ln()]).unwrap();
        assert!((l - 0.693_147_180_559_945_3).abs() < 1e-12);
        assert_eq!(policy_loss(&[1.0], &[0.0], &[f64::NEG_INFINITY]), Err(LossError::NonFiniteLogProb(0)));
        let with = policy_loss_with_entropy(&[1.0], &[0.0], &[0.0], &[2.0], 0.01).unwrap();
        assert!((with - -0.02).abs() < 1e-15);
    }

    #[test]
    fn value_loss_examples() {
        assert_eq!(value_loss(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(value_loss(&[1.0], &[0.0]), 0.5);
        assert_eq!(value_loss(&[2.0, 0.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn rp_loss_examples() {
        assert!(rp_loss(&[0.0, 1000.0, -1000.0], 0.5) < 1e-12);
        assert!((rp_loss(&[0.0, 0.0, 0.0], 0.3) - 3f64.ln()).abs() < 1e-12);
        assert!((rp_loss(&[0.0, 0.0, 0.0], 0.0) - 1.098_612_288_668_109_8).abs() < 1e-12);
        assert_eq!(RewardClass::of(-0.02), RewardClass::Negative);
        assert_eq!(RewardClass::of(0.0), RewardClass::Zero);
        assert_eq!(RewardClass::of(-0.0), RewardClass::Zero);
    }

    fn frame(h: usize, w: usize, v: f32) -> Observation {
        Observation::new(h, w, vec![v; h * w * 3])
    }

    #[test]
    fn pseudo_reward_examples() {
        let f = frame(6, 6, 0.3);
        assert_eq!(pc_pseudo_reward(&f, &f, (3, 3)).unwrap(), vec![0.0; 9]);
        assert_eq!(pc_pseudo_reward(&frame(6, 6, 0.0), &frame(6, 6, 1.0), (3, 2)).unwrap(), vec![1.0; 6]);
        // Change only the top-left 2x2 region by 0.5.
        let a = frame(4, 4, 0.2);
        let mut data = a.data().to_vec();
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for k in 0..3 {
                data[(r * 4 + c) * 3 + k] = 0.7;
            }
        }
        let b = Observation::new(4, 4, data);
        let pr = pc_pseudo_reward(&a, &b, (2, 2)).unwrap();
        assert!((pr[0] - 0.5).abs() < 1e-6);
        assert_eq!(&pr[1..], &[0.0, 0.0, 0.0]);
        assert!(matches!(pc_pseudo_reward(&a, &b, (3, 3)), Err(LossError::Indivisible { .. })));
    }

    #[test]
    fn pc_loss_examples() {
        let t = pc_targets(&[vec![0.0; 4]], Some(&[0.0; 4]), 0.9);
        assert_eq!(pc_loss(&[vec![0.0; 4]], &t), 0.0);
        let t = pc_targets(&[vec![1.0; 4]], Some(&[0.0; 4]), 0.9);
        assert_eq!(pc_loss(&[vec![0.0; 4]], &t), 4.0 * 0.5);
        assert_eq!(pc_loss(&[vec![0.4, 0.2]], &[vec![0.4, 0.2]]), 0.0);
        // Two steps: target_0 = pr_0 + 0.9 pr_1 + 0.81 maxQ.
        let t = pc_targets(&[vec![1.0], vec![2.0]], Some(&[10.0]), 0.9);
        assert!((t[0][0] - (1.0 + 0.9 * 2.0 + 0.81 * 10.0)).abs() < 1e-12);
        assert!((t[1][0] - (2.0 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn q_helpers() {
        let q = [1.0, 5.0, 2.0, 7.0, 0.0, 3.0];
        assert_eq!(q_for_action(&q, 1, 3), vec![5.0, 0.0]);
        assert_eq!(max_q(&q, 3), vec![5.0, 7.0]);
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&LossComponents::default(), &w).unwrap(), 0.0);
        let ones = LossComponents { policy: 1.0, value: 1.0, value_replay: 1.0, reward_prediction: 1.0, pixel_control: 1.0 };
        let unit = LossWeights { lambda_vr: 1.0, lambda_rp: 1.0, lambda_pc: 1.0, ..w };
        assert_eq!(total_loss(&ones, &unit).unwrap(), 5.0);
        let c = LossComponents { policy: 0.5, value: 0.2, value_replay: 0.1, reward_prediction: 0.3, pixel_control: 0.4 };
        let lw = LossWeights { lambda_vr: 1.0, lambda_rp: 0.5, lambda_pc: 0.05, ..w };
        assert!((total_loss(&c, &lw).unwrap() - 0.97).abs() < 1e-12);
        let bad = LossComponents { pixel_control: f64::NAN, ..c };
        assert_eq!(total_loss(&bad, &lw), Err(LossError::NonFinite("pixel_control")));
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights { gamma: 1.5, ..Default::default() }.validate().is_err());
        assert!(LossWeights { lambda_pc: -0.1, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn vr_equals_value(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 0..30)) {
            let (r, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert_eq!(value_loss(&r, &v).to_bits(), vr_loss(&r, &v).to_bits());
        }

        #[test]
        fn rp_sign_invariance(l in prop::array::uniform3(-5.0f64..5.0), r in -2.0f64..2.0) {
            prop_assume!(r != 0.0);
            prop_assert_eq!(rp_loss(&l, r), rp_loss(&l, 1000.0 * r));
        }

        #[test]
        fn pseudo_reward_symmetric(a in prop::collection::vec(0.0f32..1.0, 48), b in prop::collection::vec(0.0f32..1.0, 48)) {
            let (fa, fb) = (Observation::new(4, 4, a), Observation::new(4, 4, b));
            prop_assert_eq!(pc_pseudo_reward(&fa, &fb, (2, 2)).unwrap(), pc_pseudo_reward(&fb, &fa, (2, 2)).unwrap());
            prop_assert_eq!(pc_pseudo_reward(&fa, &fa, (2, 2)).unwrap(), vec![0.0; 4]);
        }
    }
}
