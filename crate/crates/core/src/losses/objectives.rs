use crate::netcore::{ForwardOutput, Head, LossEval, OutputGrad, RolloutLoss};

use super::{log_softmax, RewardClass};

fn zero_grad(o: &ForwardOutput) -> OutputGrad {
    OutputGrad { policy_logits: vec![0.0; o.policy.len()], value: 0.0, rp_logits: [0.0; 3], pc_q: vec![0.0; o.pc_q.len()] }
}

/// Policy-gradient loss with advantages held fixed, plus the optional entropy bonus.
#[derive(Clone, Debug)]
pub struct PolicyLoss {
    pub actions: Vec<usize>,
    pub advantages: Vec<f64>,
    pub entropy_beta: f64,
}

impl RolloutLoss for PolicyLoss {
    fn evaluate(&self, outputs: &[ForwardOutput]) -> LossEval {
        let mut total = 0.0;
        let grads = outputs
            .iter()
            .zip(self.actions.iter().zip(&self.advantages))
            .map(|(o, (&a, &adv))| {
                let logp = log_softmax(&o.policy_logits);
                let entropy: f64 = -o.policy.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
                total += -adv * logp[a] - self.entropy_beta * entropy;
                let mut g = zero_grad(o);
                for (j, gj) in g.policy_logits.iter_mut().enumerate() {
                    let onehot = if j == a { 1.0 } else { 0.0 };
                    // d(-adv log p_a)/dz_j and d(-beta H)/dz_j = beta p_j (log p_j + H)
                    *gj = -adv * (onehot - o.policy[j]) + self.entropy_beta * o.policy[j] * (logp[j] + entropy);
                }
                g
            })
            .collect();
        LossEval { terms: vec![(Head::Policy, total)], grads }
    }
}

/// `sum_t 1/2 (R_t - V_t)^2` against fixed returns. Serves both the on-policy value loss
/// and value replay.
#[derive(Clone, Debug)]
pub struct ValueLoss {
    pub returns: Vec<f64>,
}

impl RolloutLoss for ValueLoss {
    fn evaluate(&self, outputs: &[ForwardOutput]) -> LossEval {
        let mut total = 0.0;
        let grads = outputs
            .iter()
            .zip(&self.returns)
            .map(|(o, &r)| {
                total += 0.5 * (r - o.value) * (r - o.value);
                let mut g = zero_grad(o);
                g.value = o.value - r;
                g
            })
            .collect();
        LossEval { terms: vec![(Head::Value, total)], grads }
    }
}

/// Reward-sign cross-entropy on the logits of one step (the endpoint of a 3-frame window).
#[derive(Clone, Debug)]
pub struct RpLoss {
    pub step: usize,
    pub reward: f64,
}

impl RolloutLoss for RpLoss {
    fn evaluate(&self, outputs: &[ForwardOutput]) -> LossEval {
        let mut grads: Vec<OutputGrad> = outputs.iter().map(zero_grad).collect();
        let o = &outputs[self.step];
        let class = RewardClass::of(self.reward).index();
        let logp = log_softmax(&o.rp_logits);
        for (k, g) in grads[self.step].rp_logits.iter_mut().enumerate() {
            *g = logp[k].exp() - if k == class { 1.0 } else { 0.0 };
        }
        LossEval { terms: vec![(Head::RewardPrediction, -logp[class])], grads }
    }
}

/// Pixel-control Q regression of the taken action's Q map onto fixed n-step targets.
#[derive(Clone, Debug)]
pub struct PcLoss {
    pub actions: Vec<usize>,
    pub targets: Vec<Vec<f64>>,
}

impl RolloutLoss for PcLoss {
    fn evaluate(&self, outputs: &[ForwardOutput]) -> LossEval {
        let mut total = 0.0;
        let grads = outputs
            .iter()
            .zip(self.actions.iter().zip(&self.targets))
            .map(|(o, (&a, targets))| {
                let mut g = zero_grad(o);
                let n = o.policy.len();
                for (region, &y) in targets.iter().enumerate() {
                    let q = o.pc_q[region * n + a];
                    total += 0.5 * (y - q) * (y - q);
                    g.pc_q[region * n + a] = q - y;
                }
                g
            })
            .collect();
        LossEval { terms: vec![(Head::PixelControl, total)], grads }
    }
}

/// Sums losses over the same rollout, each with its coefficient.
pub fn merge_evals(parts: &[(f64, LossEval)]) -> LossEval {
    let mut terms = Vec::new();
    let mut grads: Vec<OutputGrad> = Vec::new();
    for (w, e) in parts {
        terms.extend(e.terms.iter().map(|&(h, v)| (h, w * v)));
        if grads.is_empty() {
            grads = e.grads.clone();
            for g in &mut grads {
                scale_grad(g, *w);
            }
            continue;
        }
        for (acc, g) in grads.iter_mut().zip(&e.grads) {
            acc.value += w * g.value;
            acc.policy_logits.iter_mut().zip(&g.policy_logits).for_each(|(a, b)| *a += w * b);
            acc.rp_logits.iter_mut().zip(&g.rp_logits).for_each(|(a, b)| *a += w * b);
            acc.pc_q.iter_mut().zip(&g.pc_q).for_each(|(a, b)| *a += w * b);
        }
    }
    LossEval { terms, grads }
}

fn scale_grad(g: &mut OutputGrad, w: f64) {
    g.value *= w;
    g.policy_logits.iter_mut().for_each(|v| *v *= w);
    g.rp_logits.iter_mut().for_each(|v| *v *= w);
    g.pc_q.iter_mut().for_each(|v| *v *= w);
}
