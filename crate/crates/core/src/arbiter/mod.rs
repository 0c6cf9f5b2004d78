//! Runtime composition of the action and navigation agents: the navigation agent's
//! reward-prediction head decides, every step, which of the two acts.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::losses::RewardClass;
use crate::minidoom::{EnvAction, Observation, RewardProfile, Role};
use crate::netcore::{load_checkpoint, CheckpointError, HeadMask, NetError, Parameters, RecurrentState, Trace};
use crate::trainer::sample_action;

#[derive(Debug, thiserror::Error)]
pub enum ArbiterError {
    #[error("non-finite reward-prediction logits {0:?}")]
    NonFiniteLogits([f64; 3]),
    #[error("{agent} agent must have {expected} actions, checkpoint has {found}")]
    ActionCount { agent: &'static str, expected: usize, found: usize },
    #[error("agents disagree on input size: action {action:?}, navigation {navigation:?}")]
    InputMismatch { action: (usize, usize), navigation: (usize, usize) },
    #[error("{0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Net(#[from] NetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentChoice {
    Action,
    Navigation,
}

impl AgentChoice {
    pub fn name(self) -> &'static str {
        match self {
            AgentChoice::Action => "action",
            AgentChoice::Navigation => "navigation",
        }
    }
}

impl fmt::Display for AgentChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which agent acts, and the predicted reward class behind the decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Routing {
    pub choice: AgentChoice,
    pub class: RewardClass,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum RoutingRule {
    /// Argmax class; positive or negative hands control to the action agent.
    #[default]
    Standard,
    /// Only a predicted negative reward hands control to the action agent.
    NegativeOnly,
    /// The action agent acts when P(zero) < threshold.
    Threshold(f64),
}

/// Argmax over (zero, positive, negative); any tie that includes zero resolves to zero,
/// a positive/negative tie to positive.
pub fn predicted_class(logits: &[f64; 3]) -> Result<RewardClass, ArbiterError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(ArbiterError::NonFiniteLogits(*logits));
    }
    let [z, p, n] = *logits;
    Ok(if z >= p && z >= n {
        RewardClass::Zero
    } else if p >= n {
        RewardClass::Positive
    } else {
        RewardClass::Negative
    })
}

pub fn route(logits: &[f64; 3]) -> Result<Routing, ArbiterError> {
    route_with(logits, RoutingRule::Standard)
}

pub fn route_with(logits: &[f64; 3], rule: RoutingRule) -> Result<Routing, ArbiterError> {
    let class = predicted_class(logits)?;
    let action = match rule {
        RoutingRule::Standard => class != RewardClass::Zero,
        RoutingRule::NegativeOnly => class == RewardClass::Negative,
        RoutingRule::Threshold(tau) => {
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
            e[0] / e.iter().sum::<f64>() < tau
        }
    };
    let choice = if action { AgentChoice::Action } else { AgentChoice::Navigation };
    Ok(Routing { choice, class })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PolicyMode {
    #[default]
    Sample,
    Greedy,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One step of a controller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: EnvAction,
    pub routing: Option<Routing>,
}

/// Anything that maps observations to actions over an episode.
pub trait Controller {
    /// Clears recurrent state and reseeds action sampling.
    fn reset(&mut self, seed: u64);
    fn act(&mut self, obs: &Observation) -> Result<Decision, ArbiterError>;
    /// Input size as (height, width).
    fn input_dims(&self) -> (usize, usize);
    /// Reward profile used to score this controller's episodes.
    fn profile(&self) -> RewardProfile;
}

/// A trained network with its recurrent state.
#[derive(Clone, Debug)]
pub struct Agent {
    pub params: Parameters,
    pub state: RecurrentState,
    pub role: Role,
}

impl Agent {
    pub fn new(params: Parameters) -> Result<Agent, ArbiterError> {
        let n = params.config.actions;
        let role = Role::from_action_count(n)
            .ok_or(ArbiterError::ActionCount { agent: "single", expected: 5, found: n })?;
        Ok(Agent { state: RecurrentState::zeros(&params.config), params, role })
    }

    pub fn reset(&mut self) {
        self.state = RecurrentState::zeros(&self.params.config);
    }

    /// Forward one frame, advancing the recurrent state; returns (policy, rp_logits).
    pub fn observe(&mut self, obs: &Observation, need_rp: bool) -> Result<(Vec<f64>, [f64; 3]), NetError> {
        let mask = if need_rp { HeadMask::REWARD_PREDICTION } else { HeadMask::ACTOR_CRITIC };
        let mut trace = Trace::new(&self.params, &self.state, mask)?;
        let out = trace.push(obs)?.clone();
        self.state = out.next_state;
        Ok((out.policy, out.rp_logits))
    }
}

fn choose(policy: &[f64], mode: PolicyMode, rng: &mut ChaCha8Rng) -> usize {
    match mode {
        PolicyMode::Greedy => argmax(policy),
        PolicyMode::Sample => sample_action(policy, rng),
    }
}

/// A single agent acting alone.
#[derive(Clone, Debug)]
pub struct SingleAgent {
    pub agent: Agent,
    pub mode: PolicyMode,
    rng: ChaCha8Rng,
}

impl SingleAgent {
    pub fn new(params: Parameters, mode: PolicyMode) -> Result<SingleAgent, ArbiterError> {
        Ok(SingleAgent { agent: Agent::new(params)?, mode, rng: ChaCha8Rng::seed_from_u64(0) })
    }
}

impl Controller for SingleAgent {
    fn reset(&mut self, seed: u64) {
        self.agent.reset();
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn act(&mut self, obs: &Observation) -> Result<Decision, ArbiterError> {
        let (policy, _) = self.agent.observe(obs, false)?;
        let a = choose(&policy, self.mode, &mut self.rng);
        Ok(Decision { action: self.agent.role.actions()[a], routing: None })
    }

    fn input_dims(&self) -> (usize, usize) {
        (self.agent.params.config.input_height, self.agent.params.config.input_width)
    }

    fn profile(&self) -> RewardProfile {
        self.agent.role.profile()
    }
}

/// The action agent (5 actions) and navigation agent (3 actions) run side by side; both
/// see every frame, and the navigation agent's reward prediction picks who acts.
#[derive(Clone, Debug)]
pub struct CombinedAgent {
    pub action: Agent,
    pub navigation: Agent,
    pub rule: RoutingRule,
    pub mode: PolicyMode,
    rng: ChaCha8Rng,
}

impl CombinedAgent {
    pub fn new(action: Parameters, navigation: Parameters, rule: RoutingRule, mode: PolicyMode) -> Result<CombinedAgent, ArbiterError> {
        let (a, n) = (&action.config, &navigation.config);
        if a.actions != Role::Action.action_count() {
            return Err(ArbiterError::ActionCount { agent: "action", expected: 5, found: a.actions });
        }
        if n.actions != Role::Navigation.action_count() {
            return Err(ArbiterError::ActionCount { agent: "navigation", expected: 3, found: n.actions });
        }
        if (a.input_height, a.input_width) != (n.input_height, n.input_width) {
            return Err(ArbiterError::InputMismatch {
                action: (a.input_height, a.input_width),
                navigation: (n.input_height, n.input_width),
            });
        }
        Ok(CombinedAgent {
            action: Agent::new(action)?,
            navigation: Agent::new(navigation)?,
            rule,
            mode,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn load(action: &Path, navigation: &Path, rule: RoutingRule, mode: PolicyMode) -> Result<CombinedAgent, ArbiterError> {
        CombinedAgent::new(load_checkpoint(action, None)?, load_checkpoint(navigation, None)?, rule, mode)
    }

    /// The last three observations seen, oldest first (blank before the episode start).
    pub fn history(&self) -> Vec<Observation> {
        let c = &self.navigation.params.config;
        let mut h = self.navigation.state.recent_frames.clone();
        while h.len() < 3 {
            h.insert(0, Observation::zeros(c.input_height, c.input_width));
        }
        h
    }

    /// Like [`Controller::act`], with the navigation agent's reward-prediction logits
    /// replaced by `rp_override` when given. Both networks still advance.
    pub fn act_with(&mut self, obs: &Observation, rp_override: Option<[f64; 3]>) -> Result<Decision, ArbiterError> {
        let (nav_policy, rp) = self.navigation.observe(obs, rp_override.is_none())?;
        let (act_policy, _) = self.action.observe(obs, false)?;
        let routing = route_with(&rp_override.unwrap_or(rp), self.rule)?;
        let action = match routing.choice {
            AgentChoice::Action => Role::Action.actions()[choose(&act_policy, self.mode, &mut self.rng)],
            AgentChoice::Navigation => Role::Navigation.actions()[choose(&nav_policy, self.mode, &mut self.rng)],
        };
        Ok(Decision { action, routing: Some(routing) })
    }
}

impl Controller for CombinedAgent {
    fn reset(&mut self, seed: u64) {
        self.action.reset();
        self.navigation.reset();
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn act(&mut self, obs: &Observation) -> Result<Decision, ArbiterError> {
        self.act_with(obs, None)
    }

    fn input_dims(&self) -> (usize, usize) {
        (self.action.params.config.input_height, self.action.params.config.input_width)
    }

    fn profile(&self) -> RewardProfile {
        RewardProfile::ACTION
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::NetworkConfig;
    use proptest::prelude::*;

    fn logits_for(p: [f64; 3]) -> [f64; 3] {
        p.map(f64::ln)
    }

    #[test]
    fn paper_examples() {
        let r = route(&logits_for([0.2, 0.5, 0.3])).unwrap();
        assert_eq!((r.choice, r.class), (AgentChoice::Action, RewardClass::Positive));
        let r = route(&logits_for([0.9, 0.05, 0.05])).unwrap();
        assert_eq!((r.choice, r.class), (AgentChoice::Navigation, RewardClass::Zero));
        assert_eq!(route(&[0.7, 0.7, 0.7]).unwrap().choice, AgentChoice::Navigation);
        assert_eq!(route(&[1.0, 1.0, 0.0]).unwrap().choice, AgentChoice::Navigation);
        assert_eq!(route(&[0.0, -1.0, 0.0]).unwrap().choice, AgentChoice::Navigation);
        assert_eq!(route(&[0.0, 2.0, 2.0]).unwrap().class, RewardClass::Positive);
        assert!(route(&[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn variants() {
        let pos = logits_for([0.2, 0.5, 0.3]);
        assert_eq!(route_with(&pos, RoutingRule::NegativeOnly).unwrap().choice, AgentChoice::Navigation);
        let neg = logits_for([0.2, 0.3, 0.5]);
        assert_eq!(route_with(&neg, RoutingRule::NegativeOnly).unwrap().choice, AgentChoice::Action);
        let zero = logits_for([0.4, 0.35, 0.25]);
        assert_eq!(route_with(&zero, RoutingRule::Threshold(0.5)).unwrap().choice, AgentChoice::Action);
        assert_eq!(route_with(&zero, RoutingRule::Threshold(0.3)).unwrap().choice, AgentChoice::Navigation);
    }

    fn combined(rule: RoutingRule) -> CombinedAgent {
        let a = Parameters::init(&NetworkConfig::tiny(5), 1).unwrap();
        let n = Parameters::init(&NetworkConfig::tiny(3), 2).unwrap();
        CombinedAgent::new(a, n, rule, PolicyMode::Sample).unwrap()
    }

    #[test]
    fn stubbed_zero_uses_navigation_actions() {
        let mut c = combined(RoutingRule::Standard);
        c.reset(3);
        let obs = Observation::new(8, 8, vec![0.5; 192]);
        for _ in 0..200 {
            let d = c.act_with(&obs, Some([2.0, 0.0, 0.0])).unwrap();
            assert!(Role::Navigation.actions().contains(&d.action));
            assert_eq!(d.routing.unwrap().choice, AgentChoice::Navigation);
        }
    }

    #[test]
    fn stubbed_negative_samples_all_five() {
        let mut c = combined(RoutingRule::Standard);
        c.reset(4);
        let obs = Observation::new(8, 8, vec![0.5; 192]);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..400 {
            let d = c.act_with(&obs, Some([0.0, 0.0, 3.0])).unwrap();
            assert_eq!(d.routing.unwrap().choice, AgentChoice::Action);
            seen.insert(d.action);
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn alternating_stub_alternates() {
        let mut c = combined(RoutingRule::Standard);
        c.reset(5);
        let obs = Observation::new(8, 8, vec![0.1; 192]);
        for i in 0..20 {
            let stub = if i % 2 == 0 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let expect = if i % 2 == 0 { AgentChoice::Navigation } else { AgentChoice::Action };
            assert_eq!(c.act_with(&obs, Some(stub)).unwrap().routing.unwrap().choice, expect);
        }
    }

    #[test]
    fn states_advance_regardless_of_choice() {
        let obs: Vec<Observation> = (0..6).map(|i| Observation::new(8, 8, vec![0.1 * i as f32; 192])).collect();
        let mut nav_only = combined(RoutingRule::Standard);
        let mut act_only = combined(RoutingRule::Standard);
        nav_only.reset(0);
        act_only.reset(0);
        for o in &obs {
            nav_only.act_with(o, Some([1.0, 0.0, 0.0])).unwrap();
            act_only.act_with(o, Some([0.0, 0.0, 1.0])).unwrap();
        }
        assert_eq!(nav_only.action.state, act_only.action.state);
        assert_eq!(nav_only.navigation.state, act_only.navigation.state);
        let mut solo = Agent::new(nav_only.navigation.params.clone()).unwrap();
        for o in &obs {
            solo.observe(o, false).unwrap();
        }
        assert_eq!(solo.state, nav_only.navigation.state);
    }

    #[test]
    fn refuses_wrong_action_counts() {
        let five = Parameters::init(&NetworkConfig::tiny(5), 1).unwrap();
        let three = Parameters::init(&NetworkConfig::tiny(3), 1).unwrap();
        let e = CombinedAgent::new(five.clone(), five.clone(), RoutingRule::Standard, PolicyMode::Sample).unwrap_err();
        assert!(matches!(e, ArbiterError::ActionCount { agent: "navigation", found: 5, .. }));
        assert!(CombinedAgent::new(three.clone(), three, RoutingRule::Standard, PolicyMode::Sample).is_err());
        let small_nav = Parameters::init(&NetworkConfig::small(3), 1).unwrap();
        assert!(matches!(
            CombinedAgent::new(five, small_nav, RoutingRule::Standard, PolicyMode::Sample),
            Err(ArbiterError::InputMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn scale_shift_invariance(l in prop::array::uniform3(-5.0f64..5.0), c in 0.1f64..10.0, d in -10.0f64..10.0) {
            let moved = l.map(|v| c * v + d);
            prop_assert_eq!(route(&l).unwrap(), route(&moved).unwrap());
        }

        #[test]
        fn rule_holds_on_fuzzed_logits(l in prop::array::uniform3(-20.0f64..20.0)) {
            let r = route(&l).unwrap();
            let zero_wins = l[0] >= l[1] && l[0] >= l[2];
            prop_assert_eq!(r.choice == AgentChoice::Navigation, zero_wins);
        }
    }
}
