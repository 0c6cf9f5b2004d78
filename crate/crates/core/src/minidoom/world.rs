use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::map::{MapSpec, Pos};
use super::render::{render, Observation, ViewDims};
use super::reward::{EventCounts, RewardProfile};

pub const MAX_HEALTH: u32 = 100;
pub const MONSTER_DAMAGE: u32 = 10;
pub const MONSTER_ATTACK_COOLDOWN: u32 = 3;
pub const MONSTER_HEALTH: u32 = 1;
/// Probability that a non-adjacent monster steps toward the agent instead of a random direction.
pub const MONSTER_CHASE_PROB: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    pub fn left(self) -> Heading {
        self.right().right().right()
    }

    pub fn glyph(self) -> char {
        match self {
            Heading::North => '^',
            Heading::East => '>',
            Heading::South => 'v',
            Heading::West => '<',
        }
    }
}

fn offset(pos: Pos, (dx, dy): (isize, isize)) -> Pos {
    // Maps are wall-bordered, so interior positions never underflow.
    Pos::new(pos.x.wrapping_add_signed(dx), pos.y.wrapping_add_signed(dy))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvAction {
    Fire,
    MoveForward,
    TurnRight,
    TurnLeft,
    MoveBackward,
}

impl EnvAction {
    pub fn name(self) -> &'static str {
        match self {
            EnvAction::Fire => "FIRE",
            EnvAction::MoveForward => "MOVE_FORWARD",
            EnvAction::TurnRight => "TURN_RIGHT",
            EnvAction::TurnLeft => "TURN_LEFT",
            EnvAction::MoveBackward => "MOVE_BACKWARD",
        }
    }
}

/// Which of the two sub-agents a network, profile or action set belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Action,
    Navigation,
}

const ACTION_SET: [EnvAction; 5] = [
    EnvAction::Fire,
    EnvAction::MoveForward,
    EnvAction::TurnRight,
    EnvAction::TurnLeft,
    EnvAction::MoveBackward,
];
const NAVIGATION_SET: [EnvAction; 3] =
    [EnvAction::MoveForward, EnvAction::TurnRight, EnvAction::TurnLeft];

impl Role {
    /// Legal actions, in the order used as policy output indices.
    pub fn actions(self) -> &'static [EnvAction] {
        match self {
            Role::Action => &ACTION_SET,
            Role::Navigation => &NAVIGATION_SET,
        }
    }

    pub fn action_count(self) -> usize {
        self.actions().len()
    }

    pub fn profile(self) -> RewardProfile {
        match self {
            Role::Action => RewardProfile::ACTION,
            Role::Navigation => RewardProfile::NAVIGATION,
        }
    }

    pub fn from_action_count(n: usize) -> Option<Role> {
        match n {
            5 => Some(Role::Action),
            3 => Some(Role::Navigation),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Action => "action",
            Role::Navigation => "navigation",
        }
    }
}

/// How an episode ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpisodeMode {
    /// Terminal on the first death or at the step limit.
    #[default]
    UntilDeath,
    /// Runs to the step limit; deaths respawn the agent at a seeded spawn point.
    Timed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monster {
    pub pos: Pos,
    pub health: u32,
    pub cooldown: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorldOptions {
    pub view: ViewDims,
    pub mode: EpisodeMode,
}

impl Default for WorldOptions {
    fn default() -> Self {
        WorldOptions { view: ViewDims::PAPER, mode: EpisodeMode::UntilDeath }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub events: EventCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("step called on a terminal state (tick {tick})")]
    Terminal { tick: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub map: Arc<MapSpec>,
    pub agent: Pos,
    pub heading: Heading,
    pub health: u32,
    pub monsters: Vec<Monster>,
    /// Remaining objects, kept sorted.
    pub objects: Vec<Pos>,
    pub tick: u32,
    pub options: WorldOptions,
    rng: ChaCha8Rng,
}

impl WorldState {
    pub fn reset(map: Arc<MapSpec>, seed: u64, options: WorldOptions) -> (WorldState, Observation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = map.agent_spawns[rng.random_range(0..map.agent_spawns.len())];
        let heading = Heading::ALL[rng.random_range(0..4)];
        let monsters = map
            .monster_spawns
            .iter()
            .filter(|&&p| p != agent)
            .map(|&pos| Monster { pos, health: MONSTER_HEALTH, cooldown: 0 })
            .collect();
        let mut objects: Vec<Pos> = map.object_spawns.iter().copied().filter(|&p| p != agent).collect();
        objects.sort();
        objects.dedup();
        let state = WorldState {
            map,
            agent,
            heading,
            health: MAX_HEALTH,
            monsters,
            objects,
            tick: 0,
            options,
            rng,
        };
        let obs = state.observe();
        (state, obs)
    }

    pub fn observe(&self) -> Observation {
        render(self, self.options.view).expect("view dims validated at construction")
    }

    pub fn is_terminal(&self) -> bool {
        self.health == 0 || self.tick >= self.map.episode_step_limit
    }

    fn monster_at(&self, pos: Pos) -> Option<usize> {
        self.monsters.iter().position(|m| m.pos == pos)
    }

    pub fn has_object(&self, pos: Pos) -> bool {
        self.objects.binary_search(&pos).is_ok()
    }

    /// Advances one tick. Agent acts first, then monsters, then death is resolved.
    pub fn step(&mut self, action: EnvAction, profile: &RewardProfile) -> Result<StepOutcome, StepError> {
        if self.is_terminal() {
            return Err(StepError::Terminal { tick: self.tick });
        }
        let mut events = EventCounts::default();

        match action {
            EnvAction::Fire => {
                let d = self.heading.delta();
                let mut cur = offset(self.agent, d);
                let mut hit = None;
                while self.map.is_floor(cur) {
                    if let Some(i) = self.monster_at(cur) {
                        hit = Some(i);
                        break;
                    }
                    cur = offset(cur, d);
                }
                match hit {
                    Some(i) => {
                        let m = &mut self.monsters[i];
                        m.health = m.health.saturating_sub(1);
                        if m.health == 0 {
                            self.monsters.remove(i);
                            events.kill += 1;
                        }
                    }
                    None => events.missed_shot += 1,
                }
            }
            EnvAction::MoveForward | EnvAction::MoveBackward => {
                let (dx, dy) = self.heading.delta();
                let d = if action == EnvAction::MoveForward { (dx, dy) } else { (-dx, -dy) };
                let target = offset(self.agent, d);
                if self.map.is_floor(target) && self.monster_at(target).is_none() {
                    self.agent = target;
                    if let Ok(i) = self.objects.binary_search(&target) {
                        self.objects.remove(i);
                        events.object_gathered += 1;
                    }
                }
            }
            EnvAction::TurnRight => self.heading = self.heading.right(),
            EnvAction::TurnLeft => self.heading = self.heading.left(),
        }

        self.monsters_act(&mut events);

        if self.health == 0 {
            events.death += 1;
            if self.options.mode == EpisodeMode::Timed {
                self.respawn();
            }
        }
        self.tick += 1;

        Ok(StepOutcome {
            observation: self.observe(),
            reward: profile.reward(&events),
            done: self.is_terminal(),
            events,
        })
    }

    fn monsters_act(&mut self, events: &mut EventCounts) {
        for i in 0..self.monsters.len() {
            let pos = self.monsters[i].pos;
            if pos.manhattan(self.agent) == 1 {
                let m = &mut self.monsters[i];
                if m.cooldown == 0 {
                    self.health = self.health.saturating_sub(MONSTER_DAMAGE);
                    events.lost_health += 1;
                    m.cooldown = MONSTER_ATTACK_COOLDOWN;
                } else {
                    m.cooldown -= 1;
                }
                continue;
            }
            {
                let m = &mut self.monsters[i];
                m.cooldown = m.cooldown.saturating_sub(1);
            }
            let dir = if self.rng.random_bool(MONSTER_CHASE_PROB) {
                let dx = self.agent.x as isize - pos.x as isize;
                let dy = self.agent.y as isize - pos.y as isize;
                let horizontal = match dx.abs().cmp(&dy.abs()) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => self.rng.random_bool(0.5),
                };
                if horizontal {
                    (dx.signum(), 0)
                } else {
                    (0, dy.signum())
                }
            } else {
                Heading::ALL[self.rng.random_range(0..4)].delta()
            };
            let target = offset(pos, dir);
            if self.map.is_floor(target) && target != self.agent && self.monster_at(target).is_none() {
                self.monsters[i].pos = target;
            }
        }
    }

    fn respawn(&mut self) {
        let free: Vec<Pos> = self
            .map
            .agent_spawns
            .iter()
            .copied()
            .filter(|&p| self.monster_at(p).is_none())
            .collect();
        self.agent = if free.is_empty() {
            self.map.agent_spawns[0]
        } else {
            free[self.rng.random_range(0..free.len())]
        };
        self.heading = Heading::ALL[self.rng.random_range(0..4)];
        self.health = MAX_HEALTH;
    }

    /// ASCII top-down view, one string per row.
    pub fn ascii(&self) -> Vec<String> {
        let mut rows = Vec::with_capacity(self.map.height);
        for y in 0..self.map.height {
            let mut row = String::with_capacity(self.map.width);
            for x in 0..self.map.width {
                let p = Pos::new(x, y);
                let ch = if p == self.agent {
                    self.heading.glyph()
                } else if self.monster_at(p).is_some() {
                    'M'
                } else if self.has_object(p) {
                    'O'
                } else if self.map.is_floor(p) {
                    '.'
                } else {
                    '#'
                };
                row.push(ch);
            }
            rows.push(row);
        }
        rows
    }
}

/// Functional form of [`WorldState::reset`].
pub fn reset(map: Arc<MapSpec>, seed: u64, options: WorldOptions) -> (WorldState, Observation) {
    WorldState::reset(map, seed, options)
}

/// Functional form of [`WorldState::step`]: the input state is left untouched.
pub fn step(
    state: &WorldState,
    action: EnvAction,
    profile: &RewardProfile,
) -> Result<(StepOutcome, WorldState), StepError> {
    let mut next = state.clone();
    let outcome = next.step(action, profile)?;
    Ok((outcome, next))
}
