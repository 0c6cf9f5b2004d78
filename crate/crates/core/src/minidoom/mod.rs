//! Deterministic grid-based first-person shooter environment.
//!
//! Maps are plain-text character grids. The agent occupies one cell and faces one of the
//! four cardinal directions; monsters random-walk toward it and attack when adjacent.
//! Observations are column-raycast RGB frames.

mod map;
mod render;
mod reward;
mod world;

pub use map::{load_map, Cell, MapError, MapSpec, Pos, DEFAULT_EPISODE_STEP_LIMIT};
pub use render::{render, DimsError, Observation, ViewDims};
pub use reward::{EventCounts, RewardProfile};
pub use world::{
    reset, step, EnvAction, EpisodeMode, Heading, Monster, Role, StepError, StepOutcome, WorldOptions,
    WorldState, MAX_HEALTH, MONSTER_ATTACK_COOLDOWN, MONSTER_DAMAGE,
};
