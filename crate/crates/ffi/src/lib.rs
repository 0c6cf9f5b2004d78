//! C interface to the simulator, trained agents and the t-test.
//!
//! Objects are opaque handles created by `udc_*_new` / `udc_*_load` and released with the
//! matching `udc_*_free`. Every fallible call returns a [`UdcStatus`]; on failure a message
//! is kept per thread and can be read with [`udc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use unrealdc::arbiter::{ArbiterError, CombinedAgent, Controller, PolicyMode, RoutingRule, SingleAgent, AgentChoice};
use unrealdc::evalkit::{run_episodes, welch_t_test, TTest};
use unrealdc::minidoom::{
    load_map, EnvAction, EpisodeMode, EventCounts, MapSpec, Observation, RewardProfile, ViewDims, WorldOptions, WorldState,
};
use unrealdc::netcore::load_checkpoint;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UdcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MapError = 3,
    CheckpointError = 4,
    ActionCountMismatch = 5,
    EpisodeFinished = 6,
    BufferTooSmall = 7,
    RuntimeError = 8,
    Panic = 9,
}

pub const UDC_ACTION_FIRE: u32 = 0;
pub const UDC_ACTION_MOVE_FORWARD: u32 = 1;
pub const UDC_ACTION_TURN_RIGHT: u32 = 2;
pub const UDC_ACTION_TURN_LEFT: u32 = 3;
pub const UDC_ACTION_MOVE_BACKWARD: u32 = 4;

pub const UDC_ROLE_ACTION: u32 = 0;
pub const UDC_ROLE_NAVIGATION: u32 = 1;

/// No sub-agent (single agents).
pub const UDC_CHOICE_NONE: i32 = -1;
pub const UDC_CHOICE_ACTION: i32 = 0;
pub const UDC_CHOICE_NAVIGATION: i32 = 1;

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UdcEvents {
    pub kill: u32,
    pub death: u32,
    pub missed_shot: u32,
    pub lost_health: u32,
    pub object_gathered: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UdcEpisodeStats {
    pub seed: u64,
    pub kills: u32,
    pub deaths: u32,
    pub objects: u32,
    pub steps: u32,
    pub shaped_return: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UdcTTest {
    /// 0 when both samples have zero variance; t, df and p are then NaN.
    pub defined: bool,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Simulator instance.
pub struct UdcEnv {
    map: Arc<MapSpec>,
    options: WorldOptions,
    profile: RewardProfile,
    state: WorldState,
    obs: Observation,
}

/// Single or combined agent.
pub struct UdcAgent {
    inner: Box<dyn Controller>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).unwrap()));
}

fn fail(status: UdcStatus, msg: impl Into<String>) -> UdcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> UdcStatus) -> UdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(UdcStatus::Panic, "internal panic"),
    }
}

fn arbiter_status(e: ArbiterError) -> UdcStatus {
    let status = match e {
        ArbiterError::ActionCount { .. } | ArbiterError::InputMismatch { .. } => UdcStatus::ActionCountMismatch,
        ArbiterError::Checkpoint(_) => UdcStatus::CheckpointError,
        _ => UdcStatus::RuntimeError,
    };
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, UdcStatus> {
    if p.is_null() {
        return Err(fail(UdcStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(UdcStatus::InvalidArgument, "string is not UTF-8"))
}

fn parse_map(text: &str) -> Result<Arc<MapSpec>, UdcStatus> {
    load_map(text).map(Arc::new).map_err(|e| fail(UdcStatus::MapError, e.to_string()))
}

fn mode(timed: bool) -> EpisodeMode {
    if timed {
        EpisodeMode::Timed
    } else {
        EpisodeMode::UntilDeath
    }
}

fn events(e: &EventCounts) -> UdcEvents {
    UdcEvents {
        kill: e.kill,
        death: e.death,
        missed_shot: e.missed_shot,
        lost_health: e.lost_health,
        object_gathered: e.object_gathered,
    }
}

fn action_from(code: u32) -> Option<EnvAction> {
    Some(match code {
        UDC_ACTION_FIRE => EnvAction::Fire,
        UDC_ACTION_MOVE_FORWARD => EnvAction::MoveForward,
        UDC_ACTION_TURN_RIGHT => EnvAction::TurnRight,
        UDC_ACTION_TURN_LEFT => EnvAction::TurnLeft,
        UDC_ACTION_MOVE_BACKWARD => EnvAction::MoveBackward,
        _ => return None,
    })
}

fn action_code(a: EnvAction) -> u32 {
    match a {
        EnvAction::Fire => UDC_ACTION_FIRE,
        EnvAction::MoveForward => UDC_ACTION_MOVE_FORWARD,
        EnvAction::TurnRight => UDC_ACTION_TURN_RIGHT,
        EnvAction::TurnLeft => UDC_ACTION_TURN_LEFT,
        EnvAction::MoveBackward => UDC_ACTION_MOVE_BACKWARD,
    }
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn udc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn udc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates an environment from map text. `role` picks the reward profile.
///
/// # Safety
/// `map_text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udc_env_new(
    map_text: *const c_char,
    seed: u64,
    height: usize,
    width: usize,
    timed: bool,
    role: u32,
    out: *mut *mut UdcEnv,
) -> UdcStatus {
    guard(|| {
        if out.is_null() {
            return fail(UdcStatus::NullPointer, "null output handle");
        }
        let text = match str_arg(map_text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let map = match parse_map(text) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let profile = match role {
            UDC_ROLE_ACTION => RewardProfile::ACTION,
            UDC_ROLE_NAVIGATION => RewardProfile::NAVIGATION,
            _ => return fail(UdcStatus::InvalidArgument, format!("unknown role {role}")),
        };
        let view = match ViewDims::new(height, width) {
            Ok(v) => v,
            Err(e) => return fail(UdcStatus::InvalidArgument, e.to_string()),
        };
        let options = WorldOptions { view, mode: mode(timed) };
        let (state, obs) = WorldState::reset(map.clone(), seed, options);
        *out = Box::into_raw(Box::new(UdcEnv { map, options, profile, state, obs }));
        UdcStatus::Ok
    })
}

/// # Safety
/// `env` must come from [`udc_env_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn udc_env_free(env: *mut UdcEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn udc_env_reset(env: *mut UdcEnv, seed: u64) -> UdcStatus {
    guard(|| {
        let Some(env) = env.as_mut() else { return fail(UdcStatus::NullPointer, "null env") };
        let (state, obs) = WorldState::reset(env.map.clone(), seed, env.options);
        env.state = state;
        env.obs = obs;
        UdcStatus::Ok
    })
}

/// Advances one tick. Any of the output pointers may be null.
///
/// # Safety
/// `env` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn udc_env_step(
    env: *mut UdcEnv,
    action: u32,
    reward: *mut f64,
    done: *mut bool,
    out_events: *mut UdcEvents,
) -> UdcStatus {
    guard(|| {
        let Some(env) = env.as_mut() else { return fail(UdcStatus::NullPointer, "null env") };
        let Some(a) = action_from(action) else {
            return fail(UdcStatus::InvalidArgument, format!("unknown action {action}"));
        };
        match env.state.step(a, &env.profile) {
            Ok(o) => {
                if !reward.is_null() {
                    *reward = o.reward;
                }
                if !done.is_null() {
                    *done = o.done;
                }
                if !out_events.is_null() {
                    *out_events = events(&o.events);
                }
                env.obs = o.observation;
                UdcStatus::Ok
            }
            Err(e) => fail(UdcStatus::EpisodeFinished, e.to_string()),
        }
    })
}

/// Number of floats in an observation (height * width * 3).
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn udc_env_observation_len(env: *const UdcEnv) -> usize {
    env.as_ref().map_or(0, |e| e.obs.data().len())
}

/// Copies the current observation, row-major height x width x RGB in [0, 1].
///
/// # Safety
/// `env` must be a live handle and `buf` valid for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn udc_env_observation(env: *const UdcEnv, buf: *mut f32, len: usize) -> UdcStatus {
    guard(|| {
        let Some(env) = env.as_ref() else { return fail(UdcStatus::NullPointer, "null env") };
        if buf.is_null() {
            return fail(UdcStatus::NullPointer, "null buffer");
        }
        let data = env.obs.data();
        if len < data.len() {
            return fail(UdcStatus::BufferTooSmall, format!("need {} floats, got {len}", data.len()));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        UdcStatus::Ok
    })
}

/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn udc_env_is_terminal(env: *const UdcEnv) -> bool {
    env.as_ref().is_none_or(|e| e.state.is_terminal())
}

fn policy(greedy: bool) -> PolicyMode {
    if greedy {
        PolicyMode::Greedy
    } else {
        PolicyMode::Sample
    }
}

/// Loads a single-agent checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udc_agent_load(path: *const c_char, greedy: bool, out: *mut *mut UdcAgent) -> UdcStatus {
    guard(|| {
        if out.is_null() {
            return fail(UdcStatus::NullPointer, "null output handle");
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let params = match load_checkpoint(Path::new(path), None) {
            Ok(p) => p,
            Err(e) => return fail(UdcStatus::CheckpointError, format!("{path}: {e}")),
        };
        match SingleAgent::new(params, policy(greedy)) {
            Ok(a) => {
                *out = Box::into_raw(Box::new(UdcAgent { inner: Box::new(a) }));
                UdcStatus::Ok
            }
            Err(e) => arbiter_status(e),
        }
    })
}

/// Loads a combined agent. `negative_only` restricts routing to predicted negative rewards.
///
/// # Safety
/// Both paths must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udc_combined_load(
    action_path: *const c_char,
    navigation_path: *const c_char,
    greedy: bool,
    negative_only: bool,
    out: *mut *mut UdcAgent,
) -> UdcStatus {
    guard(|| {
        if out.is_null() {
            return fail(UdcStatus::NullPointer, "null output handle");
        }
        let (a, n) = match (str_arg(action_path), str_arg(navigation_path)) {
            (Ok(a), Ok(n)) => (a, n),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let rule = if negative_only { RoutingRule::NegativeOnly } else { RoutingRule::Standard };
        match CombinedAgent::load(Path::new(a), Path::new(n), rule, policy(greedy)) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(UdcAgent { inner: Box::new(c) }));
                UdcStatus::Ok
            }
            Err(e) => arbiter_status(e),
        }
    })
}

/// # Safety
/// `agent` must come from a load call and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn udc_agent_free(agent: *mut UdcAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Input frame size the agent expects.
///
/// # Safety
/// `agent` must be a live handle; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn udc_agent_input_dims(agent: *const UdcAgent, height: *mut usize, width: *mut usize) -> UdcStatus {
    guard(|| {
        let Some(a) = agent.as_ref() else { return fail(UdcStatus::NullPointer, "null agent") };
        if height.is_null() || width.is_null() {
            return fail(UdcStatus::NullPointer, "null output");
        }
        (*height, *width) = a.inner.input_dims();
        UdcStatus::Ok
    })
}

/// Clears recurrent state and reseeds action sampling.
///
/// # Safety
/// `agent` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn udc_agent_reset(agent: *mut UdcAgent, seed: u64) -> UdcStatus {
    guard(|| {
        let Some(a) = agent.as_mut() else { return fail(UdcStatus::NullPointer, "null agent") };
        a.inner.reset(seed);
        UdcStatus::Ok
    })
}

/// Picks an action for the environment's current observation. `choice` receives one of
/// the `UDC_CHOICE_*` values and may be null.
///
/// # Safety
/// Handles must be live; `action` valid; `choice` valid or null.
#[no_mangle]
pub unsafe extern "C" fn udc_agent_act(agent: *mut UdcAgent, env: *const UdcEnv, action: *mut u32, choice: *mut i32) -> UdcStatus {
    guard(|| {
        let (Some(a), Some(env)) = (agent.as_mut(), env.as_ref()) else {
            return fail(UdcStatus::NullPointer, "null handle");
        };
        if action.is_null() {
            return fail(UdcStatus::NullPointer, "null action output");
        }
        if a.inner.input_dims() != (env.obs.height, env.obs.width) {
            return fail(
                UdcStatus::InvalidArgument,
                format!("agent expects {:?} frames, env renders {}x{}", a.inner.input_dims(), env.obs.height, env.obs.width),
            );
        }
        match a.inner.act(&env.obs) {
            Ok(d) => {
                *action = action_code(d.action);
                if !choice.is_null() {
                    *choice = match d.routing.map(|r| r.choice) {
                        None => UDC_CHOICE_NONE,
                        Some(AgentChoice::Action) => UDC_CHOICE_ACTION,
                        Some(AgentChoice::Navigation) => UDC_CHOICE_NAVIGATION,
                    };
                }
                UdcStatus::Ok
            }
            Err(e) => arbiter_status(e),
        }
    })
}

/// Plays `n` episodes with seeds `seed .. seed + n` and writes one record per episode.
///
/// # Safety
/// `agent` must be a live handle, `map_text` NUL-terminated, `out` valid for `n` records.
#[no_mangle]
pub unsafe extern "C" fn udc_agent_run_episodes(
    agent: *mut UdcAgent,
    map_text: *const c_char,
    n: usize,
    timed: bool,
    seed: u64,
    out: *mut UdcEpisodeStats,
) -> UdcStatus {
    guard(|| {
        let Some(a) = agent.as_mut() else { return fail(UdcStatus::NullPointer, "null agent") };
        if out.is_null() && n > 0 {
            return fail(UdcStatus::NullPointer, "null output");
        }
        let map = match str_arg(map_text).and_then(parse_map) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match run_episodes(a.inner.as_mut(), map, n, mode(timed), seed) {
            Ok(stats) => {
                for (i, s) in stats.iter().enumerate() {
                    *out.add(i) = UdcEpisodeStats {
                        seed: s.seed,
                        kills: s.kills,
                        deaths: s.deaths,
                        objects: s.objects,
                        steps: s.steps,
                        shaped_return: s.shaped_return,
                    };
                }
                UdcStatus::Ok
            }
            Err(e) => fail(UdcStatus::RuntimeError, e.to_string()),
        }
    })
}

/// Shaped reward of an event tally under a role's profile.
///
/// # Safety
/// `e` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udc_shaped_reward(role: u32, e: *const UdcEvents, reward: *mut f64) -> UdcStatus {
    guard(|| {
        let (Some(e), false) = (e.as_ref(), reward.is_null()) else {
            return fail(UdcStatus::NullPointer, "null argument");
        };
        let profile = match role {
            UDC_ROLE_ACTION => RewardProfile::ACTION,
            UDC_ROLE_NAVIGATION => RewardProfile::NAVIGATION,
            _ => return fail(UdcStatus::InvalidArgument, format!("unknown role {role}")),
        };
        let counts = EventCounts {
            kill: e.kill,
            death: e.death,
            missed_shot: e.missed_shot,
            lost_health: e.lost_health,
            object_gathered: e.object_gathered,
        };
        *reward = profile.reward(&counts);
        UdcStatus::Ok
    })
}

/// Welch's two-tailed two-sample t-test.
///
/// # Safety
/// `a` and `b` must be valid for `na` and `nb` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn udc_welch_t_test(a: *const f64, na: usize, b: *const f64, nb: usize, out: *mut UdcTTest) -> UdcStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(UdcStatus::NullPointer, "null argument");
        }
        let (xs, ys) = (std::slice::from_raw_parts(a, na), std::slice::from_raw_parts(b, nb));
        match welch_t_test(xs, ys) {
            Ok(TTest::Defined { t, df, p }) => {
                *out = UdcTTest { defined: true, t, df, p };
                UdcStatus::Ok
            }
            Ok(TTest::NotApplicable) => {
                *out = UdcTTest { defined: false, t: f64::NAN, df: f64::NAN, p: f64::NAN };
                UdcStatus::Ok
            }
            Err(e) => fail(UdcStatus::InvalidArgument, e.to_string()),
        }
    })
}
