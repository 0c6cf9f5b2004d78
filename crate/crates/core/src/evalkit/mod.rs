//! Episode evaluation, kill/death/object metrics, ratio curves and two-sample t-tests.

mod stats;

pub use stats::{
    ln_gamma, regularized_incomplete_beta, student_t_test, t_test, two_tailed_p, welch_t_test, StatsError, TTest,
    TTestKind,
};

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::arbiter::{ArbiterError, CombinedAgent, Controller, PolicyMode, Routing, RoutingRule, SingleAgent};
use crate::minidoom::{EnvAction, EpisodeMode, EventCounts, MapSpec, ViewDims, WorldOptions, WorldState};
use crate::netcore::Parameters;
use crate::trainer::LogRow;

pub const SIGNIFICANCE: f64 = 0.05;
pub const MEANS_HEADER: &str = "map,agent,episodes,kills,deaths,objects,steps,return,kill_death_ratio,object_death_ratio";
pub const CURVE_HEADER: &str = "global_step,episodes,kill_death_ratio,object_death_ratio";
pub const PVALUES_HEADER: &str = "map,agent_a,agent_b,kills_p,deaths_p,objects_p,kills_significant,deaths_significant,objects_significant";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Agent(#[from] ArbiterError),
    #[error("environment: {0}")]
    Step(#[from] crate::minidoom::StepError),
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("invalid evaluation request: {0}")]
    Request(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub seed: u64,
    pub kills: u32,
    pub deaths: u32,
    pub objects: u32,
    pub steps: u32,
    pub shaped_return: f64,
}

/// One environment step as seen by an observer of [`run_episode_with`].
#[derive(Clone, Debug)]
pub struct StepRecord<'a> {
    pub tick: u32,
    pub routing: Option<Routing>,
    pub action: EnvAction,
    pub reward: f64,
    pub events: EventCounts,
    pub state: &'a WorldState,
}

/// Plays one episode, calling `observe` after every step.
pub fn run_episode_with(
    controller: &mut dyn Controller,
    map: Arc<MapSpec>,
    mode: EpisodeMode,
    seed: u64,
    mut observe: impl FnMut(&StepRecord<'_>),
) -> Result<EpisodeStats, EvalError> {
    let (h, w) = controller.input_dims();
    let options = WorldOptions { view: ViewDims { height: h, width: w }, mode };
    let (mut env, mut obs) = WorldState::reset(map, seed, options);
    controller.reset(seed);
    let profile = controller.profile();
    let mut total = EventCounts::default();
    let mut stats = EpisodeStats { seed, kills: 0, deaths: 0, objects: 0, steps: 0, shaped_return: 0.0 };
    while !env.is_terminal() {
        let decision = controller.act(&obs)?;
        let tick = env.tick;
        let out = env.step(decision.action, &profile)?;
        total.add(&out.events);
        stats.steps += 1;
        stats.shaped_return += out.reward;
        observe(&StepRecord {
            tick,
            routing: decision.routing,
            action: decision.action,
            reward: out.reward,
            events: out.events,
            state: &env,
        });
        obs = out.observation;
    }
    stats.kills = total.kill;
    stats.deaths = total.death;
    stats.objects = total.object_gathered;
    Ok(stats)
}

/// `n` episodes with environment and sampling seeds `seed .. seed + n`.
pub fn run_episodes(
    controller: &mut dyn Controller,
    map: Arc<MapSpec>,
    n: usize,
    mode: EpisodeMode,
    seed: u64,
) -> Result<Vec<EpisodeStats>, EvalError> {
    (0..n as u64).map(|i| run_episode_with(controller, map.clone(), mode, seed + i, |_| {})).collect()
}

/// `sum(num) / (sum(den) + 1)`; the +1 keeps zero-death windows finite.
pub fn ratio(numerator: u64, denominator: u64) -> f64 {
    numerator as f64 / (denominator as f64 + 1.0)
}

pub fn kill_death_ratio(stats: &[EpisodeStats]) -> f64 {
    ratio(stats.iter().map(|s| s.kills as u64).sum(), stats.iter().map(|s| s.deaths as u64).sum())
}

pub fn object_death_ratio(stats: &[EpisodeStats]) -> f64 {
    ratio(stats.iter().map(|s| s.objects as u64).sum(), stats.iter().map(|s| s.deaths as u64).sum())
}

/// A point of the training curve: ratios over the `episodes` most recent finished episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub global_step: u64,
    pub episodes: usize,
    pub kill_death_ratio: f64,
    pub object_death_ratio: f64,
}

/// Sliding-window kill/death and object/death ratios over training episodes, one point per
/// finished episode in global-step order.
pub fn ratio_curve(rows: &[LogRow], window: usize) -> Vec<CurvePoint> {
    let mut rows: Vec<&LogRow> = rows.iter().collect();
    rows.sort_by_key(|r| (r.global_step, r.worker, r.episode));
    let window = window.max(1);
    (0..rows.len())
        .map(|i| {
            let w = &rows[(i + 1).saturating_sub(window)..=i];
            let sum = |f: fn(&LogRow) -> u32| w.iter().map(|r| f(r) as u64).sum::<u64>();
            let deaths = sum(|r| r.deaths);
            CurvePoint {
                global_step: rows[i].global_step,
                episodes: w.len(),
                kill_death_ratio: ratio(sum(|r| r.kills), deaths),
                object_death_ratio: ratio(sum(|r| r.objects), deaths),
            }
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for p in points {
        writeln!(s, "{},{},{},{}", p.global_step, p.episodes, p.kill_death_ratio, p.object_death_ratio).unwrap();
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Kills,
    Deaths,
    Objects,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Kills, Metric::Deaths, Metric::Objects];

    pub fn values(self, stats: &[EpisodeStats]) -> Vec<f64> {
        stats
            .iter()
            .map(|s| match self {
                Metric::Kills => s.kills,
                Metric::Deaths => s.deaths,
                Metric::Objects => s.objects,
            } as f64)
            .collect()
    }
}

/// How to build an evaluated agent.
#[derive(Clone, Debug)]
pub enum AgentSpec {
    Single(Parameters),
    Combined { action: Parameters, navigation: Parameters, rule: RoutingRule },
}

impl AgentSpec {
    pub fn build(&self, mode: PolicyMode) -> Result<Box<dyn Controller>, ArbiterError> {
        Ok(match self {
            AgentSpec::Single(p) => Box::new(SingleAgent::new(p.clone(), mode)?),
            AgentSpec::Combined { action, navigation, rule } => {
                Box::new(CombinedAgent::new(action.clone(), navigation.clone(), *rule, mode)?)
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct CompareRequest {
    pub agents: Vec<(String, AgentSpec)>,
    pub maps: Vec<(String, Arc<MapSpec>)>,
    pub episodes: usize,
    pub mode: EpisodeMode,
    pub policy: PolicyMode,
    pub seed: u64,
    pub test: TTestKind,
    /// Evaluation threads; cells of the agent x map grid are spread over them.
    pub threads: usize,
}

/// All episodes of one agent on one map.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub map: String,
    pub agent: String,
    pub episodes: Vec<EpisodeStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub map: String,
    pub agent: String,
    pub episodes: usize,
    pub kills: f64,
    pub deaths: f64,
    pub objects: f64,
    pub steps: f64,
    pub shaped_return: f64,
    pub kill_death_ratio: f64,
    pub object_death_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PValueRow {
    pub map: String,
    pub agent_a: String,
    pub agent_b: String,
    pub kills: TTest,
    pub deaths: TTest,
    pub objects: TTest,
}

impl PValueRow {
    pub fn get(&self, metric: Metric) -> TTest {
        match metric {
            Metric::Kills => self.kills,
            Metric::Deaths => self.deaths,
            Metric::Objects => self.objects,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub pvalues: Vec<PValueRow>,
    pub cells: Vec<Cell>,
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

fn fmt_p(t: &TTest) -> String {
    t.p().map_or_else(|| "NA".to_string(), |p| p.to_string())
}

impl EvalReport {
    pub fn row(&self, map: &str, agent: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.map == map && r.agent == agent)
    }

    pub fn means_csv(&self) -> String {
        let mut s = format!("{MEANS_HEADER}\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.map, r.agent, r.episodes, r.kills, r.deaths, r.objects, r.steps, r.shaped_return, r.kill_death_ratio, r.object_death_ratio
            )
            .unwrap();
        }
        s
    }

    pub fn pvalues_csv(&self) -> String {
        let mut s = format!("{PVALUES_HEADER}\n");
        for r in &self.pvalues {
            let sig = |t: &TTest| t.significant(SIGNIFICANCE);
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.map,
                r.agent_a,
                r.agent_b,
                fmt_p(&r.kills),
                fmt_p(&r.deaths),
                fmt_p(&r.objects),
                sig(&r.kills),
                sig(&r.deaths),
                sig(&r.objects)
            )
            .unwrap();
        }
        s
    }

    /// Aligned plain-text table of means and p-values.
    pub fn pretty(&self) -> String {
        let mut s = format!(
            "{:<16} {:<12} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "map", "agent", "n", "kills", "deaths", "objects", "K/D", "O/D"
        );
        for r in &self.rows {
            writeln!(
                s,
                "{:<16} {:<12} {:>4} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
                r.map, r.agent, r.episodes, r.kills, r.deaths, r.objects, r.kill_death_ratio, r.object_death_ratio
            )
            .unwrap();
        }
        if !self.pvalues.is_empty() {
            s.push_str("\np-values (* = below 0.05)\n");
            for r in &self.pvalues {
                let cell = |t: &TTest| match t.p() {
                    Some(p) => format!("{p:.4}{}", if p < SIGNIFICANCE { "*" } else { "" }),
                    None => "NA".into(),
                };
                writeln!(
                    s,
                    "{:<16} {} vs {}: kills {} deaths {} objects {}",
                    r.map,
                    r.agent_a,
                    r.agent_b,
                    cell(&r.kills),
                    cell(&r.deaths),
                    cell(&r.objects)
                )
                .unwrap();
            }
        }
        s.push_str("\nratios: total kills (objects) / (total deaths + 1)\n");
        s
    }
}

/// Builds the report from finished cells. Cells are ordered by map then agent as listed in
/// `maps` and `agents`, and episodes by seed, so the input order does not matter.
pub fn aggregate(mut cells: Vec<Cell>, maps: &[String], agents: &[String], kind: TTestKind) -> Result<EvalReport, EvalError> {
    let pos = |list: &[String], name: &str| list.iter().position(|m| m == name).unwrap_or(usize::MAX);
    cells.sort_by_key(|c| (pos(maps, &c.map), pos(agents, &c.agent)));
    for c in &mut cells {
        c.episodes.sort_by_key(|e| e.seed);
    }
    let rows = cells
        .iter()
        .map(|c| {
            let n = c.episodes.len().max(1);
            let e = &c.episodes;
            ReportRow {
                map: c.map.clone(),
                agent: c.agent.clone(),
                episodes: e.len(),
                kills: mean(e.iter().map(|s| s.kills as f64), n),
                deaths: mean(e.iter().map(|s| s.deaths as f64), n),
                objects: mean(e.iter().map(|s| s.objects as f64), n),
                steps: mean(e.iter().map(|s| s.steps as f64), n),
                shaped_return: mean(e.iter().map(|s| s.shaped_return), n),
                kill_death_ratio: kill_death_ratio(e),
                object_death_ratio: object_death_ratio(e),
            }
        })
        .collect();
    let mut pvalues = Vec::new();
    for map in maps {
        let in_map: Vec<&Cell> = cells.iter().filter(|c| &c.map == map).collect();
        for i in 0..in_map.len() {
            for j in i + 1..in_map.len() {
                let (a, b) = (&in_map[i].episodes, &in_map[j].episodes);
                let test = |m: Metric| t_test(kind, &m.values(a), &m.values(b));
                pvalues.push(PValueRow {
                    map: map.clone(),
                    agent_a: in_map[i].agent.clone(),
                    agent_b: in_map[j].agent.clone(),
                    kills: test(Metric::Kills)?,
                    deaths: test(Metric::Deaths)?,
                    objects: test(Metric::Objects)?,
                });
            }
        }
    }
    Ok(EvalReport { rows, pvalues, cells })
}

/// Runs every agent on every map and tabulates means, ratios and pairwise p-values.
pub fn compare(req: &CompareRequest) -> Result<EvalReport, EvalError> {
    if req.episodes < 2 && req.agents.len() > 1 {
        return Err(EvalError::Request("t-tests need at least 2 episodes per cell".into()));
    }
    let jobs: Vec<(usize, usize)> =
        (0..req.maps.len()).flat_map(|m| (0..req.agents.len()).map(move |a| (m, a))).collect();
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<Result<Cell, EvalError>>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..req.threads.max(1).min(jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(m, a)) = jobs.get(i) else { break };
                let (map_name, map) = &req.maps[m];
                let (agent_name, spec) = &req.agents[a];
                let result = spec.build(req.policy).map_err(EvalError::from).and_then(|mut c| {
                    run_episodes(c.as_mut(), map.clone(), req.episodes, req.mode, req.seed)
                        .map(|episodes| Cell { map: map_name.clone(), agent: agent_name.clone(), episodes })
                });
                done.lock().unwrap().push(result);
            });
        }
    });
    let cells = done.into_inner().unwrap().into_iter().collect::<Result<Vec<_>, _>>()?;
    let maps: Vec<String> = req.maps.iter().map(|(n, _)| n.clone()).collect();
    let agents: Vec<String> = req.agents.iter().map(|(n, _)| n.clone()).collect();
    aggregate(cells, &maps, &agents, req.test)
}
