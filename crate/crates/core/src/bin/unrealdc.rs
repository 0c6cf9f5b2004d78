use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use unrealdc::arbiter::{ArbiterError, CombinedAgent, Controller, PolicyMode, RoutingRule, SingleAgent};
use unrealdc::evalkit::{self, AgentSpec, CompareRequest, EvalError, TTestKind};
use unrealdc::minidoom::{EpisodeMode, MapSpec, Role};
use unrealdc::netcore::{load_checkpoint, CheckpointError, Parameters};
use unrealdc::trainer::{self, TrainConfig, TrainError, FINAL_CHECKPOINT, LOG_FILE};

const MANIFEST_FILE: &str = "manifest.toml";
const CURVE_FILE: &str = "ratio_curve.csv";
const MEANS_FILE: &str = "means.csv";
const PVALUES_FILE: &str = "pvalues.csv";

#[derive(Parser, Debug)]
#[command(name = "unrealdc", version, about = "Train, evaluate and compare divide-and-conquer UNREAL agents")]
struct Cli {
    /// Training config (TOML). Relative map paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory; every artifact of the command is written here.
    #[arg(long, global = true, env = "UNREALDC_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Global environment-step budget.
    #[arg(long, global = true)]
    steps: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one agent and write manifest, log, curve and checkpoints.
    Train(TrainArgs),
    /// Evaluate one checkpoint (or a combined pair) on maps.
    Eval(EvalArgs),
    /// Action-only versus combined agent, with t-tests.
    Compare(CompareArgs),
    /// Play one episode and print a per-tick trace.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Map files; replaces the config's list.
    #[arg(long = "map")]
    maps: Vec<PathBuf>,
    #[arg(long, value_enum)]
    role: Option<RoleArg>,
    /// Network profile: paper, small or tiny.
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    step_limit: Option<u32>,
    #[arg(long)]
    checkpoint_interval: Option<u64>,
    /// Episodes per point of the exported ratio curve.
    #[arg(long, default_value_t = 50)]
    curve_window: usize,
}

#[derive(Args, Debug, Clone)]
struct EvalOptions {
    #[arg(long = "map", required = true)]
    maps: Vec<PathBuf>,
    #[arg(long, default_value_t = 30)]
    episodes: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::UntilDeath)]
    mode: ModeArg,
    #[arg(long)]
    step_limit: Option<u32>,
    /// Argmax actions instead of sampling.
    #[arg(long)]
    greedy: bool,
    #[arg(long, value_enum, default_value_t = RuleArg::Standard)]
    rule: RuleArg,
    /// Pooled-variance t-test instead of Welch.
    #[arg(long)]
    student: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Single-agent checkpoint.
    #[arg(long, conflicts_with_all = ["action", "navigation"], required_unless_present_all = ["action", "navigation"])]
    checkpoint: Option<PathBuf>,
    #[arg(long, requires = "navigation")]
    action: Option<PathBuf>,
    #[arg(long, requires = "action")]
    navigation: Option<PathBuf>,
    #[command(flatten)]
    opts: EvalOptions,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    action: PathBuf,
    #[arg(long)]
    navigation: PathBuf,
    #[command(flatten)]
    opts: EvalOptions,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, conflicts_with_all = ["action", "navigation"], required_unless_present_all = ["action", "navigation"])]
    checkpoint: Option<PathBuf>,
    #[arg(long, requires = "navigation")]
    action: Option<PathBuf>,
    #[arg(long, requires = "action")]
    navigation: Option<PathBuf>,
    #[arg(long)]
    map: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::UntilDeath)]
    mode: ModeArg,
    #[arg(long)]
    step_limit: Option<u32>,
    #[arg(long)]
    greedy: bool,
    #[arg(long, value_enum, default_value_t = RuleArg::Standard)]
    rule: RuleArg,
    /// Trace lines only, no map drawings.
    #[arg(long)]
    no_render: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RoleArg {
    Action,
    Navigation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    UntilDeath,
    Timed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Standard,
    NegativeOnly,
}

impl From<ModeArg> for EpisodeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::UntilDeath => EpisodeMode::UntilDeath,
            ModeArg::Timed => EpisodeMode::Timed,
        }
    }
}

impl From<RuleArg> for RoutingRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Standard => RoutingRule::Standard,
            RuleArg::NegativeOnly => RoutingRule::NegativeOnly,
        }
    }
}

/// Exit 2 for bad input, 1 for failures while running.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::MapFile { .. } | TrainError::Map { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ArbiterError> for Failure {
    fn from(e: ArbiterError) -> Self {
        match e {
            ArbiterError::ActionCount { .. } | ArbiterError::InputMismatch { .. } | ArbiterError::Checkpoint(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Agent(a) => a.into(),
            EvalError::Request(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn ckpt_failure(path: &Path, e: CheckpointError) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct Layout {
    log: String,
    curve: String,
    final_checkpoint: String,
    periodic_checkpoints: String,
}

/// Written to the run directory before the first training step.
#[derive(Serialize)]
struct RunManifest {
    version: String,
    seed: u64,
    network_fingerprint: String,
    layout: Layout,
    config: TrainConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(&cli, a),
        Command::Eval(a) => cmd_eval(&cli, a),
        Command::Compare(a) => cmd_compare(&cli, a),
        Command::Demo(a) => cmd_demo(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn load_config(cli: &Cli) -> Result<TrainConfig, Failure> {
    let Some(path) = &cli.config else { return Ok(TrainConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = TrainConfig::from_toml(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for m in &mut config.maps {
        if m.is_relative() {
            *m = base.join(&*m);
        }
    }
    Ok(config)
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<(), Failure> {
    let mut config = load_config(cli)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(w) = cli.workers {
        config.schedule.workers = w;
    }
    if let Some(s) = cli.steps {
        config.schedule.steps = s;
    }
    if !args.maps.is_empty() {
        config.maps = args.maps.clone();
    }
    if let Some(r) = args.role {
        config.role = match r {
            RoleArg::Action => Role::Action,
            RoleArg::Navigation => Role::Navigation,
        };
    }
    if let Some(n) = &args.network {
        config.network = n.clone();
    }
    if args.step_limit.is_some() {
        config.step_limit = args.step_limit;
    }
    if let Some(i) = args.checkpoint_interval {
        config.schedule.checkpoint_interval = i;
    }
    if config.maps.is_empty() {
        return Err(Failure::Usage("no maps given (use --map or maps in the config)".into()));
    }
    config.validate()?;
    let maps = trainer::read_maps(&config.maps, config.step_limit)?;
    let net = config.network_config()?;

    let dir = out_dir(cli);
    fs::create_dir_all(&dir)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        network_fingerprint: format!("{:016x}", net.fingerprint()),
        layout: Layout {
            log: LOG_FILE.into(),
            curve: CURVE_FILE.into(),
            final_checkpoint: FINAL_CHECKPOINT.into(),
            periodic_checkpoints: "step_<global step>.ckpt".into(),
        },
        config: config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;

    let outcome = trainer::train_with_maps(&config, maps, Some(&dir))?;
    let curve = evalkit::ratio_curve(&outcome.log, args.curve_window);
    fs::write(dir.join(CURVE_FILE), evalkit::curve_csv(&curve))?;
    eprintln!(
        "trained {} steps, {} updates ({} skipped), {} episodes -> {}",
        outcome.global_steps,
        outcome.applied_updates(),
        outcome.optimizer.skipped,
        outcome.log.len(),
        dir.display()
    );
    for r in &outcome.workers {
        if let Some(e) = &r.error {
            return Err(Failure::Runtime(format!("worker {}: {e}", r.worker)));
        }
    }
    Ok(())
}

fn load_params(path: &Path) -> Result<Parameters, Failure> {
    load_checkpoint(path, None).map_err(|e| ckpt_failure(path, e))
}

fn read_eval_maps(paths: &[PathBuf], step_limit: Option<u32>) -> Result<Vec<(String, Arc<MapSpec>)>, Failure> {
    let maps = trainer::read_maps(paths, step_limit)?;
    Ok(paths.iter().map(|p| map_name(p)).zip(maps).collect())
}

fn map_name(p: &Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn policy(greedy: bool) -> PolicyMode {
    if greedy {
        PolicyMode::Greedy
    } else {
        PolicyMode::Sample
    }
}

fn request(cli: &Cli, opts: &EvalOptions, agents: Vec<(String, AgentSpec)>) -> Result<CompareRequest, Failure> {
    Ok(CompareRequest {
        agents,
        maps: read_eval_maps(&opts.maps, opts.step_limit)?,
        episodes: opts.episodes,
        mode: opts.mode.into(),
        policy: policy(opts.greedy),
        seed: cli.seed.unwrap_or(0),
        test: if opts.student { TTestKind::Student } else { TTestKind::Welch },
        threads: cli.workers.unwrap_or(1),
    })
}

fn combined_spec(action: &Path, navigation: &Path, rule: RuleArg) -> Result<AgentSpec, Failure> {
    let spec = AgentSpec::Combined { action: load_params(action)?, navigation: load_params(navigation)?, rule: rule.into() };
    spec.build(PolicyMode::Greedy)?;
    Ok(spec)
}

fn write_report(cli: &Cli, report: &evalkit::EvalReport) -> Result<(), Failure> {
    let dir = out_dir(cli);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(MEANS_FILE), report.means_csv())?;
    fs::write(dir.join(PVALUES_FILE), report.pvalues_csv())?;
    print!("{}", report.pretty());
    eprintln!("wrote {} and {} under {}", MEANS_FILE, PVALUES_FILE, dir.display());
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<(), Failure> {
    let (name, spec) = match (&args.checkpoint, &args.action, &args.navigation) {
        (Some(c), _, _) => {
            let p = load_params(c)?;
            let spec = AgentSpec::Single(p);
            spec.build(PolicyMode::Greedy)?;
            (map_name(c), spec)
        }
        (None, Some(a), Some(n)) => ("combined".to_string(), combined_spec(a, n, args.opts.rule)?),
        _ => return Err(Failure::Usage("give --checkpoint or both --action and --navigation".into())),
    };
    let report = evalkit::compare(&request(cli, &args.opts, vec![(name, spec)])?)?;
    write_report(cli, &report)
}

fn cmd_compare(cli: &Cli, args: &CompareArgs) -> Result<(), Failure> {
    let action = load_params(&args.action)?;
    let expected = Role::Action.action_count();
    if action.config.actions != expected {
        return Err(ArbiterError::ActionCount { agent: "action", expected, found: action.config.actions }.into());
    }
    let single = AgentSpec::Single(action);
    let combined = combined_spec(&args.action, &args.navigation, args.opts.rule)?;
    let agents = vec![("action".to_string(), single), ("combined".to_string(), combined)];
    let report = evalkit::compare(&request(cli, &args.opts, agents)?)?;
    write_report(cli, &report)
}

fn cmd_demo(cli: &Cli, args: &DemoArgs) -> Result<(), Failure> {
    let mode = policy(args.greedy);
    let mut controller: Box<dyn Controller> = match (&args.checkpoint, &args.action, &args.navigation) {
        (Some(c), _, _) => Box::new(SingleAgent::new(load_params(c)?, mode)?),
        (None, Some(a), Some(n)) => Box::new(CombinedAgent::load(a, n, args.rule.into(), mode)?),
        _ => return Err(Failure::Usage("give --checkpoint or both --action and --navigation".into())),
    };
    let map = trainer::read_maps(std::slice::from_ref(&args.map), args.step_limit)?.remove(0);
    let mut out = String::new();
    let stats = evalkit::run_episode_with(controller.as_mut(), map, args.mode.into(), cli.seed.unwrap_or(0), |r| {
        let agent = r.routing.map_or("-", |x| x.choice.name());
        writeln!(
            out,
            "tick {:>5} agent {:<10} action {:<13} reward {:<8} events {}",
            r.tick,
            agent,
            r.action.name(),
            r.reward,
            r.events
        )
        .unwrap();
        if !args.no_render {
            for row in r.state.ascii() {
                writeln!(out, "    {row}").unwrap();
            }
        }
    })?;
    print!("{out}");
    eprintln!(
        "episode: {} steps, kills {} deaths {} objects {} return {:.3}",
        stats.steps, stats.kills, stats.deaths, stats.objects, stats.shaped_return
    );
    Ok(())
}
