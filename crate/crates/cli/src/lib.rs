//! Command-line front end: model and instance files, index tables,
//! simulation runs and the Lagrangian bound.

pub mod output;
pub mod spec;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use whittle_core::index::{detect_threshold_structure, whittle_index, IndexOptions, IndexResult, Method, Verdict};
use whittle_core::sim::{lagrangian_bound, simulate, uniform_grid, RmabpInstance, SimOptions, SimPolicy};
use whittle_core::model::validate_model_with;
use whittle_core::{Error, PassiveSetPolicy, ThresholdKind, ThresholdPolicy};

use output::{num, num_json};
use spec::{InstanceSpecFile, LoadedInstance, ModelSpecFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model\n{0}")]
    Invalid(String),
    #[error("not indexable: passive sets {0} and {1} are not nested")]
    NotIndexable(String, String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::NotIndexable(..) => 3,
            CliError::Core(Error::TooManyStates { .. }) => 4,
            CliError::Core(Error::InfeasibleState(_)) => 5,
            CliError::Invalid(_) | CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "whittle", version, about = "Whittle indices for restless bandits with impulse transitions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file and print the validation report.
    Validate { path: PathBuf },
    /// Compute the index table of a model.
    Index(IndexArgs),
    /// Simulate an instance under a policy.
    Simulate(SimulateArgs),
    /// Lagrangian lower bound on the optimal average cost of an instance.
    Bound(BoundArgs),
    /// Index policy against the baselines and the bound.
    Compare(CompareArgs),
    /// Print the explicit form of a model file.
    Expand { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Algorithm1,
    Threshold,
    ClosedForm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Algorithm1 => Method::Algorithm1,
            MethodArg::Threshold => Method::Threshold,
            MethodArg::ClosedForm => Method::ClosedForm,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    pub path: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Largest state count for full enumeration.
    #[arg(long, default_value_t = 20)]
    pub max_states: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub path: PathBuf,
    /// index, all-passive, random, myopic or threshold=<n>[,<n>...]
    #[arg(long, default_value = "index")]
    pub policy: String,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    pub path: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub wmax: f64,
    #[arg(long, default_value_t = 101)]
    pub wsteps: usize,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10.0)]
    pub wmax: f64,
    #[arg(long, default_value_t = 101)]
    pub wsteps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Text for stdout plus diagnostics for stderr.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub text: String,
    pub warnings: Vec<String>,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Output { text, warnings: vec![] }
    }
}

fn load_model(path: &std::path::Path) -> Result<(whittle_core::BanditModel, whittle_core::Tolerances), CliError> {
    let file = ModelSpecFile::load(path)?;
    let model = file.build()?;
    Ok((model, file.tolerances()))
}

pub fn cmd_validate(path: &std::path::Path) -> Result<Output, CliError> {
    let (model, tol) = load_model(path)?;
    let report = validate_model_with(&model, &tol);
    let mut text = String::new();
    for issue in &report.issues {
        writeln!(text, "{issue}").unwrap();
    }
    if report.ok {
        writeln!(text, "ok: {} states", model.n_states()).unwrap();
        Ok(text.into())
    } else {
        Err(CliError::Invalid(text.trim_end().to_string()))
    }
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Indexable => "indexable",
        Verdict::NotIndexable { .. } => "not-indexable",
        Verdict::IndexNotFound => "index-not-found",
    }
}

fn compute_index(model: &whittle_core::BanditModel, opts: &IndexOptions) -> Result<IndexResult, CliError> {
    let res = whittle_index(model, opts)?;
    if let Verdict::NotIndexable { witness: (a, b) } = &res.verdict {
        let fmt = |v: &[usize]| PassiveSetPolicy::from_states(model.n_states(), v).to_string();
        return Err(CliError::NotIndexable(fmt(a), fmt(b)));
    }
    Ok(res)
}

pub fn cmd_index(args: &IndexArgs) -> Result<Output, CliError> {
    let (model, tolerances) = load_model(&args.path)?;
    let report = validate_model_with(&model, &tolerances);
    if !report.ok {
        let lines: Vec<String> = report.errors().map(|i| i.to_string()).collect();
        return Err(CliError::Invalid(lines.join("\n")));
    }
    let opts = IndexOptions { method: args.method.into(), max_states: args.max_states, tolerances };
    let res = compute_index(&model, &opts)?;
    let path = res.path.to_string();
    let verdict = verdict_name(&res.verdict);
    let text = match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record(["state", "index", "path", "verdict"]).map_err(io_err)?;
            for (s, v) in res.index.iter().enumerate() {
                w.write_record([s.to_string(), v.to_string(), path.clone(), verdict.to_string()]).map_err(io_err)?;
            }
            String::from_utf8(w.into_inner().map_err(io_err)?).expect("utf-8 csv")
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = res
                .index
                .iter()
                .enumerate()
                .map(|(s, v)| {
                    let index = match v.as_f64() {
                        Some(x) => num_json(x),
                        None => json!(v.to_string()),
                    };
                    json!({ "state": s, "index": index, "path": path, "verdict": verdict })
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("json") + "\n"
        }
    };
    Ok(Output { text, warnings: res.warnings })
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Parse a `--policy` value against the loaded bandits.
pub fn parse_policy(text: &str, inst: &LoadedInstance) -> Result<SimPolicy, CliError> {
    match text {
        "index" => Ok(SimPolicy::Index),
        "all-passive" => Ok(SimPolicy::AllPassive),
        "random" => Ok(SimPolicy::RandomFeasible),
        "myopic" => Ok(SimPolicy::Myopic),
        _ => {
            let list = text
                .strip_prefix("threshold=")
                .ok_or_else(|| CliError::Parse(format!("unknown policy {text:?}")))?;
            let values: Vec<isize> = list
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| CliError::Parse(format!("bad threshold {t:?}"))))
                .collect::<Result<_, _>>()?;
            let k = inst.bandits.len();
            if values.len() != 1 && values.len() != k {
                return Err(CliError::Parse(format!("{} thresholds for {k} bandits", values.len())));
            }
            let kind = |b: usize| detect_threshold_structure(&inst.bandits[b].0).kind().unwrap_or(ThresholdKind::ZeroOne);
            let policies = if values.len() == 1 {
                (0..k).map(|b| ThresholdPolicy::new(values[0], kind(b))).collect()
            } else {
                values.iter().enumerate().map(|(b, &t)| ThresholdPolicy::new(t, kind(b))).collect()
            };
            Ok(SimPolicy::FixedThresholds(policies))
        }
    }
}

/// Core instance for a loaded file; index tables are computed only when asked.
pub fn build_instance(inst: &LoadedInstance, with_index: bool) -> Result<RmabpInstance, CliError> {
    let index_tables = if with_index {
        inst.bandits
            .iter()
            .map(|(m, tol)| compute_index(m, &IndexOptions { tolerances: *tol, ..Default::default() }).map(|r| r.index))
            .collect::<Result<_, _>>()?
    } else {
        vec![]
    };
    Ok(RmabpInstance {
        bandits: inst.bandits.iter().map(|(m, _)| m.clone()).collect(),
        budget: inst.budget,
        index_tables,
        exact_m: inst.exact_m,
    })
}

fn sim_options(inst: &LoadedInstance, horizon: Option<f64>, reps: Option<usize>, seed: Option<u64>) -> SimOptions {
    let d = inst.simulation;
    SimOptions {
        horizon: horizon.unwrap_or(d.horizon),
        replications: reps.unwrap_or(d.replications),
        seed: seed.unwrap_or(d.seed),
        warmup_fraction: d.warmup_fraction,
        parallel: true,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Output, CliError> {
    let loaded = InstanceSpecFile::load(&args.path)?;
    let policy = parse_policy(&args.policy, &loaded)?;
    let inst = build_instance(&loaded, policy == SimPolicy::Index)?;
    let opts = sim_options(&loaded, args.horizon, args.reps, args.seed);
    let r = simulate(&inst, &policy, &opts)?;
    let text = match args.format {
        Format::Json => {
            let activity: Vec<serde_json::Value> = r.per_bandit_activity.iter().map(|&x| num_json(x)).collect();
            let v = json!({
                "policy": args.policy,
                "avg_cost": num_json(r.avg_cost),
                "ci_halfwidth": num_json(r.ci_halfwidth),
                "horizon": num_json(r.horizon),
                "replications": r.replications,
                "seed": r.seed,
                "per_bandit_activity": activity,
            });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        Format::Csv => {
            let mut head = vec!["policy".to_string(), "avg_cost".into(), "ci_halfwidth".into(), "horizon".into(), "replications".into(), "seed".into()];
            head.extend((0..r.per_bandit_activity.len()).map(|k| format!("activity_{k}")));
            let mut row = vec![args.policy.clone(), num(r.avg_cost), num(r.ci_halfwidth), num(r.horizon), r.replications.to_string(), r.seed.to_string()];
            row.extend(r.per_bandit_activity.iter().map(|&x| num(x)));
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record(&head).map_err(io_err)?;
            w.write_record(&row).map_err(io_err)?;
            String::from_utf8(w.into_inner().map_err(io_err)?).expect("utf-8 csv")
        }
    };
    Ok(text.into())
}

fn grid(wmax: f64, wsteps: usize) -> Result<Vec<f64>, CliError> {
    if wsteps == 0 || !(wmax >= 0.0 && wmax.is_finite()) {
        return Err(CliError::Parse("the price grid needs wsteps >= 1 and a finite wmax >= 0".into()));
    }
    Ok(uniform_grid(wmax, wsteps))
}

pub fn cmd_bound(args: &BoundArgs) -> Result<Output, CliError> {
    let loaded = InstanceSpecFile::load(&args.path)?;
    let inst = build_instance(&loaded, false)?;
    let b = lagrangian_bound(&inst, &grid(args.wmax, args.wsteps)?)?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&json!({ "w_star": num_json(b.w_star), "bound": num_json(b.bound) })).expect("json") + "\n",
        Format::Csv => format!("w_star,bound\n{},{}\n", num(b.w_star), num(b.bound)),
    };
    Ok(text.into())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Output, CliError> {
    let loaded = InstanceSpecFile::load(&args.path)?;
    let inst = build_instance(&loaded, true)?;
    let opts = sim_options(&loaded, args.horizon, args.reps, args.seed);
    let mut text = String::from("policy,avg_cost,ci_halfwidth\n");
    let mut warnings = vec![];
    for (name, policy) in [
        ("index", SimPolicy::Index),
        ("myopic", SimPolicy::Myopic),
        ("random", SimPolicy::RandomFeasible),
        ("all-passive", SimPolicy::AllPassive),
    ] {
        match simulate(&inst, &policy, &opts) {
            Ok(r) => writeln!(text, "{name},{},{}", num(r.avg_cost), num(r.ci_halfwidth)).unwrap(),
            Err(e) => {
                writeln!(text, "{name},,").unwrap();
                warnings.push(format!("{name}: {e}"));
            }
        }
    }
    let b = lagrangian_bound(&inst, &grid(args.wmax, args.wsteps)?)?;
    writeln!(text, "bound,{},", num(b.bound)).unwrap();
    Ok(Output { text, warnings })
}

pub fn cmd_expand(path: &std::path::Path) -> Result<Output, CliError> {
    let file = ModelSpecFile::load(path)?;
    let model = file.build()?;
    Ok(ModelSpecFile::explicit_from(&model, file.tolerances).to_toml()?.into())
}

fn dispatch(cli: &Cli) -> Result<(Output, Option<PathBuf>), CliError> {
    Ok(match &cli.command {
        Command::Validate { path } => (cmd_validate(path)?, None),
        Command::Index(a) => (cmd_index(a)?, a.out.clone()),
        Command::Simulate(a) => (cmd_simulate(a)?, a.out.clone()),
        Command::Bound(a) => (cmd_bound(a)?, a.out.clone()),
        Command::Compare(a) => (cmd_compare(a)?, a.out.clone()),
        Command::Expand { path } => (cmd_expand(path)?, None),
    })
}

/// Thread cap from `WHITTLE_THREADS`, if set.
fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("WHITTLE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Parse(format!("WHITTLE_THREADS={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Run a parsed command, writing results and diagnostics; returns the exit code.
pub fn run(cli: &Cli, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32 {
    let result = thread_cap().and_then(|cap| match cap {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(io_err)?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    });
    match result {
        Ok((out, file)) => {
            for w in &out.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let written = match file {
                Some(p) => std::fs::write(&p, &out.text).map_err(|e| format!("{}: {e}", p.display())),
                None => stdout.write_all(out.text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
