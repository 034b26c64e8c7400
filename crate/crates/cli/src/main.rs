use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use ltnet::criteria::{self, ConditionVerdict, CriteriaConfig, InhibitoryOutcome};
use ltnet::experiments::output::{self, SweepPairsFile};
use ltnet::experiments::{self, EtaStudyConfig, GlobalStudyConfig, SweepConfig};
use ltnet::metrics;
use ltnet::model::{validate_network, EIPairNetwork, EIPairParams, Network, SingleInhibitoryNetwork};
use ltnet::regions::{self, RegionConfig, RegionReport, RegionTable};
use ltnet::simulate::{self, Trajectory};

const SEED_ENV: &str = "LTNET_SEED";

#[derive(Parser)]
#[command(
    name = "ltnet",
    version,
    about = "Equilibria, oscillation criteria and simulation for linear-threshold networks"
)]
struct Cli {
    /// Master seed for every random draw (overrides LTNET_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for studies (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Slack tolerance for strict inequalities and region membership.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file, or directory for studies (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against the model assumptions.
    Validate {
        net: PathBuf,
        /// Require every column of W to have a single sign.
        #[arg(long)]
        dale: bool,
    },
    /// Report switching regions and their equilibria.
    Equilibria {
        net: PathBuf,
        /// Report every region, not only those containing their candidate.
        #[arg(long)]
        all: bool,
    },
    /// Decide whether the network lacks stable equilibria (exit 0), has one (1), or is indeterminate (2).
    Lose { net: PathBuf },
    /// Evaluate a closed-form condition.
    #[command(subcommand)]
    Check(Check),
    /// Integrate the dynamics and write the trajectory.
    Simulate(SimulateArgs),
    /// Oscillation indices of a trajectory CSV.
    Metrics(MetricsArgs),
    /// Monte-Carlo studies.
    #[command(subcommand)]
    Study(Study),
}

#[derive(Subcommand)]
enum Check {
    /// Limit-cycle conditions of a single E-I pair.
    EiPair { net: PathBuf },
    /// Networks with one inhibitory node.
    SingleInh {
        net: PathBuf,
        #[arg(long, value_enum, default_value_t = SingleInhCondition::Exact)]
        condition: SingleInhCondition,
    },
    /// Fully inhibitory networks.
    Inhibitory { net: PathBuf },
    /// Networks of coupled E-I pairs.
    EiNet {
        net: PathBuf,
        #[arg(long, value_enum, default_value_t = CouplingCondition::Auto)]
        condition: CouplingCondition,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SingleInhCondition {
    Exact,
    Sufficient,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CouplingCondition {
    /// E-to-E when the file has no E-to-I coupling, else E-to-all.
    Auto,
    E2e,
    E2all,
}

#[derive(Args)]
struct SimulateArgs {
    net: PathBuf,
    /// Initial state: comma-separated values, `random`, or `random:SEED`.
    #[arg(long, default_value = "random")]
    x0: String,
    #[arg(long, default_value_t = simulate::DEFAULT_T_END)]
    tend: f64,
    #[arg(long, default_value_t = simulate::DEFAULT_DT)]
    dt: f64,
    /// Keep only the final fraction of the samples.
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args)]
struct MetricsArgs {
    traj: PathBuf,
    /// Comma-separated maximal rates, one per channel.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<f64>,
    #[arg(long, default_value_t = metrics::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = simulate::DEFAULT_WINDOW)]
    window: f64,
}

#[derive(Subcommand)]
enum Study {
    /// Random excitatory-inhibitory networks.
    Global {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of sweep pairs to draw into `sweep_pairs.json`.
        #[arg(long, default_value_t = 500)]
        pairs: usize,
    },
    /// Convex sweeps between pairs drawn by `study global`.
    Sweep {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Stop once this many pairs are retained.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Coupled E-I pairs under scaled coupling.
    Eta {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Threshold for the per-eta oscillating share.
        #[arg(long)]
        theta: Option<f64>,
    },
}

/// Exit statuses beyond the verdict codes 0, 1 and 2.
enum Failure {
    Input(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<ltnet::Error>() {
            Some(
                ltnet::Error::Json(_)
                | ltnet::Error::Csv(_)
                | ltnet::Error::Dimension(_)
                | ltnet::Error::InvalidNetwork(_)
                | ltnet::Error::OutOfBox { .. }
                | ltnet::Error::InvalidArgument(_),
            ) => Failure::Input(e),
            _ => Failure::Run(e),
        }
    }
}

impl From<ltnet::Error> for Failure {
    fn from(e: ltnet::Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            3
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            4
        }
    };
    ExitCode::from(code)
}

fn run(cli: &Cli) -> Outcome {
    if let Some(tol) = cli.tol {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Failure::Input(anyhow!("--tol must be a nonnegative number")));
        }
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Run(e.into()))?;
    }
    match &cli.command {
        Command::Validate { net, dale } => {
            let net: Network = read_input(net)?;
            let report = validate_network(&net, *dale);
            emit_json(cli, &report)?;
            for v in &report.violations {
                eprintln!("{v}");
            }
            Ok(if report.is_valid() { 0 } else { 3 })
        }
        Command::Equilibria { net, all } => equilibria(cli, &read_input(net)?, *all),
        Command::Lose { net } => {
            let net: Network = read_input(net)?;
            let verdict = regions::lose_with(&net, &region_config(cli))?;
            emit_json(cli, &verdict)?;
            Ok(if verdict.lose {
                0
            } else if verdict.stable_contained.is_empty() {
                2
            } else {
                1
            })
        }
        Command::Check(check) => run_check(cli, check),
        Command::Simulate(args) => run_simulate(cli, args),
        Command::Metrics(args) => run_metrics(cli, args),
        Command::Study(study) => run_study(cli, study),
    }
}

fn read_input<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Input)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(Failure::Input)
}

fn criteria_config(cli: &Cli) -> CriteriaConfig {
    let mut cfg = CriteriaConfig::default();
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg
}

fn region_config(cli: &Cli) -> RegionConfig {
    let mut cfg = RegionConfig::default();
    if let Some(tol) = cli.tol {
        cfg.membership_rel = tol;
    }
    cfg
}

/// `--seed`, then `LTNET_SEED`; otherwise a fresh seed that is printed.
fn resolve_seed(cli: &Cli) -> Result<u64, Failure> {
    if let Some(s) = cli.seed {
        return Ok(s);
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        return v.trim().parse().map_err(|_| Failure::Input(anyhow!("{SEED_ENV}={v} is not an unsigned integer")));
    }
    let s = rand::random::<u64>();
    eprintln!("seed: {s}");
    Ok(s)
}

fn explicit_seed(cli: &Cli) -> Result<Option<u64>, Failure> {
    if cli.seed.is_some() || std::env::var_os(SEED_ENV).is_some() {
        resolve_seed(cli).map(Some)
    } else {
        Ok(None)
    }
}

fn write_out(cli: &Cli, bytes: &[u8]) -> Result<(), Failure> {
    let res = match &cli.out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().lock().write_all(bytes).context("writing standard output"),
    };
    res.map_err(Failure::Run)
}

fn emit_json<T: Serialize>(cli: &Cli, value: &T) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.into()))?;
    s.push('\n');
    write_out(cli, s.as_bytes())
}

fn equilibria(cli: &Cli, net: &Network, all: bool) -> Outcome {
    let table = RegionTable::new(net, &region_config(cli))?;
    let mut reports: Vec<RegionReport> = Vec::new();
    table.for_each(|r| {
        if all || r.is_equilibrium() {
            reports.push(r)
        }
    });
    let mut out = String::new();
    match cli.format {
        Format::Json => {
            for r in &reports {
                out += &serde_json::to_string(r).map_err(|e| Failure::Run(e.into()))?;
                out.push('\n');
            }
        }
        Format::Csv => {
            out += "pattern,index,stability,contained,abscissa";
            for i in 1..=net.len() {
                out += &format!(",x{i}");
            }
            out.push('\n');
            for r in &reports {
                let stability = serde_json::to_value(r.stability).map_err(|e| Failure::Run(e.into()))?;
                out += &format!(
                    "{},{},{},{},{}",
                    r.pattern,
                    r.index,
                    stability.as_str().unwrap_or_default(),
                    r.contained.map_or(String::new(), |c| c.to_string()),
                    r.abscissa
                );
                match &r.candidate {
                    Some(x) => x.iter().for_each(|v| out += &format!(",{v}")),
                    None => (0..net.len()).for_each(|_| out.push(',')),
                }
                out.push('\n');
            }
        }
    }
    write_out(cli, out.as_bytes())?;
    Ok(0)
}

/// 0 when satisfied, 2 when marginal, otherwise `unsatisfied`.
fn verdict_code(v: &ConditionVerdict, unsatisfied: u8) -> u8 {
    if v.marginal {
        2
    } else if v.satisfied {
        0
    } else {
        unsatisfied
    }
}

fn run_check(cli: &Cli, check: &Check) -> Outcome {
    let cfg = criteria_config(cli);
    match check {
        Check::EiPair { net } => {
            let p: EIPairParams = read_input(net)?;
            let v = criteria::ei_pair_limit_cycle_with(&p, &cfg)?;
            emit_json(cli, &v)?;
            Ok(verdict_code(&v, 1))
        }
        Check::SingleInh { net, condition } => {
            let text = fs::read_to_string(net)
                .with_context(|| format!("reading {}", net.display()))
                .map_err(Failure::Input)?;
            let sin: SingleInhibitoryNetwork = match serde_json::from_str(&text) {
                Ok(s) => s,
                Err(first) => {
                    let plain: Network = serde_json::from_str(&text)
                        .map_err(|_| Failure::Input(anyhow!("parsing {}: {first}", net.display())))?;
                    SingleInhibitoryNetwork::from_network(&plain)?
                }
            };
            match condition {
                SingleInhCondition::Exact => {
                    let v = criteria::single_inhibitory_in_y_with(&sin, &cfg)?;
                    emit_json(cli, &v)?;
                    Ok(verdict_code(&v, 1))
                }
                SingleInhCondition::Sufficient => {
                    let v = criteria::single_inhibitory_sufficient_with(&sin, &cfg)?;
                    emit_json(cli, &v)?;
                    // Failing the necessary part certifies a stable equilibrium.
                    Ok(verdict_code(&v, if v.holds("nec") { 2 } else { 1 }))
                }
            }
        }
        Check::Inhibitory { net } => {
            let net: Network = read_input(net)?;
            let (v, outcome) = criteria::inhibitory_summary(&net)?;
            emit_json(cli, &v)?;
            Ok(match outcome {
                InhibitoryOutcome::Lose => 0,
                InhibitoryOutcome::StableEquilibrium => 1,
                InhibitoryOutcome::Indeterminate => 2,
            })
        }
        Check::EiNet { net, condition } => {
            let pn: EIPairNetwork = read_input(net)?;
            let e2e = match condition {
                CouplingCondition::Auto => pn.is_e_to_e_only(),
                CouplingCondition::E2e => true,
                CouplingCondition::E2all => false,
            };
            if e2e {
                let v = criteria::e2e_coupled_lose_with(&pn, &cfg)?;
                emit_json(cli, &v)?;
                Ok(verdict_code(&v, 1))
            } else {
                let v = criteria::e2all_coupled_lose_with(&pn, &cfg)?;
                emit_json(cli, &v)?;
                Ok(verdict_code(&v, 2))
            }
        }
    }
}

fn parse_vector(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Input(anyhow!("`{t}` is not a number"))))
        .collect()
}

fn run_simulate(cli: &Cli, args: &SimulateArgs) -> Outcome {
    let net: Network = read_input(&args.net)?;
    net.check()?;
    let (x0, seed) = match args.x0.strip_prefix("random") {
        Some("") => {
            let s = resolve_seed(cli)?;
            (simulate::random_initial_state(net.m.as_slice(), s), Some(s))
        }
        Some(rest) => {
            let s = rest
                .strip_prefix(':')
                .and_then(|t| t.parse::<u64>().ok())
                .ok_or_else(|| Failure::Input(anyhow!("--x0 expects `random:SEED`, got `{}`", args.x0)))?;
            (simulate::random_initial_state(net.m.as_slice(), s), Some(s))
        }
        None => (parse_vector(&args.x0)?, None),
    };
    let mut tr = simulate::integrate_tail(&net, &x0, args.tend, args.dt, args.window.unwrap_or(1.0))?;
    if let Some(p) = tr.provenance.as_mut() {
        p.seed = seed;
    }
    match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            tr.write_csv(&mut buf)?;
            write_out(cli, &buf)?;
        }
        Format::Json => emit_json(cli, &tr)?,
    }
    Ok(0)
}

fn run_metrics(cli: &Cli, args: &MetricsArgs) -> Outcome {
    let file = fs::File::open(&args.traj)
        .with_context(|| format!("reading {}", args.traj.display()))
        .map_err(Failure::Input)?;
    let tr = Trajectory::read_csv(io::BufReader::new(file))?;
    let m = metrics::oscillation_index(&tr, &args.m, args.epsilon, args.window)?;
    match cli.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                #[serde(flatten)]
                metrics: &'a metrics::OscillationMetrics,
                log_chi_osc: f64,
            }
            emit_json(cli, &Out { metrics: &m, log_chi_osc: m.log_chi_osc() })?;
        }
        Format::Csv => {
            let mut out = String::from("channel,chi_reg,frequency,chi_pp\n");
            for (i, c) in m.per_channel.iter().enumerate() {
                out += &format!("{},{},{},{}\n", i + 1, c.chi_reg, c.frequency, c.chi_pp);
            }
            write_out(cli, out.as_bytes())?;
        }
    }
    Ok(0)
}

/// Reads a study configuration, reporting whether it sets `key` itself.
fn read_config<T: DeserializeOwned + Default>(path: Option<&PathBuf>, key: &str) -> Result<(T, bool), Failure> {
    let Some(path) = path else {
        return Ok((T::default(), false));
    };
    let value: serde_json::Value = read_input(path)?;
    let has_key = value.get(key).is_some();
    let cfg =
        serde_json::from_value(value).with_context(|| format!("parsing {}", path.display())).map_err(Failure::Input)?;
    Ok((cfg, has_key))
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    cli.out.as_deref().ok_or_else(|| Failure::Input(anyhow!("studies need --out <dir>")))
}

fn study_seed(cli: &Cli, configured: Option<u64>) -> Result<u64, Failure> {
    match (explicit_seed(cli)?, configured) {
        (Some(s), _) => Ok(s),
        (None, Some(s)) => Ok(s),
        (None, None) => resolve_seed(cli),
    }
}

fn run_study(cli: &Cli, study: &Study) -> Outcome {
    match study {
        Study::Global { config, pairs } => {
            let dir = out_dir(cli)?;
            let (mut cfg, has_seed): (GlobalStudyConfig, bool) = read_config(config.as_ref(), "master_seed")?;
            cfg.master_seed = study_seed(cli, has_seed.then_some(cfg.master_seed))?;
            let res = experiments::run_global_study(&cfg)?;
            output::write_global(dir, &res)?;
            if let Some(theta) = res.summary.theta {
                match experiments::select_sweep_pairs(&res, *pairs, cfg.master_seed) {
                    Ok(p) => {
                        output::write_sweep_pairs(&dir.join("sweep_pairs.json"), &SweepPairsFile { theta, pairs: p })?
                    }
                    Err(e) => log::warn!("no sweep pairs written: {e}"),
                }
            }
            print_summary(&res.summary)?;
            Ok(0)
        }
        Study::Sweep { pairs, config, target } => {
            let dir = out_dir(cli)?;
            let file = output::read_sweep_pairs(pairs).map_err(|e| Failure::Input(anyhow::Error::new(e)))?;
            let (mut cfg, has_theta): (SweepConfig, bool) = read_config(config.as_ref(), "theta")?;
            if !has_theta {
                cfg.theta = file.theta;
            }
            let res = experiments::run_sweep_study(&file.pairs, &cfg, *target)?;
            output::write_sweep(dir, &res)?;
            print_summary(&res.summary)?;
            Ok(0)
        }
        Study::Eta { config, theta } => {
            let dir = out_dir(cli)?;
            let (mut cfg, has_seed): (EtaStudyConfig, bool) = read_config(config.as_ref(), "seed")?;
            cfg.seed = study_seed(cli, has_seed.then_some(cfg.seed))?;
            if theta.is_some() {
                cfg.theta = *theta;
            }
            let res = experiments::run_eta_study(&cfg)?;
            output::write_eta(dir, &res)?;
            print_summary(&res.summaries)?;
            Ok(0)
        }
    }
}

fn print_summary<T: Serialize>(summary: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(summary).map_err(|e| Failure::Run(e.into()))?;
    eprintln!("{s}");
    Ok(())
}
