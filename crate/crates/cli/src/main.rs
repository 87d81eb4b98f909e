//! `rmci` command-line entry point. Every subcommand prints one JSON
//! document on stdout. Validation failures exit with status 2 and a JSON
//! error object on stderr; internal failures exit with status 1.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::{json, Value};

use rmci::bounds::{con3_bound, lezaud_one_sided, lezaud_two_sided, lower_bound_length, prop2_bound, BoundValue};
use rmci::harness::{
    coverage_experiment, gallery, resolve_chain, resolve_gallery, ChainSpec, EstimatorConfig, ExperimentConfig,
};
use rmci::oracle::{exact_a1_distribution, lambda_grid, tail_table};
use rmci::report::{to_json, write_stage_csv, ARTIFACT_VERSION};
use rmci::t1::{k_alpha, target_length};
use rmci::t2::{k_alpha_a, DEFAULT_BUDGET_CAP};
use rmci::{run_t1, run_t2, spectral_summary, Error, Execution, T1Config, T2Config};

#[derive(Parser)]
#[command(name = "rmci", version, about = "Rigorous MCMC confidence intervals from exact samples and reversible chain runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and relaxation time of a chain.
    Spectral {
        #[command(flatten)]
        chain: ChainArg,
    },
    /// Fixed-budget interval from 2n exact samples and 2mn chain steps.
    T1 {
        #[command(flatten)]
        chain: ChainArg,
        /// Number of exact samples per phase (>= 3).
        #[arg(long)]
        n: u64,
        /// Trajectory length per exact sample (>= 1).
        #[arg(long)]
        m: u64,
        /// Miss probability, in (0, 1).
        #[arg(long)]
        alpha: f64,
        /// Guess for the relaxation time (>= 1).
        #[arg(long = "tau-hat")]
        tau_hat: f64,
        /// Root seed.
        #[arg(long)]
        seed: u64,
    },
    /// Adaptive doubling interval.
    T2 {
        #[command(flatten)]
        chain: ChainArg,
        /// Number of exact samples per phase (>= 5).
        #[arg(long)]
        n: u64,
        /// Miss probability, in (0, 1).
        #[arg(long)]
        alpha: f64,
        /// Initial relaxation-time guess (>= 1).
        #[arg(long = "tau-hat")]
        tau_hat: f64,
        /// Number of doublings allowed; the largest guess is 2^a * tau-hat.
        #[arg(long)]
        a: u32,
        /// Root seed.
        #[arg(long)]
        seed: u64,
        /// Hard cap on chain steps, counted as 2n times the final trajectory length.
        #[arg(long = "budget-cap", default_value_t = DEFAULT_BUDGET_CAP)]
        budget_cap: u64,
        /// Also write one CSV row per stage to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate a closed-form bound.
    Bounds(BoundsArgs),
    /// Exact distribution of the trajectory average by path enumeration.
    Oracle {
        #[command(flatten)]
        chain: ChainArg,
        /// Trajectory length.
        #[arg(long)]
        m: u64,
        /// Tail thresholds (default 0.05, 0.10, ..., 0.95).
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        /// Also write (lambda, exact_tail, lezaud_bound) rows to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replicated coverage experiment.
    Coverage(CoverageArgs),
    /// List or export built-in chains.
    #[command(group(ArgGroup::new("action").required(true).args(["list", "export"])))]
    Gallery {
        /// Print every built-in chain.
        #[arg(long)]
        list: bool,
        /// Print the chain definition JSON of NAME.
        #[arg(long, value_name = "NAME")]
        export: Option<String>,
        /// Write the exported definition to a file instead of stdout.
        #[arg(long, requires = "export")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ChainArg {
    /// `gallery:NAME` or a chain definition JSON file.
    #[arg(long)]
    chain: String,
}

#[derive(Args)]
#[command(group(ArgGroup::new("which").required(true).args([
    "lezaud_one_sided", "lezaud_two_sided", "prop2", "con3", "lower_bound", "target_length", "k_alpha", "k_alpha_a",
])))]
struct BoundsArgs {
    /// exp(1/(5 tau2) - lambda^2 m / (12 tau2)); needs --lambda --m --tau2.
    #[arg(long)]
    lezaud_one_sided: bool,
    /// 3 exp(-lambda^2 m / (12 tau2)); needs --lambda --m --tau2.
    #[arg(long)]
    lezaud_two_sided: bool,
    /// Truncation bound 3n(n+1) exp(-m ln^2 n / (48 n tau2)); needs --n --m --tau2.
    #[arg(long)]
    prop2: bool,
    /// Budget bound 3n(n+1) exp(-ln^2 n); needs --n.
    #[arg(long)]
    con3: bool,
    /// max(1/n, sqrt(tau2/(n m))); needs --n --m --tau2.
    #[arg(long)]
    lower_bound: bool,
    /// k_alpha err ln n; needs --n --m --alpha --tau-hat.
    #[arg(long)]
    target_length: bool,
    /// 2(sqrt(2/alpha) + ln(4/alpha)); needs --alpha.
    #[arg(long)]
    k_alpha: bool,
    /// 2(sqrt(2(a+1)/alpha) + ln(4(a+1)/alpha)); needs --alpha --a.
    #[arg(long)]
    k_alpha_a: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "tau-hat")]
    tau_hat: Option<f64>,
    #[arg(long)]
    a: Option<u32>,
}

#[derive(Args)]
struct CoverageArgs {
    /// Experiment config JSON; replaces all other experiment flags.
    #[arg(long, conflicts_with_all = ["chain", "estimator", "n", "m", "alpha", "tau_hat", "a", "replications", "seed"])]
    config: Option<PathBuf>,
    /// `gallery:NAME` or a chain definition JSON file.
    #[arg(long)]
    chain: Option<String>,
    /// `t1` or `t2`.
    #[arg(long, value_parser = ["t1", "t2"])]
    estimator: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    /// Trajectory length (t1 only).
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "tau-hat")]
    tau_hat: Option<f64>,
    /// Number of doublings (t2 only).
    #[arg(long)]
    a: Option<u32>,
    /// Number of replications R.
    #[arg(long)]
    replications: Option<u64>,
    /// Experiment seed; replication j uses hash64(seed, j).
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-replication rows to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run replications on the current thread only.
    #[arg(long)]
    sequential: bool,
}

enum Failure {
    Validation(&'static str, String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) => return Failure::Internal(e.to_string()),
            Error::ChainFile(_)
            | Error::UnknownGalleryChain(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidProbabilityVector(_)
            | Error::RowSum { .. }
            | Error::DetailedBalance { .. }
            | Error::Stationarity { .. }
            | Error::ObservableRange { .. }
            | Error::DegenerateStationary(_) => "ChainFileError",
            Error::Json(_) | Error::Csv(_) => "ChainFileError",
            _ => "FlagValidationError",
        };
        Failure::Validation(kind, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type CmdResult = Result<Value, Failure>;

fn flag_error(msg: impl Into<String>) -> Failure {
    Failure::Validation("FlagValidationError", msg.into())
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| flag_error(format!("missing required flag --{flag}")))
}

fn parse_json(text: String) -> Value {
    serde_json::from_str(&text).expect("serialized report is valid JSON")
}

fn bound_json(name: &str, params: Value, b: BoundValue) -> Value {
    json!({"bound": name, "parameters": params, "value": b.value, "vacuous": b.vacuous})
}

fn run_bounds(args: BoundsArgs) -> CmdResult {
    let a = &args;
    if a.lezaud_one_sided || a.lezaud_two_sided {
        let (lambda, m, tau2) = (need(a.lambda, "lambda")?, need(a.m, "m")?, need(a.tau2, "tau2")?);
        let params = json!({"lambda": lambda, "m": m, "tau2": tau2});
        return Ok(if a.lezaud_one_sided {
            bound_json("lezaud_one_sided", params, lezaud_one_sided(lambda, m, tau2)?)
        } else {
            bound_json("lezaud_two_sided", params, lezaud_two_sided(lambda, m, tau2)?)
        });
    }
    if a.prop2 {
        let (n, m, tau2) = (need(a.n, "n")?, need(a.m, "m")?, need(a.tau2, "tau2")?);
        return Ok(bound_json("prop2", json!({"n": n, "m": m, "tau2": tau2}), prop2_bound(n, m, tau2)?));
    }
    if a.con3 {
        let n = need(a.n, "n")?;
        return Ok(bound_json("con3", json!({"n": n}), con3_bound(n)?));
    }
    if a.lower_bound {
        let (n, m, tau2) = (need(a.n, "n")?, need(a.m, "m")?, need(a.tau2, "tau2")?);
        let v = lower_bound_length(n, m, tau2)?;
        return Ok(json!({"bound": "lower_bound_length", "parameters": {"n": n, "m": m, "tau2": tau2}, "value": v}));
    }
    if a.target_length {
        let (n, m, alpha, tau_hat) = (need(a.n, "n")?, need(a.m, "m")?, need(a.alpha, "alpha")?, need(a.tau_hat, "tau-hat")?);
        T1Config { n, m, alpha, tau_hat, root_seed: 0 }.validate()?;
        let v = target_length(n, m, alpha, tau_hat);
        return Ok(json!({"bound": "target_length", "parameters": {"n": n, "m": m, "alpha": alpha, "tau_hat": tau_hat}, "value": v}));
    }
    let alpha = need(a.alpha, "alpha")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(flag_error(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if a.k_alpha {
        return Ok(json!({"bound": "k_alpha", "parameters": {"alpha": alpha}, "value": k_alpha(alpha)}));
    }
    let aa = need(a.a, "a")?;
    Ok(json!({"bound": "k_alpha_a", "parameters": {"alpha": alpha, "a": aa}, "value": k_alpha_a(alpha, aa)}))
}

fn run_coverage(args: CoverageArgs) -> CmdResult {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation("ChainFileError", format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)
                .map_err(|e| flag_error(format!("invalid experiment config: {e}")))?
        }
        None => {
            let chain = need(args.chain.clone(), "chain")?;
            let n = need(args.n, "n")?;
            let alpha = need(args.alpha, "alpha")?;
            let tau_hat = need(args.tau_hat, "tau-hat")?;
            let estimator = match need(args.estimator.as_deref(), "estimator")? {
                "t1" => EstimatorConfig::T1(T1Config { n, m: need(args.m, "m")?, alpha, tau_hat, root_seed: 0 }),
                _ => EstimatorConfig::T2(T2Config::new(n, alpha, tau_hat, need(args.a, "a")?, 0)),
            };
            ExperimentConfig {
                chain: ChainSpec::Named(chain),
                estimator,
                replications: need(args.replications, "replications")?,
                experiment_seed: need(args.seed, "seed")?,
            }
        }
    };
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let chain = config.chain()?;
    let outcome = coverage_experiment(&chain, &config.estimator, config.replications, config.experiment_seed, exec)?;
    if let Some(path) = &args.csv {
        outcome.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(parse_json(to_json(chain.name(), &outcome.summary)?))
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Spectral { chain } => {
            let chain = resolve_chain(&chain.chain)?;
            let summary = spectral_summary(&chain)?;
            Ok(parse_json(to_json(chain.name(), &summary)?))
        }
        Command::T1 { chain, n, m, alpha, tau_hat, seed } => {
            let chain = resolve_chain(&chain.chain)?;
            let report = run_t1(&chain, &T1Config { n, m, alpha, tau_hat, root_seed: seed })?;
            Ok(parse_json(to_json(chain.name(), &report)?))
        }
        Command::T2 { chain, n, alpha, tau_hat, a, seed, budget_cap, csv } => {
            let chain = resolve_chain(&chain.chain)?;
            let mut config = T2Config::new(n, alpha, tau_hat, a, seed);
            config.budget_cap = budget_cap;
            let report = run_t2(&chain, &config)?;
            if let Some(path) = csv {
                write_stage_csv(&report, BufWriter::new(File::create(path)?))?;
            }
            Ok(parse_json(to_json(chain.name(), &report)?))
        }
        Command::Bounds(args) => run_bounds(args),
        Command::Oracle { chain, m, lambda, csv } => {
            let chain = resolve_chain(&chain.chain)?;
            let dist = exact_a1_distribution(&chain, m)?;
            let tau2 = spectral_summary(&chain)?.tau2();
            let lambdas = if lambda.is_empty() { lambda_grid() } else { lambda };
            let rows = tail_table(&chain, &dist, tau2, &lambdas)?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
                w.write_record(["lambda", "exact_tail", "lezaud_bound"]).map_err(Error::from)?;
                for r in &rows {
                    w.write_record([
                        r.lambda.to_string(),
                        r.exact_tail.to_string(),
                        r.lezaud_bound.map(|b| b.value.to_string()).unwrap_or_default(),
                    ])
                    .map_err(Error::from)?;
                }
                w.flush()?;
            }
            Ok(json!({
                "artifact_version": ARTIFACT_VERSION,
                "chain_name": chain.name(),
                "gbar": chain.gbar(),
                "tau2": tau2,
                "distribution": dist,
                "tail_table": rows,
            }))
        }
        Command::Coverage(args) => run_coverage(args),
        Command::Gallery { list, export, out } => {
            if list {
                let entries = gallery()
                    .into_iter()
                    .map(|e| {
                        let spectrum = spectral_summary(&e.chain)?;
                        Ok(json!({
                            "name": e.name,
                            "states": e.chain.num_states(),
                            "closed_form_tau2": e.closed_form_tau2,
                            "tau2": spectrum.relaxation_time,
                            "gbar": e.chain.gbar(),
                            "notes": e.notes,
                        }))
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                return Ok(Value::Array(entries));
            }
            let name = export.expect("clap enforces --list or --export");
            let name = name.strip_prefix("gallery:").unwrap_or(&name);
            let definition = resolve_gallery(name)?.chain.to_definition();
            let value = serde_json::to_value(&definition).map_err(Error::from)?;
            if let Some(path) = out {
                std::fs::write(&path, definition.to_json_pretty()? + "\n")?;
                return Ok(json!({"exported": definition.name, "path": path}));
            }
            Ok(value)
        }
    }
}

fn configure_threads() {
    if let Some(threads) = std::env::var("RMCI_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Only fails if a pool was already built, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn emit_error(kind: &str, message: &str) {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                ErrorKind::InvalidSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
                    emit_error("UnknownSubcommand", &e.to_string());
                }
                _ => emit_error("FlagValidationError", &e.to_string()),
            }
            return ExitCode::from(2);
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(value) => {
            let text = serde_json::to_string_pretty(&value).expect("JSON value serializes");
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    emit_error("InternalError", &e.to_string());
                    ExitCode::from(1)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(Failure::Validation(kind, message)) => {
            emit_error(kind, &message);
            ExitCode::from(2)
        }
        Err(Failure::Internal(message)) => {
            emit_error("InternalError", &message);
            ExitCode::from(1)
        }
    }
}
