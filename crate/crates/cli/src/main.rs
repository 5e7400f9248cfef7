use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use papq::audit::{
    audit_mechanism, trial_rngs, write_audit_csv, ConstantMechanism, EmpiricalMean, FrontierPoint, Mechanism,
    PooledMean, PrvqMechanism, TraceConfig,
};
use papq::experiment::{run_experiment, with_workers, write_experiment_csv, ClassSpec, ExperimentSpec};
use papq::release::{evaluate_error, prvq_with_options, PrvqOptions, QueryRelease, ReleaseStructure};
use papq::{Distribution, DomainPoint, Error, Hypothesis};
use serde::de::DeserializeOwned;
use serde_json::json;

const AFTER_HELP: &str = "\
Randomness is fully determined by --seed; --workers never changes output.
Without --out, output goes to $PAPQ_OUT_DIR/<subcommand>.<ext> when that
variable is set, else to stdout.

CSV columns:
  bench: trial,mode,n,m,alpha,epsilon,delta,error,budget_exhausted,updates_used
  audit: trial,p,n,m,alpha,mechanism,tau,member_in_rate,nonmember_in_rate,max_query_error";

#[derive(Parser)]
#[command(name = "papq", version, about = "Public-data-assisted private query release", after_help = AFTER_HELP)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for trial-parallel commands.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the composed release and write the structure as JSON.
    Release(ReleaseArgs),
    /// Answer one query from a saved release.
    Query(QueryArgs),
    /// Exact worst-case error of a saved release under a distribution.
    Eval(EvalArgs),
    /// Fingerprinting audit of stump mechanisms over an (n, m, alpha) grid.
    Audit(AuditArgs),
    /// Monte Carlo experiment from a JSON spec; writes one CSV row per trial.
    Bench(BenchArgs),
    /// Sample-size calculators.
    CalcSamples(CalcArgs),
}

/// Experiment fields; each flag overrides the matching field of --config.
#[derive(Args, Clone, Default)]
struct SpecArgs {
    /// JSON experiment spec (path).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Class as JSON, or @path.
    #[arg(long)]
    class: Option<String>,
    /// Distribution as JSON, or @path.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    noise_off: bool,
}

#[derive(Args)]
struct ReleaseArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Private points as a JSON array (path); sampled from --dist otherwise.
    #[arg(long)]
    private: Option<PathBuf>,
    /// Public points as a JSON array (path); sampled from --dist otherwise.
    #[arg(long)]
    public: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    release: PathBuf,
    /// Hypothesis as JSON, or @path.
    #[arg(long, conflicts_with_all = ["cutoff", "stump"])]
    hypothesis: Option<String>,
    #[arg(long, conflicts_with = "stump")]
    cutoff: Option<f64>,
    /// 1-based stump index.
    #[arg(long)]
    stump: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    release: PathBuf,
    /// Distribution as JSON, or @path.
    #[arg(long)]
    dist: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum MechanismName {
    EmpiricalMean,
    PooledMean,
    Prvq,
    Constant,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 4096)]
    p: usize,
    /// Private rows; a comma list sweeps.
    #[arg(long, value_delimiter = ',', default_values_t = [32])]
    n: Vec<usize>,
    /// Public rows; a comma list sweeps.
    #[arg(long, value_delimiter = ',', default_values_t = [0])]
    m: Vec<usize>,
    /// Target accuracy; a comma list sweeps.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1])]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0.01)]
    fpr: f64,
    #[arg(long, default_value_t = 5000)]
    null_draws: usize,
    #[arg(long, default_value_t = 0)]
    nonmember_draws: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MechanismName::EmpiricalMean])]
    mechanism: Vec<MechanismName>,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_parser = ["pap", "public-only", "private-only"])]
    mode: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalcArgs {
    /// VC dimension.
    #[arg(long)]
    d: usize,
    /// Dual VC dimension.
    #[arg(long, required_unless_present = "dual_from_vc")]
    p: Option<usize>,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    c_n: f64,
    #[arg(long, default_value_t = 1.0)]
    c_m: f64,
    /// Bound the dual VC dimension by 2^(d+1).
    #[arg(long)]
    dual_from_vc: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Run(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: DeserializeOwned>(what: &str, arg: &str) -> CliResult<T> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--{what}: {e}")))
}

fn read_json_file<T: DeserializeOwned>(what: &str, path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{what} {}: {e}", path.display())))
}

/// Writes to `--out`, else `$PAPQ_OUT_DIR/<default_name>`, else stdout.
fn emit(out: Option<&Path>, default_name: &str, bytes: &[u8]) -> CliResult<()> {
    let target = out
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("PAPQ_OUT_DIR").map(|d| PathBuf::from(d).join(default_name)));
    match target {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, bytes)?;
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn build_spec(args: &SpecArgs, seed: u64, mode: Option<&str>, trials: Option<usize>) -> CliResult<ExperimentSpec> {
    let mut spec: serde_json::Value = match &args.config {
        Some(path) => read_json_file("config", path)?,
        None => json!({}),
    };
    let obj = spec
        .as_object_mut()
        .ok_or_else(|| CliError::Usage("config must be a JSON object".into()))?;
    let mut set = |key: &str, v: serde_json::Value| {
        obj.insert(key.to_string(), v);
    };
    if let Some(c) = &args.class {
        set(
            "class",
            serde_json::to_value(read_json::<ClassSpec>("class", c)?).expect("value"),
        );
    }
    if let Some(d) = &args.dist {
        set(
            "distribution",
            serde_json::to_value(read_json::<Distribution>("dist", d)?).expect("value"),
        );
    }
    if let Some(v) = args.n {
        set("n", json!(v));
    }
    if let Some(v) = args.m {
        set("m", json!(v));
    }
    if let Some(v) = args.alpha {
        set("alpha", json!(v));
    }
    if let Some(v) = args.beta {
        set("beta", json!(v));
    }
    if let Some(v) = args.eps {
        set("epsilon", json!(v));
    }
    if let Some(v) = args.delta {
        set("delta", json!(v));
    }
    if args.noise_off {
        set("noise_off", json!(true));
    }
    if let Some(v) = mode {
        set("mode", json!(v));
    }
    if let Some(v) = trials {
        set("trials", json!(v));
    }
    obj.entry("mode").or_insert(json!("pap"));
    obj.entry("trials").or_insert(json!(1));
    obj.entry("beta").or_insert(json!(0.1));
    obj.insert("seed".into(), json!(seed));
    serde_json::from_value(spec).map_err(|e| CliError::Usage(format!("experiment spec: {e}")))
}

fn cmd_release(args: &ReleaseArgs, seed: u64) -> CliResult<()> {
    let spec = build_spec(&args.spec, seed, Some("pap"), Some(1))?;
    spec.validate()?;
    let class = spec.class.build()?;
    let (mut data_rng, mut mech_rng) = trial_rngs(seed, 0);
    let w: Vec<DomainPoint> = match &args.public {
        Some(p) => read_json_file("public data", p)?,
        None => spec.distribution.sample_n(spec.m, &mut data_rng),
    };
    let x: Vec<DomainPoint> = match &args.private {
        Some(p) => read_json_file("private data", p)?,
        None => spec.distribution.sample_n(spec.n, &mut data_rng),
    };
    let opts = PrvqOptions {
        noise_off: spec.noise_off,
        ..PrvqOptions::default()
    };
    let g = prvq_with_options(
        &x,
        &w,
        &class,
        spec.alpha,
        spec.beta,
        spec.epsilon.unwrap_or(1.0),
        spec.delta.unwrap_or(1e-5),
        &opts,
        &mut mech_rng,
    )?;
    let mut text = g.to_json()?;
    text.push('\n');
    emit(args.out.as_deref(), "release.json", text.as_bytes())
}

fn load_release(path: &Path) -> CliResult<ReleaseStructure> {
    let text = std::fs::read_to_string(path)?;
    ReleaseStructure::from_json(&text).map_err(CliError::from)
}

fn cmd_query(args: &QueryArgs) -> CliResult<()> {
    let g = load_release(&args.release)?;
    let h = match (&args.hypothesis, args.cutoff, args.stump) {
        (Some(text), _, _) => read_json::<Hypothesis>("hypothesis", text)?,
        (None, Some(c), _) => Hypothesis::threshold(c),
        (None, None, Some(j)) => Hypothesis::stump(j),
        _ => return Err(CliError::Usage("give --hypothesis, --cutoff or --stump".into())),
    };
    let answer = g.answer(&h)?;
    emit(
        args.out.as_deref(),
        "query.json",
        &json_bytes(&json!({ "hypothesis": h, "answer": answer })),
    )
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let g = load_release(&args.release)?;
    let dist: Distribution = read_json("dist", &args.dist)?;
    let report = evaluate_error(&g, &dist, g.cover().class(), None)?;
    emit(
        args.out.as_deref(),
        "eval.json",
        &json_bytes(&serde_json::to_value(report).expect("value")),
    )
}

fn cmd_audit(args: &AuditArgs, seed: u64) -> CliResult<()> {
    let mut grid = Vec::new();
    for &n in &args.n {
        for &m in &args.m {
            for &alpha in &args.alpha {
                grid.push(FrontierPoint { n, m, alpha });
            }
        }
    }
    let mut reports = Vec::new();
    for &name in &args.mechanism {
        for pt in &grid {
            let cfg = TraceConfig {
                p: args.p,
                n: pt.n,
                m: pt.m,
                alpha: pt.alpha,
                trials: args.trials,
                fpr_target: args.fpr,
                null_calibration_draws: args.null_draws,
                nonmember_draws: args.nonmember_draws,
            };
            let mech: Box<dyn Mechanism> = match name {
                MechanismName::EmpiricalMean => Box::new(EmpiricalMean),
                MechanismName::PooledMean => Box::new(PooledMean),
                MechanismName::Constant => Box::new(ConstantMechanism(0.0)),
                MechanismName::Prvq => Box::new(PrvqMechanism::new(pt.alpha, args.beta, args.eps, args.delta)),
            };
            reports.push(audit_mechanism(mech.as_ref(), &cfg, seed)?);
        }
    }
    let mut buf = Vec::new();
    write_audit_csv(&reports, &mut buf)?;
    emit(args.out.as_deref(), "audit.csv", &buf)
}

fn cmd_bench(args: &BenchArgs, seed: u64) -> CliResult<()> {
    let mut spec = build_spec(&args.spec, seed, args.mode.as_deref(), args.trials)?;
    if args.grid_size.is_some() {
        spec.grid_size = args.grid_size;
    }
    let rows = run_experiment(&spec)?;
    let mut buf = Vec::new();
    write_experiment_csv(&rows, &mut buf)?;
    let out = args.out.clone().or_else(|| spec.output.clone());
    emit(out.as_deref(), "bench.csv", &buf)
}

fn cmd_calc(args: &CalcArgs) -> CliResult<()> {
    let (bounds, p_used) = if args.dual_from_vc {
        let b = papq::theorem1_samples_dual_from_vc(
            args.d, args.alpha, args.beta, args.eps, args.delta, args.c_n, args.c_m,
        )?;
        (b, json!(format!("2^{}", args.d + 1)))
    } else {
        let p = args.p.expect("required by clap");
        let b = papq::theorem1_samples(
            args.d, p, args.alpha, args.beta, args.eps, args.delta, args.c_n, args.c_m,
        )?;
        (b, json!(p))
    };
    let out = json!({
        "n": bounds.n,
        "m": bounds.m,
        "formula": {
            "n": "ceil(c_n * (d ln(1/alpha) + ln(1/beta))^1.5 * sqrt(p ln(1/delta)) / (eps alpha^2))",
            "m": "ceil(c_m * (d ln(1/alpha) + ln(1/beta)) / alpha)",
        },
        "constants": { "c_n": args.c_n, "c_m": args.c_m },
        "inputs": {
            "d": args.d, "p": p_used, "alpha": args.alpha, "beta": args.beta,
            "eps": args.eps, "delta": args.delta,
        },
    });
    std::io::stdout().write_all(&json_bytes(&out))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    with_workers(cli.workers, move || {
        let r = match &cli.command {
            Command::Release(a) => cmd_release(a, seed),
            Command::Query(a) => cmd_query(a),
            Command::Eval(a) => cmd_eval(a),
            Command::Audit(a) => cmd_audit(a, seed),
            Command::Bench(a) => cmd_bench(a, seed),
            Command::CalcSamples(a) => cmd_calc(a),
        };
        Ok(r)
    })
    .map_err(CliError::from)?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
