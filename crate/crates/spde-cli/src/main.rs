//! `spde`: runs scenarios, single-target experiments and the verification
//! suites, writing CSV, JSON and plot-data reports.
//!
//! Exit codes: 0 all checks pass (or nothing to run), 1 a check failed,
//! 2 error. `SPDE_SEED` overrides config seeds, `SPDE_WORKERS` sizes the
//! worker pool.

mod registry;

use clap::{Args, Parser, Subcommand};
use spde_core::brownian::NoiseMode;
use spde_core::harness::{run_criterion, run_suite, SuiteReport, CRITERIA};
use spde_core::linear::ConditionFlag;
use spde_core::scenario::{
    run_directory, run_scenario, stream_paths, write_artifacts, DirectoryRun, Problem, RunReport, RunStatus, ScenarioConfig, Tolerances,
};
use spde_core::semilinear::Nonlinearity;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spde",
    version,
    about = "Stochastic evolution equations by semigroup methods: simulation and verification"
)]
struct Cli {
    /// Print the full JSON report to stdout instead of the summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or every *.json scenario in a directory.
    Simulate {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<u64>,
        /// Also stream this many sample paths as CSV rows to --paths-csv.
        #[arg(long, requires = "paths_csv")]
        stream_paths: Option<u64>,
        #[arg(long)]
        paths_csv: Option<PathBuf>,
        /// Print the resolved config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Additive linear equation with deterministic F and G.
    Linear(LinearArgs),
    /// Semilinear equation with an F₁ from the nonlinearity registry.
    Semilinear(SemilinearArgs),
    /// Weighted Hölder membership of a registry profile.
    Holder(HolderArgs),
    /// Series E_{μ₁,μ₂} against its explicit bound.
    Volterra(VolterraArgs),
    /// Run a verification suite, one criterion, or a scenario directory.
    Verify {
        /// section2, section3, section4, section5 or all.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, conflicts_with = "scenarios")]
        criterion: Option<u8>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "spde-out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    paths: u64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 256)]
    steps: usize,
    /// increment or exact_gauss.
    #[arg(long, default_value = "increment", value_parser = parse_mode)]
    mode: NoiseMode,
    #[arg(long, default_value_t = 3.0)]
    se_multiplier: f64,
    #[arg(long, default_value = "spde-out")]
    out: PathBuf,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct Data {
    /// Operator, e.g. `dirichlet_laplacian1d:d=4` or `eigenvalues:values=1;4`.
    #[arg(long, default_value = "dirichlet_laplacian1d:d=4")]
    operator: String,
    /// Initial law, e.g. `deterministic:value=0.5;0.2;0.1;0.05`.
    #[arg(long, default_value = "deterministic:value=0.5;0.2;0.1;0.05")]
    initial: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args)]
struct LinearArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: Data,
    /// f1 or f2.
    #[arg(long, default_value = "f2", value_parser = parse_flag)]
    condition: ConditionFlag,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    sigma: f64,
    /// Profile of F, e.g. `power:coef=1,exponent=-0.5`.
    #[arg(long, default_value = "zero")]
    f: String,
    #[arg(long, default_value = "constant:value=1")]
    g: String,
}

#[derive(Args)]
struct SemilinearArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: Data,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    gamma: Option<f64>,
    /// Lipschitz condition against |A^η(x−y)| + |x−y|.
    #[arg(long)]
    critical: bool,
    /// Nonlinearity, e.g. `sine_eta:amplitude=1`.
    #[arg(long, default_value = "sine_eta:amplitude=1")]
    f1: String,
    #[arg(long, default_value = "constant:value=1")]
    f2: String,
    #[arg(long, default_value = "constant:value=1")]
    g: String,
}

#[derive(Args)]
struct HolderArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    f: String,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args)]
struct VolterraArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    mu1: f64,
    #[arg(long)]
    mu2: f64,
}

fn parse_mode(s: &str) -> Result<NoiseMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown noise mode '{s}' (increment, exact_gauss)"))
}

fn parse_flag(s: &str) -> Result<ConditionFlag, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown condition flag '{s}' (f1, f2)"))
}

/// Failure that maps to exit code 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("SPDE_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure(format!("SPDE_SEED must be a 64-bit unsigned integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

fn init_workers() -> Result<(), Failure> {
    if let Ok(s) = std::env::var("SPDE_WORKERS") {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure(format!("SPDE_WORKERS must be a positive integer, got '{s}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Flag seed, then `SPDE_SEED`, then the config value.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>, Failure> {
    Ok(flag.or(env_seed()?))
}

fn common_config(c: &Common, target: &str, problem: Problem) -> Result<ScenarioConfig, Failure> {
    let cfg = ScenarioConfig {
        name: c.name.clone().unwrap_or_else(|| target.to_string()),
        seed: resolve_seed(c.seed)?.unwrap_or(0),
        paths: c.paths,
        t_end: c.t_end,
        steps: c.steps,
        mode: c.mode,
        tolerances: Tolerances {
            se_multiplier: c.se_multiplier,
        },
        output_dir: Some(c.out.clone()),
        problem,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(r: &RunReport, json: bool) -> Result<(), Failure> {
    if json {
        println!("{}", serde_json::to_string_pretty(r)?);
        return Ok(());
    }
    for c in &r.checks {
        println!(
            "  {} {}: theory {:.6e}, empirical {:.6e} ± {:.2e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.theoretical,
            c.empirical,
            c.standard_error
        );
    }
    if let Some(f) = &r.failure {
        println!("  ERROR {f}");
    }
    println!("{} [{}]: {:?} ({:.2}s)", r.config.name, r.target, r.status, r.wall_clock_s);
    Ok(())
}

fn run_one(cfg: &ScenarioConfig, out: &Path, json: bool) -> Result<RunStatus, Failure> {
    let report = run_scenario(cfg);
    let files = write_artifacts(&report, out)?;
    print_report(&report, json)?;
    if !json {
        for f in files {
            println!("  wrote {}", f.display());
        }
    }
    Ok(report.status)
}

fn run_configured(common: &Common, target: &str, problem: Problem, json: bool) -> Result<RunStatus, Failure> {
    let cfg = common_config(common, target, problem)?;
    if common.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(RunStatus::Pass);
    }
    run_one(&cfg, &common.out, json)
}

fn suite_csv(report: &SuiteReport, path: &Path) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "criterion",
        "title",
        "seed",
        "check",
        "theoretical",
        "empirical",
        "standard_error",
        "pass",
    ])?;
    for c in &report.criteria {
        for k in &c.checks {
            w.write_record([
                c.id.to_string(),
                c.title.clone(),
                c.seed.to_string(),
                k.name.clone(),
                k.theoretical.to_string(),
                k.empirical.to_string(),
                k.standard_error.to_string(),
                k.pass.to_string(),
            ])?;
        }
    }
    for k in &report.supplementary {
        w.write_record([
            String::new(),
            "supplementary".into(),
            String::new(),
            k.name.clone(),
            k.theoretical.to_string(),
            k.empirical.to_string(),
            k.standard_error.to_string(),
            k.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn verify(suite: &str, criterion: Option<u8>, seed: Option<u64>, out: &Path, json: bool) -> Result<RunStatus, Failure> {
    let seed = resolve_seed(seed)?;
    let report = match criterion {
        Some(id) => {
            let c = run_criterion(id, seed)?;
            SuiteReport {
                suite: format!("criterion{id}"),
                supplementary: Vec::new(),
                pass: c.pass,
                wall_clock_s: c.wall_clock_s,
                criteria: vec![c],
            }
        }
        None => run_suite(suite, seed)?,
    };
    std::fs::create_dir_all(out)?;
    let stem = out.join(format!("verify-{}", report.suite));
    std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&report)?)?;
    suite_csv(&report, &stem.with_extension("csv"))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for c in &report.criteria {
            let title = CRITERIA.iter().find(|t| t.0 == c.id).map(|t| t.1).unwrap_or("");
            println!(
                "criterion {:>2} {} {title} ({:.1}s)",
                c.id,
                if c.pass { "PASS" } else { "FAIL" },
                c.wall_clock_s
            );
        }
        for k in &report.supplementary {
            println!("supplementary {} {}", if k.pass { "PASS" } else { "FAIL" }, k.name);
        }
        println!(
            "suite {}: {} ({:.1}s)",
            report.suite,
            if report.pass { "PASS" } else { "FAIL" },
            report.wall_clock_s
        );
    }
    Ok(if report.pass { RunStatus::Pass } else { RunStatus::CheckFail })
}

fn simulate_dir(dir: &Path, out: Option<&Path>, seed: Option<u64>, paths: Option<u64>, json: bool) -> Result<RunStatus, Failure> {
    let run = run_directory(dir, |cfg| {
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(p) = paths {
            cfg.paths = p;
        }
    })?;
    match &run {
        DirectoryRun::NothingToRun => println!("nothing to run: no *.json scenarios in {}", dir.display()),
        DirectoryRun::Ran { reports } => {
            for r in reports {
                let target = out
                    .map(Path::to_path_buf)
                    .or_else(|| r.config.output_dir.clone())
                    .unwrap_or_else(|| "spde-out".into());
                write_artifacts(r, &target)?;
                print_report(r, json)?;
            }
        }
    }
    Ok(run.status())
}

fn dispatch(cli: Cli) -> Result<RunStatus, Failure> {
    init_workers()?;
    let json = cli.json;
    match cli.command {
        Command::Simulate {
            path,
            out,
            seed,
            paths,
            stream_paths: stream,
            paths_csv,
            print_config,
        } => {
            let seed = resolve_seed(seed)?;
            if path.is_dir() {
                return simulate_dir(&path, out.as_deref(), seed, paths, json);
            }
            let mut cfg = ScenarioConfig::from_file(&path)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = paths {
                cfg.paths = p;
            }
            if print_config {
                println!("{}", serde_json::to_string_pretty(&cfg)?);
                return Ok(RunStatus::Pass);
            }
            if let (Some(k), Some(file)) = (stream, paths_csv) {
                stream_paths(&cfg, k, std::fs::File::create(&file)?)?;
            }
            let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "spde-out".into());
            run_one(&cfg, &out, json)
        }
        Command::Linear(a) => {
            let problem = Problem::Linear {
                operator: registry::parse(&a.data.operator, "kind")?,
                f: registry::parse(&a.f, "profile")?,
                g: registry::parse(&a.g, "profile")?,
                initial: registry::parse(&a.data.initial, "law")?,
                beta: a.beta,
                sigma: a.sigma,
                flag: a.condition,
                p: a.data.p,
            };
            run_configured(&a.common, "linear", problem, json)
        }
        Command::Semilinear(a) => {
            let f1: Nonlinearity = registry::parse(&a.f1, "kind")?;
            let problem = Problem::Semilinear {
                operator: registry::parse(&a.data.operator, "kind")?,
                f1,
                f2: registry::parse(&a.f2, "profile")?,
                g: registry::parse(&a.g, "profile")?,
                initial: registry::parse(&a.data.initial, "law")?,
                eta: a.eta,
                beta: a.beta,
                sigma: a.sigma,
                gamma: a.gamma,
                critical: a.critical,
                p: a.data.p,
                balls: None,
            };
            run_configured(&a.common, "semilinear", problem, json)
        }
        Command::Holder(a) => {
            let problem = Problem::Holder {
                f: registry::parse(&a.f, "profile")?,
                d: a.d,
                beta: a.beta,
                sigma: a.sigma,
                p: a.p,
            };
            run_configured(&a.common, "holder", problem, json)
        }
        Command::Volterra(a) => run_configured(&a.common, "volterra", Problem::Volterra { mu1: a.mu1, mu2: a.mu2 }, json),
        Command::Verify {
            suite,
            criterion,
            scenarios,
            seed,
            out,
        } => match scenarios {
            Some(dir) => simulate_dir(&dir, Some(&out), resolve_seed(seed)?, None, json),
            None => verify(&suite, criterion, seed, &out, json),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(s) => ExitCode::from(s.exit_code() as u8),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
