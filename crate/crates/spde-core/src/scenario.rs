//! Scenario configuration files, single-scenario runs and their artifacts.
//!
//! A scenario is a JSON object with run parameters (name, seed, paths,
//! horizon, steps, noise mode, tolerances, output directory) and a `problem`
//! object tagged by `target`. A run writes `<name>.csv` (RFC 4180 time
//! series), `<name>.json` (report with the resolved config echo) and
//! `<name>.plot.dat` (whitespace-separated columns).

use crate::brownian::{NoiseMode, TimeGrid};
use crate::ensemble::Ensemble;
use crate::error::{Result, SpdeError};
use crate::harness::CheckRecord;
use crate::holder::{membership_check, WeightedHolderSample};
use crate::initial::InitialLaw;
use crate::linear::{convolution_covariance_oracle, regularity_report, solve_linear_additive, AdditiveLinearSpec, ConditionFlag};
use crate::multiplicative::{
    forward_march, moment_bound_report, solve_ensemble, solve_local, CoefficientDescriptor, CoefficientFamily, PicardOptions, ProblemSpec,
};
use crate::profile::Profile;
use crate::sectorial::OperatorSpec;
use crate::semilinear::{
    chaining_check, forward_solution, moment_profile_check, more_regular_check, picard_ensemble, Balls, Exponents, Nonlinearity, SemilinearOptions,
    SemilinearSpec,
};
use crate::stats::MomentAccumulator;
use crate::volterra::{e_bound, e_series};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Monte Carlo comparisons pass within this many standard errors.
    #[serde(default = "three")]
    pub se_multiplier: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { se_multiplier: 3.0 }
    }
}

fn three() -> f64 {
    3.0
}

fn two() -> f64 {
    2.0
}

fn default_paths() -> u64 {
    1000
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: u64,
    pub t_end: f64,
    pub steps: usize,
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub problem: Problem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum Problem {
    Multiplicative {
        operator: OperatorSpec,
        f: CoefficientDescriptor,
        g: CoefficientDescriptor,
        initial: InitialLaw,
        #[serde(default = "two")]
        p: f64,
        #[serde(default = "half")]
        safety: f64,
        /// Truncation levels; nonempty selects the local solver.
        #[serde(default)]
        levels: Vec<f64>,
    },
    Linear {
        operator: OperatorSpec,
        f: Profile,
        g: Profile,
        initial: InitialLaw,
        beta: f64,
        sigma: f64,
        flag: ConditionFlag,
        #[serde(default = "two")]
        p: f64,
    },
    Semilinear {
        operator: OperatorSpec,
        f1: Nonlinearity,
        f2: Profile,
        g: Profile,
        initial: InitialLaw,
        eta: f64,
        beta: f64,
        sigma: f64,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        critical: bool,
        #[serde(default = "two")]
        p: f64,
        #[serde(default)]
        balls: Option<Balls>,
    },
    Holder {
        f: Profile,
        #[serde(default = "one_usize")]
        d: usize,
        beta: f64,
        sigma: f64,
        #[serde(default = "two")]
        p: f64,
    },
    Volterra {
        mu1: f64,
        mu2: f64,
    },
}

fn one_usize() -> usize {
    1
}

const TOP_KEYS: [&str; 9] = ["name", "seed", "paths", "t_end", "steps", "mode", "tolerances", "output_dir", "problem"];

/// Allowed `problem` keys per target.
pub const TARGETS: [(&str, &[&str]); 5] = [
    ("multiplicative", &["operator", "f", "g", "initial", "p", "safety", "levels"]),
    ("linear", &["operator", "f", "g", "initial", "beta", "sigma", "flag", "p"]),
    (
        "semilinear",
        &[
            "operator", "f1", "f2", "g", "initial", "eta", "beta", "sigma", "gamma", "critical", "p", "balls",
        ],
    ),
    ("holder", &["f", "d", "beta", "sigma", "p"]),
    ("volterra", &["mu1", "mu2"]),
];

impl ScenarioConfig {
    /// Parses and validates a scenario; unknown keys are all listed.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let obj = v.as_object().ok_or_else(|| SpdeError::Config("scenario must be a JSON object".into()))?;
        let mut bad: Vec<String> = obj.keys().filter(|k| !TOP_KEYS.contains(&k.as_str())).cloned().collect();
        if let Some(p) = obj.get("problem").and_then(|p| p.as_object()) {
            let target = p.get("target").and_then(|t| t.as_str()).unwrap_or("");
            let names: Vec<&str> = TARGETS.iter().map(|t| t.0).collect();
            let allowed = TARGETS
                .iter()
                .find(|t| t.0 == target)
                .map(|t| t.1)
                .ok_or_else(|| SpdeError::Config(format!("problem.target '{target}' is not one of: {}", names.join(", "))))?;
            bad.extend(
                p.keys()
                    .filter(|k| *k != "target" && !allowed.contains(&k.as_str()))
                    .map(|k| format!("problem.{k}")),
            );
        }
        if !bad.is_empty() {
            bad.sort();
            return Err(SpdeError::Config(format!("unknown keys: {}", bad.join(", "))));
        }
        let cfg: ScenarioConfig = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_end, self.steps)
    }

    /// Builds every model object once so invalid parameters surface before
    /// any simulation.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: SpdeError| SpdeError::Config(format!("scenario '{}': {e}", self.name));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(SpdeError::Config("name must be a nonempty file stem".into()));
        }
        self.grid().map_err(cfg)?;
        match &self.problem {
            Problem::Multiplicative { .. } => {
                self.multiplicative().map_err(cfg)?;
            }
            Problem::Linear { .. } => {
                self.linear().map_err(cfg)?;
            }
            Problem::Semilinear { .. } => {
                self.semilinear().map_err(cfg)?;
            }
            Problem::Holder { beta, sigma, .. } => {
                if !(*sigma > 0.0 && sigma < beta && *beta <= 1.0) {
                    return Err(cfg(SpdeError::InvalidParameter(format!(
                        "need 0 < σ < β ≤ 1, got σ = {sigma}, β = {beta}"
                    ))));
                }
            }
            Problem::Volterra { mu1, mu2 } => {
                if !(*mu1 > 0.0 && *mu2 > 0.0) {
                    return Err(cfg(SpdeError::InvalidParameter("need μ₁, μ₂ > 0".into())));
                }
            }
        }
        Ok(())
    }

    fn multiplicative(&self) -> Result<ProblemSpec> {
        match &self.problem {
            Problem::Multiplicative {
                operator, f, g, initial, p, ..
            } => ProblemSpec::new(operator.build()?, f.clone(), g.clone(), initial.clone(), self.t_end, *p),
            _ => unreachable!(),
        }
    }

    fn linear(&self) -> Result<AdditiveLinearSpec> {
        match &self.problem {
            Problem::Linear {
                operator,
                f,
                g,
                initial,
                beta,
                sigma,
                flag,
                p,
            } => AdditiveLinearSpec::new(
                operator.build()?,
                f.clone(),
                g.clone(),
                initial.clone(),
                *beta,
                *sigma,
                *flag,
                self.t_end,
                *p,
            ),
            _ => unreachable!(),
        }
    }

    fn semilinear(&self) -> Result<SemilinearSpec> {
        match &self.problem {
            Problem::Semilinear {
                operator,
                f1,
                f2,
                g,
                initial,
                eta,
                beta,
                sigma,
                gamma,
                critical,
                p,
                ..
            } => SemilinearSpec::new(
                operator.build()?,
                f1.clone(),
                f2.clone(),
                g.clone(),
                initial.clone(),
                Exponents {
                    eta: *eta,
                    beta: *beta,
                    sigma: *sigma,
                    gamma: *gamma,
                },
                *critical,
                self.t_end,
                *p,
            ),
            _ => unreachable!(),
        }
    }

    pub fn target(&self) -> &'static str {
        match self.problem {
            Problem::Multiplicative { .. } => "multiplicative",
            Problem::Linear { .. } => "linear",
            Problem::Semilinear { .. } => "semilinear",
            Problem::Holder { .. } => "holder",
            Problem::Volterra { .. } => "volterra",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pass,
    CheckFail,
    Error,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Pass => 0,
            RunStatus::CheckFail => 1,
            RunStatus::Error => 2,
        }
    }

    /// The worse of two statuses.
    pub fn combine(self, other: RunStatus) -> RunStatus {
        if self.exit_code() >= other.exit_code() {
            self
        } else {
            other
        }
    }
}

/// Columnar time series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| SpdeError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| SpdeError::Io(e.to_string()))
    }

    pub fn to_plot_dat(&self) -> String {
        let mut s = format!("# {}\n", self.columns.join(" "));
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub target: String,
    pub checks: Vec<CheckRecord>,
    /// Target-specific structured output (certificates, fitted exponents).
    pub details: Value,
    pub failure: Option<String>,
    pub status: RunStatus,
    pub wall_clock_s: f64,
    pub version: String,
    #[serde(skip)]
    pub series: Table,
}

struct Outcome {
    checks: Vec<CheckRecord>,
    series: Table,
    details: Value,
}

/// Runs one scenario. A numeric failure mid-run yields a partial report
/// with status `Error` rather than an `Err`.
pub fn run_scenario(config: &ScenarioConfig) -> RunReport {
    let t0 = Instant::now();
    let result = config.validate().and_then(|_| dispatch(config));
    let (checks, series, details, failure) = match result {
        Ok(o) => (o.checks, o.series, o.details, None),
        Err(e) => (Vec::new(), Table::default(), Value::Null, Some(e.to_string())),
    };
    let status = if failure.is_some() {
        RunStatus::Error
    } else if checks.iter().all(|c| c.pass) {
        RunStatus::Pass
    } else {
        RunStatus::CheckFail
    };
    RunReport {
        config: config.clone(),
        target: config.target().into(),
        checks,
        details,
        failure,
        status,
        wall_clock_s: t0.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
        series,
    }
}

/// Writes the CSV, JSON and plot-data artifacts of a report into `dir`.
pub fn write_artifacts(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = &report.config.name;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let dat_path = dir.join(format!("{stem}.plot.dat"));
    std::fs::write(&csv_path, report.series.to_csv()?)?;
    std::fs::write(&json_path, serde_json::to_string_pretty(report)?)?;
    std::fs::write(&dat_path, report.series.to_plot_dat())?;
    Ok(vec![csv_path, json_path, dat_path])
}

fn dispatch(c: &ScenarioConfig) -> Result<Outcome> {
    match c.problem {
        Problem::Multiplicative { .. } => run_multiplicative(c),
        Problem::Linear { .. } => run_linear(c),
        Problem::Semilinear { .. } => run_semilinear(c),
        Problem::Holder { .. } => run_holder(c),
        Problem::Volterra { .. } => run_volterra(c),
    }
}

fn ensemble(c: &ScenarioConfig) -> Ensemble {
    Ensemble::new(c.seed, c.paths)
}

/// E|X(T)|² of dX = −AX dt + v dw (coordinatewise) under the scheme: exact
/// for `exact_gauss`, the left-point sum for `increment`.
fn ou_oracle(lam: &[f64], xi: &[f64], v: f64, grid: &TimeGrid, mode: NoiseMode) -> f64 {
    let t = grid.t_end;
    lam.iter()
        .zip(xi)
        .map(|(&l, &x)| {
            let noise = match mode {
                NoiseMode::ExactGauss => -(-2.0 * l * t).exp_m1() / (2.0 * l),
                NoiseMode::Increment => (0..grid.steps).map(|k| (-2.0 * l * (t - grid.node(k))).exp() * grid.dt()).sum(),
            };
            (-2.0 * l * t).exp() * x * x + v * v * noise
        })
        .sum()
}

fn run_multiplicative(c: &ScenarioConfig) -> Result<Outcome> {
    let (safety, levels) = match &c.problem {
        Problem::Multiplicative { safety, levels, .. } => (*safety, levels.clone()),
        _ => unreachable!(),
    };
    let prob = c.multiplicative()?;
    let grid = c.grid()?;
    let opts = PicardOptions {
        mode: c.mode,
        safety,
        ..Default::default()
    };
    let k = c.tolerances.se_multiplier;
    if !levels.is_empty() {
        let n = levels.len();
        let acc = ensemble(c).try_map_reduce(
            || MomentAccumulator::new(n + 1),
            |acc, i| {
                let l = solve_local(&prob, &grid, c.seed, i, &levels, &opts)?;
                let mut row = l.tau.clone();
                row.push(l.blow_up as u8 as f64);
                acc.push(&row);
                Ok(())
            },
            |a, b| a.merge(&b),
        )?;
        let mut series = Table::new(&["level", "tau_mean", "tau_se"]);
        for (j, lv) in levels.iter().enumerate() {
            let e = acc.estimate(j);
            series.rows.push(vec![*lv, e.mean, e.se]);
        }
        return Ok(Outcome {
            checks: vec![CheckRecord::flag("levels glued bitwise before tau_n", true)],
            series,
            details: serde_json::json!({ "blow_up_fraction": acc.mean(n) }),
        });
    }
    let sol = solve_ensemble(&prob, &grid, &ensemble(c), &[], &opts)?;
    let p = prob.p();
    let mut checks = Vec::new();
    let mb = moment_bound_report(&prob, &sol)?;
    checks.push(CheckRecord::new(
        format!("moment bound alpha p={p}"),
        mb.alpha_theory,
        mb.alpha_empirical.mean,
        mb.alpha_empirical.se,
        mb.pass,
    ));
    for (m, r) in sol.worst_ratios().iter().take(5).enumerate() {
        checks.push(CheckRecord::new(
            format!("iterate ratio {}", m + 1),
            safety,
            r.mean,
            r.se,
            r.mean <= safety + k * r.se,
        ));
    }
    if let (CoefficientFamily::Zero, CoefficientFamily::Constant { value }, InitialLaw::Deterministic { value: xi }, None, None) =
        (&prob.f.family, &prob.g.family, &prob.initial, prob.f.truncation, prob.g.truncation)
    {
        if p == 2.0 {
            let oracle = ou_oracle(prob.operator.eigenvalues(), xi, *value, &grid, c.mode);
            let est = sol.moment(2.0).expect("order 2")[grid.steps];
            checks.push(CheckRecord::within_se("OU second moment at T", oracle, est, k));
        }
    }
    let m2 = sol.moment(2.0).expect("order 2");
    let mp = sol.moment(p).expect("order p");
    let mut series = Table::new(&["t", "m2", "m2_se", "mp", "mp_se"]);
    for (j, t) in grid.nodes().iter().enumerate() {
        series.rows.push(vec![*t, m2[j].mean, m2[j].se, mp[j].mean, mp[j].se]);
    }
    Ok(Outcome {
        checks,
        series,
        details: serde_json::json!({
            "horizon": sol.horizon,
            "window_steps": sol.window_steps,
            "max_iterations": sol.max_iterations,
        }),
    })
}

fn run_linear(c: &ScenarioConfig) -> Result<Outcome> {
    let spec = c.linear()?;
    let grid = c.grid()?;
    let r = regularity_report(&spec, &grid, &ensemble(c), c.mode)?;
    let mut checks = vec![
        CheckRecord::flag("second moment below the regularity bound", r.moment_pass),
        CheckRecord::flag("A^beta jumps shrink under refinement", r.jumps_shrink),
        CheckRecord::flag("increment bound K h^(2 beta)", r.increment_pass),
    ];
    if let Some(k) = &r.kolmogorov {
        checks.push(CheckRecord::new(
            "Kolmogorov exponent >= beta - 0.1",
            spec.beta - 0.1,
            k.exponent,
            k.exponent_se,
            r.exponent_pass,
        ));
    }
    if let (true, InitialLaw::Deterministic { value: xi }, true) = (spec.f.is_zero(), &spec.initial, spec.p() == 2.0) {
        let lam = spec.operator.eigenvalues();
        let t = grid.t_end;
        let det: f64 = lam.iter().zip(xi).map(|(l, x)| (-2.0 * l * t).exp() * x * x).sum();
        if c.mode == NoiseMode::ExactGauss {
            let oracle = det + convolution_covariance_oracle(&spec.operator, &spec.g, t, 1e-10)?;
            checks.push(CheckRecord::within_se(
                "second moment at T against the covariance oracle",
                oracle,
                r.second_moment[grid.steps],
                c.tolerances.se_multiplier,
            ));
        }
    }
    let mut series = Table::new(&["t", "m2", "m2_se", "beta_moment", "beta_moment_se", "bound"]);
    for (j, t) in r.times.iter().enumerate() {
        let (m, b) = (r.second_moment[j], r.beta_moment[j]);
        series.rows.push(vec![*t, m.mean, m.se, b.mean, b.se, r.bound[j]]);
    }
    Ok(Outcome {
        checks,
        series,
        details: serde_json::json!({ "constants": r.constants, "kolmogorov": r.kolmogorov, "increments": r.increment_checks }),
    })
}

fn run_semilinear(c: &ScenarioConfig) -> Result<Outcome> {
    let spec = c.semilinear()?;
    let cert = spec.certificate()?;
    let horizon = c.t_end.min(cert.t_local);
    let grid = TimeGrid::new(horizon, c.steps)?;
    let opts = SemilinearOptions {
        mode: c.mode,
        ..Default::default()
    };
    let ens = ensemble(c);
    let mut checks = vec![CheckRecord::flag("certificate self-consistency", cert.self_consistent)];
    let pic = picard_ensemble(&spec, &grid, &ens, &opts)?;
    checks.push(CheckRecord::flag("iterates stay in the admissible set", pic.membership_pass));
    for (m, r) in pic.ratios.iter().take(5).enumerate() {
        checks.push(CheckRecord::new(
            format!("weighted-norm ratio {}", m + 1),
            pic.factor,
            r.mean,
            r.se,
            r.mean <= pic.factor + c.tolerances.se_multiplier * r.se,
        ));
    }
    let chain = chaining_check(&spec, &grid, c.seed, 0, &opts)?;
    checks.push(CheckRecord::flag("restart from the midpoint reproduces the path", chain.bitwise_equal));
    let mp = moment_profile_check(&spec, &grid, &ens, c.mode)?;
    checks.push(CheckRecord::new(
        "moment bound",
        mp.moment_constant,
        mp.moment.iter().map(|e| e.mean).fold(0.0, f64::max),
        0.0,
        mp.moment_pass,
    ));
    if !spec.critical {
        checks.push(CheckRecord::flag("A^eta moment below its pointwise bound", mp.eta_pass));
    }
    let more = match spec.exponents.gamma {
        Some(_) => {
            let r = more_regular_check(&spec, &grid, &ens, c.mode)?;
            checks.push(CheckRecord::new("gamma profile slope", 0.0, r.gamma_slope, 0.0, r.gamma_pass));
            checks.push(CheckRecord::new(
                "A^eta decay slope >= -2 varrho",
                -2.0 * r.varrho,
                r.eta_slope,
                0.0,
                r.eta_pass,
            ));
            Some(r)
        }
        None => None,
    };
    let mut series = Table::new(&["t", "moment", "moment_se", "moment_bound", "eta_moment", "eta_moment_se", "eta_bound"]);
    for (j, t) in mp.times.iter().enumerate() {
        let (e, eb) = match (mp.eta_moment.get(j), mp.eta_bound.get(j)) {
            (Some(e), Some(b)) => (*e, *b),
            _ => (Default::default(), f64::NAN),
        };
        series
            .rows
            .push(vec![*t, mp.moment[j].mean, mp.moment[j].se, mp.moment_constant, e.mean, e.se, eb]);
    }
    Ok(Outcome {
        checks,
        series,
        details: serde_json::json!({ "certificate": cert, "picard": pic, "chaining": chain, "more_regular": more }),
    })
}

fn run_holder(c: &ScenarioConfig) -> Result<Outcome> {
    let (f, d, beta, sigma, p) = match &c.problem {
        Problem::Holder { f, d, beta, sigma, p } => (f.clone(), *d, *beta, *sigma, *p),
        _ => unreachable!(),
    };
    let grid = c.grid()?;
    let sample = WeightedHolderSample::from_fn(&grid, d, beta, sigma, p, |t| vec![f.eval(t); d])?;
    let m = membership_check(&sample, 1e-6);
    let mut series = Table::new(&["t", "weighted_value"]);
    for k in 0..sample.len() {
        let t = sample.times[k];
        series.rows.push(vec![t, t.powf(1.0 - beta) * sample.at(k)[0]]);
    }
    Ok(Outcome {
        checks: vec![CheckRecord::flag("F^{beta,sigma} membership", m.member)],
        series,
        details: serde_json::to_value(&m)?,
    })
}

fn run_volterra(c: &ScenarioConfig) -> Result<Outcome> {
    let (mu1, mu2) = match c.problem {
        Problem::Volterra { mu1, mu2 } => (mu1, mu2),
        _ => unreachable!(),
    };
    let grid = c.grid()?;
    let mut series = Table::new(&["t", "series", "bound"]);
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for t in grid.nodes() {
        let s = e_series(mu1, mu2, t, 1e-12)?.value;
        let b = e_bound(mu1, mu2, t);
        ok &= s <= b;
        worst = worst.min(b / s);
        series.rows.push(vec![t, s, b]);
    }
    Ok(Outcome {
        checks: vec![CheckRecord::new("series below its explicit bound", 1.0, worst, 0.0, ok)],
        series,
        details: serde_json::json!({ "min_bound_ratio": worst }),
    })
}

/// Streams the first `count` paths as CSV rows (path_index, t, x_1, …, x_d).
/// Semilinear paths stop at min(T, T_local).
pub fn stream_paths<W: Write>(c: &ScenarioConfig, count: u64, out: W) -> Result<()> {
    c.validate()?;
    let mut grid = c.grid()?;
    let solve: Box<dyn Fn(u64) -> Result<crate::brownian::AdaptedProcess>> = match c.problem {
        Problem::Multiplicative { .. } => {
            let prob = c.multiplicative()?;
            Box::new(move |i| forward_march(&prob, &grid, c.seed, i, c.mode))
        }
        Problem::Linear { .. } => {
            let spec = c.linear()?;
            Box::new(move |i| Ok(solve_linear_additive(&spec, &grid, c.seed, i, c.mode)?.x))
        }
        Problem::Semilinear { .. } => {
            let spec = c.semilinear()?;
            grid = TimeGrid::new(c.t_end.min(spec.certificate()?.t_local), c.steps)?;
            Box::new(move |i| forward_solution(&spec, &grid, c.seed, i, c.mode))
        }
        _ => return Err(SpdeError::Config(format!("target '{}' has no sample paths", c.target()))),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["path_index".to_string(), "t".to_string()];
    for i in 0..count.min(c.paths) {
        let x = solve(i)?;
        let d = x.flat().len() / grid.nodes().len();
        if i == 0 {
            header.extend((1..=d).map(|j| format!("x{j}")));
            w.write_record(&header)?;
        }
        for (k, t) in grid.nodes().iter().enumerate() {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(x.at(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DirectoryRun {
    /// No `*.json` scenario in the directory; exit code 0.
    NothingToRun,
    Ran {
        reports: Vec<RunReport>,
    },
}

impl DirectoryRun {
    pub fn status(&self) -> RunStatus {
        match self {
            DirectoryRun::NothingToRun => RunStatus::Pass,
            DirectoryRun::Ran { reports } => reports.iter().fold(RunStatus::Pass, |s, r| s.combine(r.status)),
        }
    }
}

/// Sorted `*.json` files of a scenario directory.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().map(|x| x == "json").unwrap_or(false))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every scenario in `dir` in file-name order, with `configure`
/// applied to each parsed config.
pub fn run_directory(dir: &Path, configure: impl Fn(&mut ScenarioConfig)) -> Result<DirectoryRun> {
    let files = scenario_files(dir)?;
    if files.is_empty() {
        return Ok(DirectoryRun::NothingToRun);
    }
    let mut reports = Vec::new();
    for f in files {
        let mut cfg = ScenarioConfig::from_file(&f).map_err(|e| SpdeError::Config(format!("{}: {e}", f.display())))?;
        configure(&mut cfg);
        reports.push(run_scenario(&cfg));
    }
    Ok(DirectoryRun::Ran { reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: &str = r#"{
        "name": "ou-baseline", "seed": 7, "paths": 20000, "t_end": 1.0, "steps": 64, "mode": "exact_gauss",
        "problem": {"target": "multiplicative", "operator": {"kind": "eigenvalues", "values": [1.0]},
                    "f": {"family": "zero"}, "g": {"family": "constant", "value": 1.0},
                    "initial": {"law": "deterministic", "value": [0.0]}}
    }"#;

    #[test]
    fn ou_baseline_reports_the_oracle() {
        let cfg = ScenarioConfig::from_json(OU).unwrap();
        let r = run_scenario(&cfg);
        assert_eq!(r.status, RunStatus::Pass, "{:?}", r.checks);
        let ou = r.checks.iter().find(|c| c.name == "OU second moment at T").unwrap();
        assert!((ou.theoretical - 0.432332).abs() < 1e-6);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = OU
            .replace("\"seed\": 7", "\"sede\": 7, \"pahts\": 3")
            .replace("\"f\":", "\"ff\": 1, \"f\":");
        let e = ScenarioConfig::from_json(&text).unwrap_err().to_string();
        assert!(e.contains("pahts") && e.contains("sede") && e.contains("problem.ff"), "{e}");
    }

    #[test]
    fn exponent_chain_is_named() {
        let text = r#"{"name": "bad", "t_end": 1.0, "steps": 8, "problem": {"target": "semilinear",
            "operator": {"kind": "eigenvalues", "values": [1.0]}, "f1": {"kind": "zero"},
            "f2": {"profile": "zero"}, "g": {"profile": "zero"}, "initial": {"law": "deterministic", "value": [1.0]},
            "eta": 0.3, "beta": 0.35, "sigma": 0.1}}"#;
        let e = ScenarioConfig::from_json(text).unwrap_err().to_string();
        assert!(e.contains("max(0, 2η − 1/2) < β < η"), "{e}");
    }

    #[test]
    fn csv_is_rfc4180() {
        let t = Table {
            columns: vec!["t".into(), "a,b".into()],
            rows: vec![vec![0.0, 1.5]],
        };
        assert_eq!(t.to_csv().unwrap(), "t,\"a,b\"\n0,1.5\n");
    }
}
