//! Command-line front end.
//!
//! Exit codes: 0 success, 2 data/spec/JSON errors, 3 solver non-convergence
//! (the fit report is still written).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::{GroupSpec, GroupedDesign, Standardization};
use crate::error::{Error, Result};
use crate::inference::sandwich_covariance;
use crate::io::{extract, parse_list, GroupMap, Lag, RowRange, Table};
use crate::loss::{estimate_tau_with, mean_and_variance, LossSpec, TauScale};
use crate::simulate::{
    gamma_sweep, run, signal_sweep, write_audit, write_summary, EstimatorConfig, ScenarioSpec, SimulationReport,
    SummaryRow,
};
use crate::solver::{adaptive_weights, fit_penalized, fit_unpenalized, FitResult, GroupWeight, PenaltySpec, SolverOptions};
use crate::tuning::{check_conditions, lambda_schedule, RateExponents, RegimeSpec, Schedule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Parser)]
#[command(name = "aglq", version, about = "Adaptive group LASSO under the asymmetric L_q loss")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a CSV data set and write a coefficient report.
    Fit(FitArgs),
    /// MAD and residual variance of a fitted report on a data set.
    Evaluate(EvaluateArgs),
    /// Run Monte Carlo scenarios from JSON files.
    Simulate(SimulateArgs),
    /// Sweep gamma or the signal strength of a scenario.
    Sweep(SweepArgs),
    /// Check the rate conditions of a tuning regime.
    Tune(TuneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauArg {
    Auto,
    Value(f64),
}

impl FromStr for TauArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(TauArg::Auto);
        }
        s.parse().map(TauArg::Value).map_err(|_| format!("expected 'auto' or a number, got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    /// `n^(-1/2 - gamma/4)`
    Schedule,
    /// `n^xi`
    Exponent(f64),
    Value(f64),
}

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "schedule" {
            return Ok(LambdaArg::Schedule);
        }
        if let Some(xi) = s.strip_prefix("exp:") {
            return xi.parse().map(LambdaArg::Exponent).map_err(|_| format!("bad exponent in '{s}'"));
        }
        s.parse()
            .map(LambdaArg::Value)
            .map_err(|_| format!("expected 'schedule', 'exp:<xi>' or a number, got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TauScaleArg {
    Standardized,
    Raw,
}

impl From<TauScaleArg> for TauScale {
    fn from(a: TauScaleArg) -> Self {
        match a {
            TauScaleArg::Standardized => TauScale::Standardized,
            TauScaleArg::Raw => TauScale::Raw,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Columns to drop on load (e.g. dates).
    #[arg(long, value_delimiter = ',')]
    pub ignore: Vec<String>,
    /// Append lagged copies `col_lag1..col_lagk` and drop the first k rows.
    #[arg(long = "lag", value_name = "COLUMN:K")]
    pub lags: Vec<Lag>,
    /// Learning rows `start:end` (0-based, half-open, after lagging).
    #[arg(long)]
    pub learn: Option<RowRange>,
    /// Test rows `start:end`.
    #[arg(long)]
    pub test: Option<RowRange>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub response: String,
    /// JSON object mapping group names to column lists; defaults to one
    /// group per column.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Asymmetry index, or `auto` to estimate it from the response.
    #[arg(long, default_value = "auto")]
    pub tau: TauArg,
    #[arg(long, value_enum, default_value = "standardized")]
    pub tau_scale: TauScaleArg,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// `schedule`, `exp:<xi>` for n^xi, or a value.
    #[arg(long, default_value = "schedule", allow_hyphen_values = true)]
    pub lambda: LambdaArg,
    /// Candidate exponents xi; picks the one with the smallest MAD on the
    /// test rows (learning rows if no test range).
    #[arg(long, allow_hyphen_values = true)]
    pub xi_grid: Option<String>,
    /// Upper bound for the adaptive weights.
    #[arg(long)]
    pub cap_weights: Option<f64>,
    #[arg(long)]
    pub no_standardize: bool,
    /// Add an unpenalized intercept.
    #[arg(long)]
    pub intercept: bool,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_kkt: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Report written by `fit`.
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Metrics CSV; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario JSON files (an object or an array of objects each).
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Output directory for summary.csv and audit.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run replications on one thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub serial: bool,
    #[arg(long, conflicts_with = "v_list", required_unless_present = "v_list")]
    pub gamma_list: Option<String>,
    /// Signal strengths v (coefficient v/100).
    #[arg(long)]
    pub v_list: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_exponent: f64,
    /// Exponents of a_n, b_n and p0 for the rate checks.
    #[arg(long, allow_hyphen_values = true, requires_all = ["rate_b", "rate_p0"])]
    pub rate_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rate_b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rate_p0: Option<f64>,
    /// JSON output; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| EXIT_OK),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| EXIT_OK),
        Command::Sweep(a) => cmd_sweep(&a).map(|_| EXIT_OK),
        Command::Tune(a) => cmd_tune(&a).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn load_table(args: &DataArgs) -> Result<Table> {
    Table::from_path(&args.data, &args.ignore)?.with_lags(&args.lags)
}

fn rows_of(range: Option<RowRange>, rows: usize) -> Result<Vec<usize>> {
    match range {
        Some(r) => {
            r.check(rows)?;
            Ok(r.indices())
        }
        None => Ok((0..rows).collect()),
    }
}

/// One row of the fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: String,
    pub group: String,
    pub name: String,
    pub value: String,
    pub se: Option<f64>,
}

impl ReportRow {
    fn meta(name: &str, value: impl ToString) -> Self {
        Self {
            kind: "meta".into(),
            group: String::new(),
            name: name.into(),
            value: value.to_string(),
            se: None,
        }
    }
}

/// Fitted model on the raw covariate scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub meta: Vec<(String, String)>,
    /// `(group, raw-scale norm)`
    pub group_norms: Vec<(String, f64)>,
    /// `(group, column, value, se)`
    pub coefficients: Vec<(String, String, f64, Option<f64>)>,
    pub intercept: f64,
    pub intercept_se: Option<f64>,
}

impl FitReport {
    pub fn meta_value(&self, name: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn converged(&self) -> bool {
        self.meta_value("converged") == Some("true")
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (k, v) in &self.meta {
            w.serialize(ReportRow::meta(k, v))?;
        }
        for (g, norm) in &self.group_norms {
            w.serialize(ReportRow {
                kind: "group_norm".into(),
                group: g.clone(),
                name: String::new(),
                value: norm.to_string(),
                se: None,
            })?;
        }
        for (g, c, v, se) in &self.coefficients {
            w.serialize(ReportRow {
                kind: "coef".into(),
                group: g.clone(),
                name: c.clone(),
                value: v.to_string(),
                se: *se,
            })?;
        }
        w.serialize(ReportRow {
            kind: "intercept".into(),
            group: String::new(),
            name: INTERCEPT.into(),
            value: self.intercept.to_string(),
            se: self.intercept_se,
        })?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let mut report = FitReport {
            meta: Vec::new(),
            group_norms: Vec::new(),
            coefficients: Vec::new(),
            intercept: 0.0,
            intercept_se: None,
        };
        let number = |row: &ReportRow| {
            row.value
                .parse::<f64>()
                .map_err(|_| Error::data(format!("report: bad number '{}' for '{}'", row.value, row.name)))
        };
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: ReportRow = row?;
            match row.kind.as_str() {
                "meta" => report.meta.push((row.name, row.value)),
                "group_norm" => report.group_norms.push((row.group.clone(), number(&row)?)),
                "coef" => {
                    let v = number(&row)?;
                    report.coefficients.push((row.group, row.name, v, row.se));
                }
                "intercept" => {
                    report.intercept = number(&row)?;
                    report.intercept_se = row.se;
                }
                other => return Err(Error::data(format!("report: unknown row kind '{other}'"))),
            }
        }
        if report.meta_value("response").is_none() {
            return Err(Error::data("report has no response"));
        }
        Ok(report)
    }
}

fn mad(design: &GroupedDesign, y: &DVector<f64>, fit: &FitResult) -> f64 {
    let r = y - design.predict(&fit.beta);
    r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64
}

/// Runs the fit pipeline; returns the report without writing it.
pub fn fit_report(args: &FitArgs) -> Result<FitReport> {
    let table = load_table(&args.data)?;
    let groups = match &args.groups {
        Some(path) => GroupMap::from_json(&fs::read_to_string(path)?)?,
        None => {
            let cols: Vec<String> = table.headers.iter().filter(|h| **h != args.response).cloned().collect();
            GroupMap::singletons(&cols)
        }
    };
    groups.check_covers(&table, &args.response)?;
    let learn = rows_of(args.data.learn, table.rows())?;
    let test = args.data.test.map(|r| rows_of(Some(r), table.rows())).transpose()?;
    let standardize = !args.no_standardize;

    let (mut x, y) = extract(&table, &groups, &args.response, &learn)?;
    let scaling = Standardization::from_columns(&x);
    if standardize {
        scaling.apply(&mut x);
    }
    let mut sizes: Vec<usize> = groups.spec().sizes().to_vec();
    let r = x.ncols();
    if args.intercept {
        x = x.insert_column(r, 1.0);
        sizes.push(1);
    }
    let design = GroupedDesign::new(x, GroupSpec::new(sizes)?)?;
    let n = design.n();

    let (tau, tau_source) = match args.tau {
        TauArg::Auto => (estimate_tau_with(y.as_slice(), args.tau_scale.into())?, "auto"),
        TauArg::Value(t) => (t, "fixed"),
    };
    let loss = LossSpec::new(tau, args.q)?;
    let opts = SolverOptions {
        max_iter: args.max_iter,
        tol_kkt: args.tol_kkt,
        ..SolverOptions::default()
    };

    let pilot = fit_unpenalized(&design, &y, &loss, &opts)?;
    if !pilot.converged {
        log::warn!("pilot fit did not converge (gradient norm {:.3e})", pilot.kkt_residual);
    }
    let mut weights = adaptive_weights(&pilot.beta, args.gamma, args.cap_weights)?;
    if args.intercept {
        *weights.last_mut().expect("intercept group") = GroupWeight::Free;
    }
    let pen = PenaltySpec::new(0.0, args.gamma, weights, args.cap_weights.is_some())?;

    // prepare the held-out design for the xi grid
    let selection = match &test {
        Some(rows) => {
            let (mut xt, yt) = extract(&table, &groups, &args.response, rows)?;
            if standardize {
                scaling.apply(&mut xt);
            }
            if args.intercept {
                xt = xt.insert_column(r, 1.0);
            }
            Some((GroupedDesign::new(xt, design.groups().clone())?, yt))
        }
        None => None,
    };

    let fit_at = |lambda: f64| fit_penalized(&design, &y, &loss, &pen.with_lambda(lambda)?, &opts, Some(&pilot.beta));
    let (fit, lambda, xi) = match &args.xi_grid {
        Some(grid) => {
            let grid = parse_list(grid).map_err(Error::spec)?;
            if grid.is_empty() {
                return Err(Error::spec("empty xi grid"));
            }
            let mut best: Option<(f64, FitResult, f64, f64)> = None;
            for xi in grid {
                let lambda = (n as f64).powf(xi);
                let fit = fit_at(lambda)?;
                let score = match &selection {
                    Some((d, yt)) => mad(d, yt, &fit),
                    None => mad(&design, &y, &fit),
                };
                log::info!("xi {xi}: lambda {lambda:.4e}, MAD {score:.6}");
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, fit, lambda, xi));
                }
            }
            let (_, fit, lambda, xi) = best.expect("nonempty grid");
            (fit, lambda, Some(xi))
        }
        None => {
            let lambda = match args.lambda {
                LambdaArg::Schedule => lambda_schedule(n, args.gamma, Schedule::FixedP)?,
                LambdaArg::Exponent(xi) => (n as f64).powf(xi),
                LambdaArg::Value(v) => v,
            };
            (fit_at(lambda)?, lambda, None)
        }
    };

    let cov = match sandwich_covariance(&design, &y, &fit, &loss) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("no standard errors: {e}");
            None
        }
    };

    let beta = fit.beta.as_slice();
    let (raw, mut intercept) = if standardize {
        scaling.to_raw(&beta[..r])
    } else {
        (beta[..r].to_vec(), 0.0)
    };
    let scale_of = |k: usize| if standardize { scaling.scales[k] } else { 1.0 };
    let se_of = |k: usize| cov.as_ref().and_then(|c| c.std_error_of(k));
    let mut intercept_se = None;
    if args.intercept {
        intercept += beta[r];
        // raw intercept = b0 - sum_k b_k m_k / s_k
        intercept_se = cov.as_ref().and_then(|c| {
            let at = |k: usize| c.columns.iter().position(|&col| col == k);
            let i0 = at(r)?;
            let mut a = vec![0.0; c.columns.len()];
            a[i0] = 1.0;
            if standardize {
                for (i, &k) in c.columns.iter().enumerate() {
                    if k < r {
                        a[i] = -scaling.means[k] / scaling.scales[k];
                    }
                }
            }
            let var: f64 = (0..a.len()).flat_map(|i| (0..a.len()).map(move |l| (i, l))).map(|(i, l)| a[i] * c.cov[(i, l)] * a[l]).sum();
            Some(var.max(0.0).sqrt())
        });
    }

    let spec = groups.spec();
    let mut coefficients = Vec::with_capacity(r);
    let mut group_norms = Vec::with_capacity(groups.groups.len());
    for (j, (name, cols)) in groups.groups.iter().enumerate() {
        let range = spec.range(j);
        let norm = raw[range.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
        group_norms.push((name.clone(), norm));
        for (k, col) in range.zip(cols) {
            coefficients.push((name.clone(), col.clone(), raw[k], se_of(k).map(|s| s / scale_of(k))));
        }
    }
    let active: Vec<&str> = fit
        .active
        .indices()
        .iter()
        .filter(|&&j| j < groups.groups.len())
        .map(|&j| groups.groups[j].0.as_str())
        .collect();
    let lags: Vec<String> = args.data.lags.iter().map(Lag::to_string).collect();

    let mut meta = vec![
        ("response".to_string(), args.response.clone()),
        ("lags".into(), lags.join(";")),
        ("n".into(), n.to_string()),
        ("p".into(), groups.groups.len().to_string()),
        ("r".into(), r.to_string()),
        ("tau".into(), tau.to_string()),
        ("tau_source".into(), tau_source.to_string()),
        ("q".into(), args.q.to_string()),
        ("gamma".into(), args.gamma.to_string()),
        ("lambda".into(), lambda.to_string()),
    ];
    if let Some(xi) = xi {
        meta.push(("xi".into(), xi.to_string()));
    }
    meta.extend([
        ("standardized".into(), standardize.to_string()),
        ("intercept".into(), args.intercept.to_string()),
        ("active".into(), active.join(";")),
        ("kkt_residual".into(), fit.kkt_residual.to_string()),
        ("converged".into(), fit.converged.to_string()),
        ("iterations".into(), fit.iterations.to_string()),
        ("objective".into(), fit.objective.to_string()),
        (
            "sigma2_over_mu2".into(),
            cov.as_ref().map_or(String::new(), |c| c.sigma2_over_mu2.to_string()),
        ),
    ]);
    Ok(FitReport {
        meta,
        group_norms,
        coefficients,
        intercept,
        intercept_se,
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let report = fit_report(args)?;
    report.write(fs::File::create(&args.out)?)?;
    if report.converged() {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: solver did not converge; report written with converged=false");
        Ok(EXIT_NONCONVERGED)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub split: &'static str,
    pub rows: usize,
    pub mad: f64,
    pub variance: f64,
}

/// Residual MAD and (unbiased) variance of `report` on each split.
pub fn evaluate(report: &FitReport, args: &DataArgs) -> Result<Vec<EvalMetrics>> {
    let response = report.meta_value("response").expect("checked on read");
    let table = load_table(args)?;
    let y = table.column(response)?;
    let cols: Vec<(&[f64], f64)> = report
        .coefficients
        .iter()
        .map(|(_, c, v, _)| Ok((table.column(c)?, *v)))
        .collect::<Result<_>>()?;
    let residual = |i: usize| y[i] - report.intercept - cols.iter().map(|(x, b)| x[i] * b).sum::<f64>();

    let mut splits = vec![("all", (0..table.rows()).collect::<Vec<_>>())];
    if let Some(r) = args.learn {
        splits.push(("learning", rows_of(Some(r), table.rows())?));
    }
    if let Some(r) = args.test {
        splits.push(("test", rows_of(Some(r), table.rows())?));
    }
    splits
        .into_iter()
        .map(|(split, rows)| {
            if rows.is_empty() {
                return Err(Error::data(format!("split '{split}' has no rows")));
            }
            let res: Vec<f64> = rows.iter().map(|&i| residual(i)).collect();
            let mad = res.iter().map(|v| v.abs()).sum::<f64>() / res.len() as f64;
            let variance = if res.len() > 1 { mean_and_variance(&res).1 } else { 0.0 };
            Ok(EvalMetrics {
                split,
                rows: rows.len(),
                mad,
                variance,
            })
        })
        .collect()
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let report = FitReport::read(fs::File::open(&args.report)?)?;
    let lags = report.meta_value("lags").unwrap_or("");
    if !lags.is_empty() && args.data.lags.is_empty() {
        log::warn!("the report was fitted with lags {lags}; pass the same --lag flags");
    }
    let metrics = evaluate(&report, &args.data)?;
    let out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(out);
    for m in &metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

fn read_scenarios(path: &Path, seed: Option<u64>) -> Result<Vec<ScenarioSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let mut specs = ScenarioSpec::list_from_json(&text)?;
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let many = specs.len() > 1;
    for (i, spec) in specs.iter_mut().enumerate() {
        if spec.name.is_empty() {
            spec.name = if many { format!("{stem}_{i}") } else { stem.clone() };
        }
        if let Some(s) = seed {
            spec.seed = s;
        }
    }
    Ok(specs)
}

fn config(serial: bool) -> EstimatorConfig {
    EstimatorConfig {
        parallel: !serial,
        ..EstimatorConfig::default()
    }
}

fn write_outputs(dir: &Path, rows: &[SummaryRow], audit: &[(&SimulationReport, Option<f64>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_summary(fs::File::create(dir.join("summary.csv"))?, rows)?;
    write_audit(fs::File::create(dir.join("audit.csv"))?, audit)?;
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<SimulationReport>> {
    let mut specs = Vec::new();
    for path in &args.scenarios {
        specs.extend(read_scenarios(path, args.seed)?);
    }
    let reports: Vec<SimulationReport> = specs
        .iter()
        .map(|s| run(s, args.reps, &config(args.serial)))
        .collect::<Result<_>>()?;
    let rows: Vec<SummaryRow> = reports.iter().map(|r| SummaryRow::new(r, None)).collect();
    let audit: Vec<_> = reports.iter().map(|r| (r, None)).collect();
    write_outputs(&args.out, &rows, &audit)?;
    Ok(reports)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut specs = read_scenarios(&args.scenario, args.seed)?;
    if specs.len() != 1 {
        return Err(Error::spec("a sweep takes exactly one scenario"));
    }
    let spec = specs.remove(0);
    let cfg = config(args.serial);
    let points = match (&args.gamma_list, &args.v_list) {
        (Some(g), None) => gamma_sweep(&spec, &parse_list(g).map_err(Error::spec)?, args.reps, &cfg)?,
        (None, Some(v)) => {
            let sweep = signal_sweep(&spec, &parse_list(v).map_err(Error::spec)?, args.reps, &cfg)?;
            fs::create_dir_all(&args.out)?;
            let thresholds = serde_json::json!({
                "threshold_99": sweep.threshold_99,
                "threshold_95": sweep.threshold_95,
            });
            fs::write(args.out.join("thresholds.json"), serde_json::to_string_pretty(&thresholds)?)?;
            sweep.points
        }
        _ => return Err(Error::spec("pass exactly one of --gamma-list and --v-list")),
    };
    let rows: Vec<SummaryRow> = points.iter().map(|p| p.summary()).collect();
    let audit: Vec<_> = points.iter().map(|p| (&p.report, Some(p.value))).collect();
    write_outputs(&args.out, &rows, &audit)
}

pub fn cmd_tune(args: &TuneArgs) -> Result<()> {
    let mut regime = RegimeSpec::new(args.c, args.alpha, args.gamma, args.lambda_exponent)?;
    if let (Some(a), Some(b), Some(p0)) = (args.rate_a, args.rate_b, args.rate_p0) {
        regime = regime.with_rates(RateExponents { a, b, p0 });
    }
    let report = check_conditions(&regime)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(p) => fs::write(p, text + "\n")?,
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}
