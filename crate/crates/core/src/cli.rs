//! The `bridge-glmm` command line.
//!
//! Every command writes a JSON document (to `--output`, or to standard
//! output when no path is given) and an aligned text table (to standard
//! output when the JSON goes to a file, otherwise to standard error).
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 numeric failure (including a fit that did not converge).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bahadur::{fit_bahadur_ml, BahadurOptions};
use crate::compare::{bridge_summary, compare_estimators, CompareOptions, Comparison};
use crate::copula::{LagMode, StructureKind};
use crate::error::{Error, Result};
use crate::fit::{fit_bridge_model, CovarianceMethod, DrawSchedule, FitOptions, FitResult};
use crate::gee::{fit_gee, GeeOptions, WorkingCorrelation};
use crate::io::{
    build_design, canonical_json, envelope, fmt_num, num, num_opt, nums, read_long_csv, read_scenario, text_table,
    ColumnSpec, Design, DesignSpec, LongTable,
};
use crate::likelihood::{ImportanceOptions, DEFAULT_INFLATION, DEFAULT_PILOT};
use crate::sim::{default_tau_grid, run_study_with_progress, tau_correspondence_curve, CURVE_PHIS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "bridge-glmm", version, about = "Marginally logistic mixed models for longitudinal binary data")]
struct Cli {
    /// Worker threads for parallel sections; defaults to every core.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bridge random-intercept model by Monte Carlo maximum likelihood.
    Fit(FitCmd),
    /// Bahadur model by maximum likelihood.
    FitBahadur(BahadurCmd),
    /// GEE with AR(1) or independence working correlation.
    FitGee(GeeCmd),
    /// Run a simulation scenario file.
    Simulate(SimulateCmd),
    /// Kendall's tau of the outcomes against that of the random intercepts.
    TauCurve(TauCmd),
    /// Fit every estimator to one dataset and tabulate them side by side.
    Compare(CompareCmd),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Long-format CSV with one row per subject and occasion.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "subject")]
    subject: String,
    #[arg(long, default_value = "time")]
    time: String,
    #[arg(long, default_value = "outcome")]
    outcome: String,
    /// Covariate columns, comma separated; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Covariates to treat as categorical (first sorted level is the reference).
    #[arg(long, value_delimiter = ',')]
    factor: Vec<String>,
    /// Explicit model terms (`x`, `a:b` or `a*b`); replaces the default main effects.
    #[arg(long = "term")]
    terms: Vec<String>,
    /// Interaction terms added to the main effects, e.g. `time:hiv`.
    #[arg(long = "interaction")]
    interactions: Vec<String>,
    #[arg(long)]
    no_intercept: bool,
    /// Center and scale every non-intercept column.
    #[arg(long)]
    standardize: bool,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// JSON destination; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LagArg {
    Occasion,
    Time,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CovarianceArg {
    Inverse,
    Generalized,
}

#[derive(Debug, Args)]
struct BridgeArgs {
    /// Hold φ at this value.
    #[arg(long)]
    fix_phi: Option<f64>,
    /// `draws:last_iteration` stages.
    #[arg(long, default_value = "50:19,100:39,1000:50")]
    draws_schedule: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// AR(1) lag measure.
    #[arg(long, value_enum, default_value = "occasion")]
    lag: LagArg,
    /// Pilot points per subject for the importance proposal.
    #[arg(long, default_value_t = DEFAULT_PILOT)]
    pilot: usize,
    #[arg(long, default_value_t = DEFAULT_INFLATION)]
    inflation: f64,
    /// `generalized` drops flat directions of the Hessian instead of
    /// withholding standard errors.
    #[arg(long, value_enum, default_value = "inverse")]
    covariance: CovarianceArg,
}

#[derive(Debug, Args)]
struct FitCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "ar1-rho", value_parser = parse_structure)]
    structure: StructureKind,
    #[command(flatten)]
    bridge: BridgeArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct BahadurArgs {
    /// Estimate only the pairwise correlation.
    #[arg(long)]
    no_higher_order: bool,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
}

#[derive(Debug, Args)]
struct BahadurCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    bahadur: BahadurArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WorkingArg {
    Ar1,
    Independence,
}

#[derive(Debug, Args)]
struct GeeArgs {
    #[arg(long, value_enum, default_value = "ar1")]
    working: WorkingArg,
}

#[derive(Debug, Args)]
struct GeeCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    gee: GeeArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateCmd {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report progress on standard error.
    #[arg(long)]
    progress: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct TauCmd {
    /// Simulated pairs per grid point.
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long, value_delimiter = ',')]
    phi: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Bridge structures to fit.
    #[arg(long, value_delimiter = ',', default_value = "single,ar1-rho,ar1-tau", value_parser = parse_structure)]
    structures: Vec<StructureKind>,
    #[command(flatten)]
    bridge: BridgeArgs,
    #[command(flatten)]
    bahadur: BahadurArgs,
    #[command(flatten)]
    gee: GeeArgs,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_structure(s: &str) -> std::result::Result<StructureKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Structure(_) | Error::Numeric(_) => EXIT_NUMERIC,
        Error::Domain(_)
        | Error::Design(_)
        | Error::Identifiability(_)
        | Error::Data { .. }
        | Error::Config(_)
        | Error::Io(_) => EXIT_DATA,
    }
}

struct Output {
    json: Value,
    table: String,
    status: i32,
    path: Option<PathBuf>,
}

/// Runs the command line on `args` (program name first) with the process's
/// standard streams and returns the exit code.
pub fn cli_dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    cli_dispatch_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_dispatch`] with explicit output streams.
pub fn cli_dispatch_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(Error::Config(format!("cannot start {n} threads: {e}"))),
        },
        None => run(cli.command),
    };
    match result {
        Ok(o) => {
            let text = canonical_json(&o.json);
            let written = match &o.path {
                Some(p) => std::fs::write(p, text)
                    .map_err(Error::from)
                    .and_then(|_| out.write_all(o.table.as_bytes()).map_err(Error::from)),
                None => out
                    .write_all(text.as_bytes())
                    .and_then(|_| err.write_all(o.table.as_bytes()))
                    .map_err(Error::from),
            };
            match written {
                Ok(()) => o.status,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    exit_code(&e)
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn run(command: Command) -> Result<Output> {
    match command {
        Command::Fit(c) => run_fit(c),
        Command::FitBahadur(c) => run_bahadur(c),
        Command::FitGee(c) => run_gee(c),
        Command::Simulate(c) => run_simulate(c),
        Command::TauCurve(c) => run_tau(c),
        Command::Compare(c) => run_compare(c),
    }
}

fn load(args: &DataArgs) -> Result<(LongTable, Design)> {
    let columns = ColumnSpec {
        subject: args.subject.clone(),
        time: args.time.clone(),
        outcome: args.outcome.clone(),
        covariates: args.covariates.clone(),
        factors: args.factor.clone(),
    };
    let table = read_long_csv(&args.data, &columns)?;
    let mut terms = if args.terms.is_empty() {
        args.covariates.clone().unwrap_or_else(|| table.columns.clone())
    } else {
        args.terms.clone()
    };
    terms.extend(args.interactions.iter().cloned());
    let design = build_design(
        &table,
        &DesignSpec {
            intercept: !args.no_intercept,
            terms,
            standardize: args.standardize,
        },
    )?;
    Ok((table, design))
}

fn data_json(path: &Path, table: &LongTable, design: &Design) -> Value {
    let ds = &design.dataset;
    json!({
        "path": path.display().to_string(),
        "subjects": ds.subjects.len(),
        "observations": ds.n_observations(),
        "max_occasions": ds.max_occasions(),
        "dropped_rows": table.dropped_rows,
        "columns": design.columns,
        "reference_levels": design.reference_levels,
        "scaling": design.scaling.iter().map(|s| json!({
            "column": s.column, "center": num(s.center), "scale": num(s.scale)
        })).collect::<Vec<_>>(),
    })
}

fn bridge_options(args: &BridgeArgs) -> Result<FitOptions> {
    let schedule: DrawSchedule = args.draws_schedule.parse()?;
    let options = FitOptions {
        schedule,
        seed: args.seed,
        fixed_phi: args.fix_phi,
        lag: match args.lag {
            LagArg::Occasion => LagMode::Occasion,
            LagArg::Time => LagMode::Time,
        },
        importance: ImportanceOptions {
            inflation: args.inflation,
            pilot: args.pilot,
        },
        covariance: match args.covariance {
            CovarianceArg::Inverse => CovarianceMethod::Inverse,
            CovarianceArg::Generalized => CovarianceMethod::GeneralizedInverse,
        },
        ..FitOptions::default()
    };
    options.validate()?;
    Ok(options)
}

fn bridge_options_json(o: &FitOptions) -> Value {
    json!({
        "draws_schedule": o.schedule.to_string(),
        "fixed_phi": num_opt(o.fixed_phi),
        "lag": serde_json::to_value(o.lag).unwrap_or(Value::Null),
        "pilot": o.importance.pilot,
        "inflation": num(o.importance.inflation),
        "covariance": serde_json::to_value(o.covariance).unwrap_or(Value::Null),
    })
}

fn matrix_json(m: Option<&nalgebra::DMatrix<f64>>) -> Value {
    match m {
        Some(m) => Value::Array((0..m.nrows()).map(|i| nums(&m.row(i).iter().copied().collect::<Vec<_>>())).collect()),
        None => Value::Null,
    }
}

/// Parameter rows `(name, estimate, se)` of a table.
fn parameter_rows(params: &[(String, f64, Option<f64>)]) -> Vec<Vec<String>> {
    params
        .iter()
        .map(|(name, est, se)| {
            let z = se.filter(|s| *s > 0.0).map(|s| est / s);
            vec![name.clone(), fmt_num(Some(*est), 6), fmt_num(*se, 6), fmt_num(z, 2)]
        })
        .collect()
}

fn fit_json(fit: &FitResult) -> Value {
    let mut params: Vec<Value> = Vec::new();
    for (j, name) in fit.covariate_names.iter().enumerate() {
        params.push(json!({"name": name, "estimate": num(fit.beta[j]),
            "se": num_opt(fit.beta_se().map(|s| s[j]))}));
    }
    params.push(json!({"name": "phi", "estimate": num(fit.phi), "se": num_opt(fit.phi_se()), "fixed": fit.phi_fixed}));
    if let (Some(a), Some(name)) = (fit.assoc, fit.structure.param_name()) {
        params.push(json!({"name": name, "estimate": num(a), "se": num_opt(fit.assoc_se())}));
    }
    json!({
        "structure": fit.structure.label(),
        "parameters": params,
        "conditional_beta": nums(&fit.conditional_beta()),
        "covariance_parameters": fit.param_names,
        "covariance": matrix_json(fit.covariance.as_ref()),
        "loglik": num(fit.loglik),
        "aic": num(fit.aic),
        "n_params": fit.n_params,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "final_draws": fit.final_draws,
        "gradient_norm": num(fit.gradient_norm),
        "diagnostics": fit.diagnostics,
    })
}

fn summary_lines(lines: &[(&str, String)]) -> String {
    let w = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    lines.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}

fn run_fit(c: FitCmd) -> Result<Output> {
    let (table, design) = load(&c.data)?;
    let options = bridge_options(&c.bridge)?;
    let fit = fit_bridge_model(&design.dataset, c.structure, &options)?;
    let json = envelope(
        "fit",
        Some(options.seed),
        json!({
            "data": data_json(&c.data.data, &table, &design),
            "options": bridge_options_json(&options),
            "fit": fit_json(&fit),
        }),
    );
    let s = bridge_summary(&fit);
    let mut params: Vec<(String, f64, Option<f64>)> = fit
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, n)| (n.clone(), fit.beta[j], s.se.as_ref().map(|v| v[j])))
        .collect();
    params.extend(s.extra.iter().map(|e| (e.name.clone(), e.estimate, e.se)));
    let mut text = summary_lines(&[
        ("model", format!("bridge, {} structure", fit.structure.label())),
        ("subjects", design.dataset.subjects.len().to_string()),
        ("loglik", fmt_num(Some(fit.loglik), 4)),
        ("AIC", fmt_num(Some(fit.aic), 4)),
        ("converged", format!("{} after {} iterations", fit.converged, fit.iterations)),
    ]);
    text.push('\n');
    text.push_str(&text_table(&["parameter", "estimate", "std.err", "z"], &parameter_rows(&params)));
    for d in &fit.diagnostics {
        text.push_str(&format!("note: {d}\n"));
    }
    Ok(Output {
        json,
        table: text,
        status: if fit.converged { EXIT_OK } else { EXIT_NUMERIC },
        path: c.out.output,
    })
}

fn bahadur_options(a: &BahadurArgs) -> BahadurOptions {
    BahadurOptions {
        max_iterations: a.max_iterations,
        higher_order: !a.no_higher_order,
        ..BahadurOptions::default()
    }
}

fn run_bahadur(c: BahadurCmd) -> Result<Output> {
    let (table, design) = load(&c.data)?;
    let fit = fit_bahadur_ml(&design.dataset, &bahadur_options(&c.bahadur))?;
    let corr = [fit.corr.gamma, fit.corr.gamma3, fit.corr.gamma4];
    let values: Vec<f64> = fit.beta.iter().copied().chain(corr).take(fit.param_names.len()).collect();
    let params: Vec<(String, f64, Option<f64>)> = fit
        .param_names
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(k, (n, v))| (n.clone(), *v, fit.se.as_ref().map(|s| s[k])))
        .collect();
    let json = envelope(
        "fit-bahadur",
        None,
        json!({
            "data": data_json(&c.data.data, &table, &design),
            "higher_order": !c.bahadur.no_higher_order,
            "fit": {
                "parameters": params.iter().map(|(n, v, s)| json!({"name": n, "estimate": num(*v), "se": num_opt(*s)})).collect::<Vec<_>>(),
                "covariance": matrix_json(fit.covariance.as_ref()),
                "loglik": num(fit.loglik),
                "aic": num(fit.aic),
                "n_params": fit.n_params,
                "converged": fit.converged,
                "iterations": fit.iterations,
                "min_cell": num(fit.min_cell),
                "min_factor": num(fit.min_factor),
                "diagnostics": fit.diagnostics,
            },
        }),
    );
    let mut text = summary_lines(&[
        ("model", "Bahadur".to_string()),
        ("subjects", design.dataset.subjects.len().to_string()),
        ("loglik", fmt_num(Some(fit.loglik), 4)),
        ("AIC", fmt_num(Some(fit.aic), 4)),
        ("converged", format!("{} after {} iterations", fit.converged, fit.iterations)),
    ]);
    text.push('\n');
    text.push_str(&text_table(&["parameter", "estimate", "std.err", "z"], &parameter_rows(&params)));
    Ok(Output {
        json,
        table: text,
        status: if fit.converged { EXIT_OK } else { EXIT_NUMERIC },
        path: c.out.output,
    })
}

fn gee_options(a: &GeeArgs) -> GeeOptions {
    GeeOptions {
        working: match a.working {
            WorkingArg::Ar1 => WorkingCorrelation::Ar1,
            WorkingArg::Independence => WorkingCorrelation::Independence,
        },
        ..GeeOptions::default()
    }
}

fn run_gee(c: GeeCmd) -> Result<Output> {
    let (table, design) = load(&c.data)?;
    let fit = fit_gee(&design.dataset, &gee_options(&c.gee))?;
    let se = fit.se();
    let se_model = fit.se_model();
    let json = envelope(
        "fit-gee",
        None,
        json!({
            "data": data_json(&c.data.data, &table, &design),
            "fit": {
                "working": fit_working_label(&c.gee),
                "parameters": fit.covariate_names.iter().enumerate().map(|(j, n)| json!({
                    "name": n, "estimate": num(fit.beta[j]), "se": num(se[j]), "se_model": num(se_model[j])
                })).collect::<Vec<_>>(),
                "covariance": matrix_json(Some(&fit.cov_sandwich)),
                "working_rho": num(fit.rho),
                "scale": num(fit.scale),
                "converged": fit.converged,
                "iterations": fit.iterations,
                "estimating_norm": num(fit.estimating_norm),
                "diagnostics": fit.diagnostics,
            },
        }),
    );
    let params: Vec<(String, f64, Option<f64>)> = fit
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, n)| (n.clone(), fit.beta[j], Some(se[j])))
        .collect();
    let mut text = summary_lines(&[
        ("model", format!("GEE, {} working correlation", fit_working_label(&c.gee))),
        ("subjects", design.dataset.subjects.len().to_string()),
        ("working rho", fmt_num(Some(fit.rho), 4)),
        ("converged", format!("{} after {} iterations", fit.converged, fit.iterations)),
    ]);
    text.push('\n');
    text.push_str(&text_table(&["parameter", "estimate", "robust.se", "z"], &parameter_rows(&params)));
    Ok(Output {
        json,
        table: text,
        status: if fit.converged { EXIT_OK } else { EXIT_NUMERIC },
        path: c.out.output,
    })
}

fn fit_working_label(a: &GeeArgs) -> &'static str {
    match a.working {
        WorkingArg::Ar1 => "ar1",
        WorkingArg::Independence => "independence",
    }
}

fn run_simulate(c: SimulateCmd) -> Result<Output> {
    let mut config = read_scenario(&c.scenario)?;
    if let Some(r) = c.replications {
        config.replications = r;
    }
    if let Some(s) = c.seed {
        config.seed = s;
    }
    config.validate()?;
    let progress = c.progress;
    let report = run_study_with_progress(&config, |assoc, done| {
        if progress {
            eprintln!("assoc {assoc}: {done} replications done");
        }
    })?;
    let scenario = serde_json::to_value(&config).map_err(|e| Error::numeric(e.to_string()))?;
    let json = envelope(
        "simulate",
        Some(config.seed),
        json!({
            "scenario": scenario,
            "report": serde_json::to_value(&report).map_err(|e| Error::numeric(e.to_string()))?,
        }),
    );
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|cell| {
            vec![
                format!("{}", cell.assoc),
                cell.estimator.label().to_string(),
                cell.coefficient.clone(),
                fmt_num(Some(cell.truth), 3),
                fmt_num(Some(cell.mean), 4),
                fmt_num(Some(cell.bias), 4),
                fmt_num(Some(cell.mse), 4),
                fmt_num(Some(100.0 * cell.coverage), 1),
                cell.failures.to_string(),
            ]
        })
        .collect();
    let mut text = summary_lines(&[
        ("scenario", config.name.clone()),
        ("true model", config.true_model.to_string()),
        ("replications", config.replications.to_string()),
        ("seed", config.seed.to_string()),
    ]);
    text.push('\n');
    text.push_str(&text_table(
        &["assoc", "estimator", "coef", "truth", "mean", "bias", "mse", "cover%", "failed"],
        &rows,
    ));
    Ok(Output {
        json,
        table: text,
        status: EXIT_OK,
        path: c.out.output,
    })
}

fn run_tau(c: TauCmd) -> Result<Output> {
    let phis = c.phi.clone().unwrap_or_else(|| CURVE_PHIS.to_vec());
    let grid = default_tau_grid();
    let mut points = Vec::new();
    for (i, &phi) in phis.iter().enumerate() {
        points.extend(tau_correspondence_curve(phi, &grid, c.pairs, c.seed.wrapping_add(1000 * i as u64))?);
    }
    let col = |f: fn(&crate::sim::TauPoint) -> f64| nums(&points.iter().map(f).collect::<Vec<_>>());
    let json = envelope(
        "tau-curve",
        Some(c.seed),
        json!({
            "pairs": c.pairs,
            "columns": {
                "phi": col(|p| p.phi),
                "tau_b": col(|p| p.tau_b),
                "tau_y": col(|p| p.tau_y),
                "tau_y_b": col(|p| p.tau_y_b),
                "gamma_y": col(|p| p.gamma_y),
            },
        }),
    );
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                fmt_num(Some(p.phi), 1),
                fmt_num(Some(p.tau_b), 4),
                fmt_num(Some(p.tau_y), 4),
                fmt_num(Some(p.tau_y_b), 4),
                fmt_num(Some(p.gamma_y), 4),
            ]
        })
        .collect();
    Ok(Output {
        json,
        table: text_table(&["phi", "tau_b", "tau_y", "tau_y_b", "gamma_y"], &rows),
        status: EXIT_OK,
        path: c.out.output,
    })
}

fn comparison_table(c: &Comparison) -> String {
    let mut header = vec!["parameter"];
    header.extend(c.estimators.iter().map(|e| e.label.as_str()));
    let cell = |est: f64, se: Option<f64>| match se {
        Some(s) if s.is_finite() => format!("{est:.3} ({s:.3})"),
        _ => format!("{est:.3}"),
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (j, name) in c.covariate_names.iter().enumerate() {
        let mut r = vec![name.clone()];
        r.extend(c.estimators.iter().map(|e| match e.beta.get(j) {
            Some(b) => cell(*b, e.se.as_ref().map(|s| s[j])),
            None => "-".into(),
        }));
        rows.push(r);
    }
    let mut extra: Vec<String> = Vec::new();
    for e in &c.estimators {
        for p in &e.extra {
            if !extra.contains(&p.name) {
                extra.push(p.name.clone());
            }
        }
    }
    for name in &extra {
        let mut r = vec![name.clone()];
        r.extend(c.estimators.iter().map(|e| match e.extra.iter().find(|p| &p.name == name) {
            Some(p) => cell(p.estimate, p.se),
            None => "-".into(),
        }));
        rows.push(r);
    }
    let mut r = vec!["loglik".to_string()];
    r.extend(c.estimators.iter().map(|e| fmt_num(e.loglik, 2)));
    rows.push(r);
    let mut r = vec!["AIC".to_string()];
    r.extend(c.estimators.iter().map(|e| fmt_num(e.aic, 2)));
    rows.push(r);
    let mut r = vec!["converged".to_string()];
    r.extend(c.estimators.iter().map(|e| e.converged.to_string()));
    rows.push(r);
    let mut text = text_table(&header, &rows);
    for e in &c.estimators {
        if let Some(msg) = &e.error {
            text.push_str(&format!("{}: {msg}\n", e.label));
        }
    }
    text
}

fn run_compare(c: CompareCmd) -> Result<Output> {
    let (table, design) = load(&c.data)?;
    let options = CompareOptions {
        structures: c.structures.clone(),
        bridge: bridge_options(&c.bridge)?,
        bahadur: bahadur_options(&c.bahadur),
        gee: gee_options(&c.gee),
    };
    let comparison = compare_estimators(&design.dataset, &options)?;
    let worst = comparison.worst_differences();
    let json = envelope(
        "compare",
        Some(options.bridge.seed),
        json!({
            "data": data_json(&c.data.data, &table, &design),
            "options": bridge_options_json(&options.bridge),
            "covariate_names": comparison.covariate_names,
            "estimators": serde_json::to_value(&comparison.estimators).map_err(|e| Error::numeric(e.to_string()))?,
            "largest_differences": worst.iter().map(|d| json!({
                "coefficient": d.coefficient, "first": d.first, "second": d.second,
                "difference": num(d.difference), "joint_se": num(d.joint_se), "ratio": num(d.ratio()),
            })).collect::<Vec<_>>(),
        }),
    );
    let mut text = comparison_table(&comparison);
    if !worst.is_empty() {
        text.push('\n');
        let rows: Vec<Vec<String>> = worst
            .iter()
            .map(|d| {
                vec![
                    d.coefficient.clone(),
                    format!("{} vs {}", d.first, d.second),
                    fmt_num(Some(d.difference), 4),
                    fmt_num(Some(d.ratio()), 2),
                ]
            })
            .collect();
        text.push_str(&text_table(&["coefficient", "largest gap", "difference", "/joint se"], &rows));
    }
    Ok(Output {
        json,
        table: text,
        status: EXIT_OK,
        path: c.out.output,
    })
}
