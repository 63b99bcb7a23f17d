//! The `logcave` command line: fitting, certificate checks and the Monte Carlo
//! experiments, with JSON and CSV outputs that are pure functions of the
//! inputs, flags and seed.

pub mod format;
pub mod io;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use logcave_core::limit::{limit_samples, LimitOptions};
use logcave_core::simulate::{figure_panels, sample_density, Metric, TrueDensity};
use logcave_core::stats::quantile;
use logcave_core::{
    lr_from_fits, verify_constrained, verify_unconstrained, CharacterizationReport, Error, Fit, PwlConcave,
    SolverOptions, SortedSample,
};

use format::{cell, sci, Json};

/// Exit status for a certificate that does not hold.
pub const EXIT_CERTIFICATE: u8 = 3;
/// Exit status when the solver or an experiment does not converge.
pub const EXIT_NONCONVERGENCE: u8 = 2;
/// Exit status for unusable input.
pub const EXIT_INPUT: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "logcave", version, about = "Log-concave density estimation with an optional mode constraint")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a sample; with --mode also the mode-constrained fit and 2 log λ.
    Fit(FitArgs),
    /// Check a fit document against its sample.
    Verify(VerifyArgs),
    /// Likelihood ratio statistic 2 log λ for a hypothesized mode.
    Lr(LrArgs),
    /// Rate experiment: median errors over replications and log-log slopes.
    SimulateRates(RatesArgs),
    /// Empirical distribution of the limit-process fits at 0.
    SimulateLimit(LimitArgs),
    /// Plot data for the estimator and difference-process panels.
    Panels(PanelArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Base seed; falls back to LOGCAVE_SEED, then 0.
    #[arg(long, env = "LOGCAVE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Single-column CSV of observations.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub mode: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Certificate tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Fit document written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Check the (constrained) fit against this mode instead of the stored one.
    #[arg(long, allow_hyphen_values = true)]
    pub mode: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct LrArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub mode: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// std_normal, gumbel or gamma2.
    #[arg(long, default_value = "std_normal")]
    pub density: String,
    /// Comma-separated list of hellinger, supnorm, knot-gap, near-mode.
    #[arg(long, default_value = "hellinger,supnorm,knot-gap,near-mode")]
    pub metric: String,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long, default_value = "100,300,1000,3000")]
    pub n_grid: String,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Fit without the mode constraint (metrics that need both fits ignore this).
    #[arg(long)]
    pub unconstrained: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, default_value_t = 5.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 0.005)]
    pub delta: f64,
    /// One row per replication instead of 99 quantiles.
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Sample to plot; when absent one is drawn from --density.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "std_normal")]
    pub density: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Mode of the constrained fit; the density's mode when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub mode: Option<f64>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

/// Exit status for an error: nonconvergence, certificate failure or input.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::NonConvergence { .. } | Error::TooManyFailures { .. } => EXIT_NONCONVERGENCE,
                _ => EXIT_INPUT,
            };
        }
    }
    EXIT_INPUT
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Lr(a) => cmd_lr(&a),
        Command::SimulateRates(a) => cmd_rates(&a),
        Command::SimulateLimit(a) => cmd_limit(&a),
        Command::Panels(a) => cmd_panels(&a),
    }
}

fn solver_options(tol: f64) -> Result<SolverOptions> {
    let opts = SolverOptions {
        tol_certificate: tol,
        ..SolverOptions::default()
    };
    opts.validate()?;
    Ok(opts)
}

fn report_json(r: &CharacterizationReport) -> Json {
    Json::obj(vec![
        ("max_inequality_violation", Json::Num(r.max_inequality_violation)),
        ("max_knot_equality_gap", Json::Num(r.max_knot_equality_gap)),
        ("touching_violation", Json::Num(r.touching_violation)),
        ("normalization_gap", Json::Num(r.normalization_gap)),
        ("pass", Json::Bool(r.pass)),
        (
            "knot_class",
            r.knot_class.map_or(Json::Null, |k| Json::Str(k.label().into())),
        ),
    ])
}

/// The JSON object describing one fit and its certificate.
pub fn fit_json(f: &Fit, report: &CharacterizationReport) -> Json {
    let knot_set: Vec<f64> = f.knot_set.iter().map(|&i| f.grid[i]).collect();
    Json::obj(vec![
        ("knots", Json::nums(f.estimate.knots())),
        ("values", Json::nums(f.estimate.values())),
        ("knot_set", Json::nums(&knot_set)),
        ("loglik", Json::Num(f.loglik)),
        ("psi", Json::Num(f.psi)),
        ("iterations", Json::Int(f.iterations as i64)),
        ("constrained", Json::Bool(f.constrained)),
        ("mode", Json::opt_num(f.mode)),
        ("certificate", report_json(report)),
    ])
}

/// The document written by `fit`: the unconstrained fit and, for a mode, the
/// constrained fit and the likelihood ratio statistic.
pub fn fit_document(s: &SortedSample, mode: Option<f64>, opts: &SolverOptions) -> Result<Json> {
    let u = logcave_core::fit_unconstrained(s, opts)?;
    let ru = verify_unconstrained(&u.estimate, s, opts.tol_certificate)?;
    let mut fields = vec![("n", Json::Int(s.n_raw() as i64)), ("fit", fit_json(&u, &ru))];
    if let Some(m) = mode {
        let c = logcave_core::fit_constrained(s, m, opts)?;
        let rc = verify_constrained(&c.estimate, s, m, opts.tol_certificate)?;
        fields.push(("constrained_fit", fit_json(&c, &rc)));
        fields.push(("lr", Json::Num(lr_from_fits(s, &u, &c))));
    }
    Ok(Json::obj(fields))
}

fn cmd_fit(a: &FitArgs) -> Result<u8> {
    let opts = solver_options(a.tol)?;
    let s = io::read_sample(&a.input)?;
    let doc = fit_document(&s, a.mode, &opts)?;
    io::emit(a.out.as_deref(), &doc.render())?;
    Ok(0)
}

/// Moves a knot read back from `sci` output onto the sample point or mode it
/// was printed from.
fn snap(k: f64, s: &SortedSample, extra: &[f64]) -> f64 {
    let pts = s.points();
    let i = pts.partition_point(|&p| p < k);
    let near = [i.checked_sub(1).map(|j| pts[j]), pts.get(i).copied()];
    near.into_iter()
        .flatten()
        .chain(extra.iter().copied())
        .filter(|&p| (p - k).abs() <= SNAP_REL * p.abs().max(1.0))
        .min_by(|a, b| (a - k).abs().total_cmp(&(b - k).abs()))
        .unwrap_or(k)
}

/// Relative distance treated as rounding from the twelve printed digits.
const SNAP_REL: f64 = 1e-11;

fn stored_fit(
    doc: &serde_json::Value,
    key: &str,
    s: &SortedSample,
    mode: Option<f64>,
) -> Result<Option<(PwlConcave, Option<f64>)>> {
    let Some(obj) = doc.get(key) else {
        return Ok(None);
    };
    let nums = |field: &str| -> Result<Vec<f64>> {
        obj.get(field)
            .and_then(|v| v.as_array())
            .with_context(|| format!("{key}.{field} is missing or not an array"))?
            .iter()
            .map(|v| v.as_f64().with_context(|| format!("{key}.{field} holds a non-number")))
            .collect()
    };
    let constrained = obj.get("constrained").and_then(|v| v.as_bool()).unwrap_or(false);
    let stored = obj.get("mode").and_then(|v| v.as_f64());
    if constrained && stored.is_none() {
        bail!("{key} is constrained but has no mode");
    }
    let extra: Vec<f64> = stored.into_iter().chain(mode).collect();
    let knots: Vec<f64> = nums("knots")?.into_iter().map(|k| snap(k, s, &extra)).collect();
    let stored = stored.map(|m| snap(m, s, &[]));
    let f = PwlConcave::new(knots, nums("values")?).with_context(|| format!("{key} is not a valid fit"))?;
    Ok(Some((f, if constrained { stored } else { None })))
}

fn cmd_verify(a: &VerifyArgs) -> Result<u8> {
    let s = io::read_sample(&a.input)?;
    let text = std::fs::read_to_string(&a.fit).with_context(|| format!("cannot read {}", a.fit.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text).context("fit document is not JSON")?;
    let fit = stored_fit(&doc, "fit", &s, a.mode)?.context("fit document has no \"fit\" object")?;
    let constrained = stored_fit(&doc, "constrained_fit", &s, a.mode)?;
    let checks: Vec<(&str, PwlConcave, Option<f64>)> = match (a.mode, constrained) {
        (Some(m), Some((f, _))) => vec![("constrained_fit", f, Some(m))],
        (Some(m), None) => vec![("fit", fit.0, Some(m))],
        (None, Some((f, stored))) => vec![("fit", fit.0, fit.1), ("constrained_fit", f, stored)],
        (None, None) => vec![("fit", fit.0, fit.1)],
    };
    let mut all_pass = true;
    let mut out = Vec::new();
    for (name, f, m) in checks {
        let r = match m {
            None => verify_unconstrained(&f, &s, a.tol),
            Some(m) => verify_constrained(&f, &s, m, a.tol),
        };
        let entry = match r {
            Ok(r) => {
                all_pass &= r.pass;
                report_json(&r)
            }
            // a fit that cannot even be placed against the sample fails
            Err(e @ (Error::ModeInfeasible { .. } | Error::OutOfDomain(..) | Error::DomainMismatch { .. })) => {
                all_pass = false;
                Json::obj(vec![("pass", Json::Bool(false)), ("error", Json::Str(e.to_string()))])
            }
            Err(e) => return Err(e.into()),
        };
        out.push((name.to_string(), Json::obj(vec![("mode", Json::opt_num(m)), ("report", entry)])));
    }
    out.push(("pass".into(), Json::Bool(all_pass)));
    print!("{}", Json::Obj(out).render());
    Ok(if all_pass { 0 } else { EXIT_CERTIFICATE })
}

fn cmd_lr(a: &LrArgs) -> Result<u8> {
    let opts = solver_options(a.tol)?;
    let s = io::read_sample(&a.input)?;
    let lr = logcave_core::lr_statistic(&s, a.mode, &opts)?;
    let doc = Json::obj(vec![
        ("n", Json::Int(s.n_raw() as i64)),
        ("mode", Json::Num(a.mode)),
        ("lr", Json::Num(lr)),
    ]);
    io::emit(a.out.as_deref(), &doc.render())?;
    Ok(0)
}

fn parse_list<T, F: Fn(&str) -> Result<T>>(list: &str, what: &str, f: F) -> Result<Vec<T>> {
    let items: Vec<T> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).with_context(|| format!("bad {what} {s:?}")))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("empty {what} list");
    }
    Ok(items)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_rates(a: &RatesArgs) -> Result<u8> {
    let opts = solver_options(a.tol)?;
    let d = TrueDensity::from_name(&a.density)?;
    let metrics = parse_list(&a.metric, "metric", |s| Ok(Metric::from_name(s)?))?;
    let grid = parse_list(&a.n_grid, "sample size", |s| Ok(s.parse::<usize>()?))?;
    let mut rows = Vec::new();
    for metric in metrics {
        let r = logcave_core::rate_experiment(&d, metric, &grid, a.reps, a.seed.seed, !a.unconstrained, &opts)?;
        if r.slope.is_none() {
            eprintln!("warning: {}: no slope, the regression needs at least two sample sizes", metric.name());
        }
        for (i, &n) in r.n_grid.iter().enumerate() {
            rows.push(vec![
                metric.name().to_string(),
                n.to_string(),
                r.errors[i].len().to_string(),
                cell(r.median_errors[i]),
                r.slope.map_or(String::new(), sci),
                r.slope_ci_halfwidth.map_or(String::new(), sci),
            ]);
        }
    }
    let text = csv_text(&["metric", "n", "rep_count", "median_error", "slope", "slope_ci"], rows)?;
    io::emit(a.out.as_deref(), &text)?;
    Ok(0)
}

/// Quantile levels of the summary table.
fn levels() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

fn cmd_limit(a: &LimitArgs) -> Result<u8> {
    if a.reps == 0 {
        bail!(Error::InvalidArgument("need at least one replication".into()));
    }
    if a.reps < 500 && !a.raw {
        eprintln!("warning: {} replications are few for distributional comparisons", a.reps);
    }
    let s = limit_samples(
        a.reps,
        a.half_width,
        a.delta,
        a.seed.seed,
        1.0,
        1.0,
        false,
        &LimitOptions::default(),
    )?;
    if s.skipped > 0 {
        eprintln!("warning: {} replications did not converge and were dropped", s.skipped);
    }
    let mut rows = Vec::new();
    for (name, values) in s.quantities() {
        if a.raw {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            let k = v.len() as f64;
            for (i, x) in v.iter().enumerate() {
                rows.push(vec![name.to_string(), sci((i + 1) as f64 / k), cell(*x)]);
            }
        } else {
            for p in levels() {
                rows.push(vec![name.to_string(), sci(p), cell(quantile(values, p))]);
            }
        }
    }
    let text = csv_text(&["quantity", "quantile", "value"], rows)?;
    io::emit(a.out.as_deref(), &text)?;
    Ok(0)
}

fn cmd_panels(a: &PanelArgs) -> Result<u8> {
    let opts = solver_options(a.tol)?;
    let d = TrueDensity::from_name(&a.density)?;
    let (s, truth): (SortedSample, Option<&TrueDensity>) = match &a.input {
        Some(p) => (io::read_sample(p)?, None),
        None => (sample_density(&d, a.n, a.seed.seed)?, Some(&d)),
    };
    let m = a.mode.unwrap_or_else(|| d.mode());
    let t = figure_panels(&s, m, truth, &opts)?;
    let rows = t.rows.iter().map(|r| {
        vec![
            sci(r.x),
            cell(r.f_true),
            cell(r.f_unc),
            cell(r.f_con),
            cell(r.logf_true),
            cell(r.logf_unc),
            cell(r.logf_con),
            cell(r.cdf_true),
            cell(r.cdf_emp),
            cell(r.cdf_unc),
            cell(r.cdf_con),
            cell(r.y_minus_h),
            cell(r.yl_minus_hl),
            cell(r.yr_minus_hr),
            r.knot_flags().to_string(),
        ]
    });
    let header = [
        "x", "f_true", "f_unc", "f_con", "logf_true", "logf_unc", "logf_con", "F_true", "F_emp", "F_unc", "F_con",
        "Y_minus_H", "YL_minus_HL", "YR_minus_HR", "knot_flags",
    ];
    let text = csv_text(&header, rows)?;
    io::emit(a.out.as_deref(), &text)?;
    Ok(0)
}

/// Reads a sample file; exposed for tests that compare against the library.
pub fn load_sample(path: &Path) -> Result<SortedSample> {
    io::read_sample(path)
}
