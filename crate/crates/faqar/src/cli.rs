//! Command-line surface over the library pipeline.
//!
//! Subcommands: `factors` (panel to principal-component factors), `fit`
//! (quantile autoregression path), `test` (joint specification test with
//! bootstrap p-values), `montecarlo` (size/power study), and `smooth`
//! (skewed-t density smoothing of fitted quantiles).
//!
//! Configuration is resolved per key with the precedence
//!
//! ```text
//! built-in default  <  config file (`--config`)  <  explicit flag
//! ```
//!
//! The config file is flat `key = value` text; blank lines and `#` comments
//! are skipped. Every output file starts with the fully resolved
//! configuration as `#cfg key = value` lines, and the parser gives such
//! lines priority: when a file contains any `#cfg` lines, only those are
//! read and everything else is treated as data. An output file is therefore
//! itself a config file, and rerunning a subcommand with
//! `--config <previous output>` reproduces that output bit for bit.
//!
//! Two settings are deliberately excluded from the embedded configuration
//! because they must not affect results: `--out-dir` (placement) and
//! `--threads` (a cap on worker threads; all parallel reductions assemble
//! their results in deterministic order).
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure. Reports are plain text in the same `key = value` style with
//! `[section]` headers and aligned table blocks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::bootstrap::{run_test, BootstrapConfig, TestRun};
use crate::error::{Error, Result};
use crate::monte_carlo::{study_cells, McConfig, Scale};
use crate::panel::{extract_factors, ic_profile, select_num_factors, IcPenalty, Panel};
use crate::qar::{build_frame, fit_path, tau_grid, FactorData, SeriesData};
use crate::rng::Streams;
use crate::skewt::{fit_skewt, skewt_pdf, QuantileTargets, SkewTFit};
use crate::spec_test::{FunctionalForm, GammaDims, NullHypothesis, WeightConfig};

/// Seed used when neither the config file nor `--seed` provides one.
const DEFAULT_SEED: u64 = 17;

/// Entry point for the binary: parses `std::env::args_os()`.
pub fn run() -> i32 {
    run_with(std::env::args_os())
}

/// Entry point with explicit arguments, for tests and embedding.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let is_usage = err.use_stderr();
            let _ = err.print();
            return if is_usage { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

#[derive(Parser)]
#[command(
    name = "faqar",
    version,
    about = "Factor-augmented quantile autoregression: factor extraction, \
             quantile regression, joint specification testing, simulation \
             studies, and density smoothing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract principal-component factors from a panel CSV
    Factors(FactorsArgs),
    /// Fit a quantile autoregression coefficient path
    Fit(FitArgs),
    /// Run the joint specification test with bootstrap p-values
    Test(TestArgs),
    /// Run the simulation study and tabulate rejection frequencies
    Montecarlo(MontecarloArgs),
    /// Smooth fitted quantiles into skewed-t densities
    Smooth(SmoothArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Flat key = value config file; explicit flags override its entries
    #[arg(long)]
    config: Option<String>,
    /// Master seed for every random stream
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on worker threads; never affects results
    #[arg(long)]
    threads: Option<usize>,
    /// Directory outputs are written to
    #[arg(long, default_value = ".")]
    out_dir: String,
}

#[derive(Args)]
struct FactorsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Panel CSV: header row, first column period labels, one column per series
    #[arg(long)]
    panel: Option<String>,
    /// Factor count: a positive integer or `auto` (information criterion)
    #[arg(long)]
    k: Option<String>,
    /// Largest k scanned by the information criterion
    #[arg(long)]
    k_max: Option<usize>,
    /// Information criterion penalty: p1, p2, or p3
    #[arg(long)]
    penalty: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Series CSV: header row, first column period labels, one value column
    #[arg(long)]
    series: Option<String>,
    /// Optional companion panel CSV for factor augmentation
    #[arg(long)]
    panel: Option<String>,
    /// Autoregressive order
    #[arg(long)]
    p: Option<usize>,
    /// Factor count: integer or `auto`; used only with --panel
    #[arg(long)]
    k: Option<String>,
    /// Largest k scanned by the information criterion
    #[arg(long)]
    k_max: Option<usize>,
    /// Information criterion penalty: p1, p2, or p3
    #[arg(long)]
    penalty: Option<String>,
    /// Number of quantile grid points
    #[arg(long)]
    tau_points: Option<usize>,
    /// Lowest quantile level
    #[arg(long)]
    tau_min: Option<f64>,
    /// Highest quantile level
    #[arg(long)]
    tau_max: Option<f64>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Series CSV: header row, first column period labels, one value column
    #[arg(long)]
    series: Option<String>,
    /// Optional companion panel CSV supplying factors
    #[arg(long)]
    panel: Option<String>,
    /// Autoregressive order
    #[arg(long)]
    p: Option<usize>,
    /// Factor count: integer or `auto`; used only with --panel
    #[arg(long)]
    k: Option<String>,
    /// Largest k scanned by the information criterion
    #[arg(long)]
    k_max: Option<usize>,
    /// Information criterion penalty: p1, p2, or p3
    #[arg(long)]
    penalty: Option<String>,
    /// Comma-separated quantile grid sizes, one test per entry
    #[arg(long)]
    tau_points: Option<String>,
    /// Lowest quantile level
    #[arg(long)]
    tau_min: Option<f64>,
    /// Highest quantile level
    #[arg(long)]
    tau_max: Option<f64>,
    /// Bootstrap replications per test
    #[arg(long)]
    boot_reps: Option<usize>,
    /// Significance level
    #[arg(long)]
    alpha: Option<f64>,
    /// Weight decay exponent (>= 2)
    #[arg(long)]
    kappa: Option<f64>,
    /// Weight grid points per direction
    #[arg(long)]
    gamma_count: Option<usize>,
    /// Largest weight coefficient
    #[arg(long)]
    gamma_max: Option<f64>,
    /// History window entering the weights
    #[arg(long)]
    max_lag: Option<usize>,
    /// Weight grid layout: tied or per-block
    #[arg(long)]
    dims: Option<String>,
    /// Functional aggregation: squared or literal
    #[arg(long)]
    form: Option<String>,
}

#[derive(Args)]
struct MontecarloArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Replication budget: desk or full
    #[arg(long)]
    scale: Option<String>,
    /// Shorthand for --scale full
    #[arg(long)]
    full_scale: bool,
    /// Restrict the study cells: all, case1, or case2
    #[arg(long)]
    case: Option<String>,
    /// Override the per-cell replication count
    #[arg(long)]
    mc_reps: Option<usize>,
    /// Override the bootstrap replication count
    #[arg(long)]
    boot_reps: Option<usize>,
    /// Significance level
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of quantile grid points
    #[arg(long)]
    tau_points: Option<usize>,
    /// Autoregressive order fitted by the tests
    #[arg(long)]
    p: Option<usize>,
    /// Factors extracted from the simulated panel
    #[arg(long)]
    k: Option<usize>,
    /// Weight decay exponent (>= 2)
    #[arg(long)]
    kappa: Option<f64>,
    /// Weight grid points per direction
    #[arg(long)]
    gamma_count: Option<usize>,
    /// Largest weight coefficient
    #[arg(long)]
    gamma_max: Option<f64>,
    /// History window entering the weights
    #[arg(long)]
    max_lag: Option<usize>,
    /// Weight grid layout: tied or per-block
    #[arg(long)]
    dims: Option<String>,
    /// Functional aggregation: squared or literal
    #[arg(long)]
    form: Option<String>,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Quantile CSV with columns period, tau, quantile
    #[arg(long)]
    quantiles: Option<String>,
    /// Density evaluation points per period (0 = no density file)
    #[arg(long)]
    grid: Option<usize>,
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Factors(args) => cmd_factors(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Test(args) => cmd_test(args),
        Command::Montecarlo(args) => cmd_montecarlo(args),
        Command::Smooth(args) => cmd_smooth(args),
    }
}

/// Applies the worker-thread cap. Double initialization (tests calling the
/// CLI twice in-process) is harmless and ignored.
fn apply_thread_cap(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

// ---------------------------------------------------------------------------
// Config file parsing and per-key resolution
// ---------------------------------------------------------------------------

/// Parses flat config text into a key/value map.
///
/// If any line starts with `#cfg `, only such lines are read (the file is
/// an output embedding its configuration); otherwise every non-comment,
/// nonblank line must be `key = value`.
fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let embedded = text.lines().any(|l| l.trim_start().starts_with("#cfg "));
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let entry = if embedded {
            match line.strip_prefix("#cfg ") {
                Some(rest) => rest,
                None => continue,
            }
        } else {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            line
        };
        let (key, value) = entry.split_once('=').ok_or_else(|| {
            Error::Parameter(format!(
                "config line {} is not `key = value`: `{raw}`",
                idx + 1
            ))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parameter(format!(
                "config line {} has an empty key",
                idx + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Parameter(format!(
                "duplicate config key `{key}` at line {}",
                idx + 1
            )));
        }
    }
    Ok(map)
}

/// Per-key resolver: tracks which file keys were consumed, records every
/// resolved value, and renders the `#cfg` block embedded in outputs.
struct Resolver {
    file: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    /// Loads the optional config file and pins the subcommand name: a file
    /// whose embedded `command` differs from the running subcommand is a
    /// wiring mistake, not a reproduction.
    fn new(common: &CommonArgs, command: &str) -> Result<Self> {
        let file = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Load(format!("cannot read config file {path}: {e}"))
                })?;
                parse_kv_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut resolver = Resolver {
            file,
            consumed: BTreeSet::new(),
            resolved: BTreeMap::new(),
        };
        if let Some(declared) = resolver.file_value("command") {
            if declared != command {
                return Err(Error::Parameter(format!(
                    "config file belongs to subcommand `{declared}`, not `{command}`"
                )));
            }
        }
        resolver
            .resolved
            .insert("command".into(), command.to_string());
        Ok(resolver)
    }

    fn file_value(&mut self, key: &str) -> Option<String> {
        let value = self.file.get(key).cloned();
        if value.is_some() {
            self.consumed.insert(key.to_string());
        }
        value
    }

    /// Resolves one key from flag, file, or default (in that order of
    /// preference) and records the outcome for embedding.
    fn raw(&mut self, key: &str, flag: Option<String>, default: Option<&str>) -> Option<String> {
        let value = flag
            .or_else(|| self.file_value(key))
            .or_else(|| default.map(str::to_string));
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.clone());
        }
        value
    }

    fn parse<T: std::str::FromStr>(key: &str, value: &str, kind: &str) -> Result<T> {
        value.parse().map_err(|_| {
            Error::Parameter(format!("config key `{key}`: cannot parse `{value}` as {kind}"))
        })
    }

    fn usize_key(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize> {
        let value = self
            .raw(key, flag.map(|v| v.to_string()), Some(&default.to_string()))
            .expect("default supplied");
        Self::parse(key, &value, "a nonnegative integer")
    }

    fn u64_key(&mut self, key: &str, flag: Option<u64>, default: u64) -> Result<u64> {
        let value = self
            .raw(key, flag.map(|v| v.to_string()), Some(&default.to_string()))
            .expect("default supplied");
        Self::parse(key, &value, "a nonnegative integer")
    }

    fn f64_key(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64> {
        let value = self
            .raw(key, flag.map(fmt_f64), Some(&fmt_f64(default)))
            .expect("default supplied");
        Self::parse(key, &value, "a real number")
    }

    /// A value restricted to a fixed set of words.
    fn choice_key(
        &mut self,
        key: &str,
        flag: Option<String>,
        default: &str,
        allowed: &[&str],
    ) -> Result<String> {
        let value = self.raw(key, flag, Some(default)).expect("default supplied");
        if !allowed.contains(&value.as_str()) {
            return Err(Error::Parameter(format!(
                "config key `{key}` must be one of {}, got `{value}`",
                allowed.join("|")
            )));
        }
        Ok(value)
    }

    /// A required input path; the error names the key so missing inputs are
    /// diagnosable from the message alone.
    fn required_path(&mut self, key: &str, flag: Option<String>) -> Result<String> {
        self.raw(key, flag, None).ok_or_else(|| {
            Error::Parameter(format!(
                "missing required input `{key}` (flag --{} or config key)",
                key.replace('_', "-")
            ))
        })
    }

    fn optional_path(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        self.raw(key, flag, None)
    }

    /// Comma-separated positive integers.
    fn usize_list_key(
        &mut self,
        key: &str,
        flag: Option<String>,
        default: &[usize],
    ) -> Result<Vec<usize>> {
        let default_text = default
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let value = self.raw(key, flag, Some(&default_text)).expect("default");
        let mut out = Vec::new();
        for part in value.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            out.push(Self::parse::<usize>(key, part, "an integer list entry")?);
        }
        if out.is_empty() {
            return Err(Error::Parameter(format!(
                "config key `{key}` must list at least one integer"
            )));
        }
        Ok(out)
    }

    /// `auto` or a positive integer; returns None for `auto`.
    fn k_key(&mut self, key: &str, flag: Option<String>) -> Result<Option<usize>> {
        let value = self.raw(key, flag, Some("auto")).expect("default supplied");
        if value == "auto" {
            return Ok(None);
        }
        let k: usize = Self::parse(key, &value, "`auto` or a positive integer")?;
        if k == 0 {
            return Err(Error::Parameter(format!(
                "config key `{key}` must be positive, got 0"
            )));
        }
        Ok(Some(k))
    }

    /// Rejects unknown config-file keys so typos cannot silently fall back
    /// to defaults.
    fn finish(&self) -> Result<()> {
        let unknown: Vec<&String> = self
            .file
            .keys()
            .filter(|k| !self.consumed.contains(*k) && *k != "command")
            .collect();
        if unknown.is_empty() {
            return Ok(());
        }
        let names = unknown
            .iter()
            .map(|k| format!("`{k}`"))
            .collect::<Vec<_>>()
            .join(", ");
        Err(Error::Parameter(format!(
            "unknown config key(s): {names}"
        )))
    }

    /// The resolved configuration as `#cfg` lines, sorted by key.
    fn embed_block(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.resolved {
            out.push_str("#cfg ");
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal form; embedded configs and CSV cells parse
/// back to the identical f64.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Compact display form for report text; full precision lives in the CSVs.
fn fmt_stat(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && (a >= 1e6 || a < 1e-4) {
        format!("{v:.6e}")
    } else {
        format!("{v:.4}")
    }
}

fn parse_penalty(name: &str) -> IcPenalty {
    match name {
        "p1" => IcPenalty::P1,
        "p3" => IcPenalty::P3,
        _ => IcPenalty::P2,
    }
}

fn parse_dims(name: &str) -> GammaDims {
    match name {
        "per-block" => GammaDims::PerBlock,
        _ => GammaDims::Tied,
    }
}

fn parse_form(name: &str) -> FunctionalForm {
    match name {
        "literal" => FunctionalForm::Literal,
        _ => FunctionalForm::Squared,
    }
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

fn read_input(path: &str, what: &str) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Load(format!("cannot read {what} file {path}: {e}")))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Panel CSV: header row, first column period labels, remaining columns one
/// series each; strict decimal-point reals.
fn parse_panel_csv(text: &str) -> Result<Panel> {
    let mut reader = csv_reader(text);
    let headers = reader.headers().map_err(Error::from)?.clone();
    if headers.len() < 2 {
        return Err(Error::Load(
            "panel file needs a period column plus at least one series column".into(),
        ));
    }
    let series_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut periods = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(Error::from)?;
        if record.len() != headers.len() {
            return Err(Error::Load(format!(
                "panel row {} has {} fields, header has {}",
                periods.len() + 2,
                record.len(),
                headers.len()
            )));
        }
        let period = record.get(0).unwrap_or("").to_string();
        let mut row = Vec::with_capacity(series_ids.len());
        for (j, cell) in record.iter().skip(1).enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::Load(format!(
                    "cannot parse value `{cell}` for series {} at period {period}",
                    series_ids[j]
                ))
            })?;
            row.push(value);
        }
        periods.push(period);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Load("panel file has no data rows".into()));
    }
    // File rows are periods; the panel stores series by row.
    let n = series_ids.len();
    let t = periods.len();
    let mut values = ndarray::Array2::zeros((n, t));
    for (time, row) in rows.iter().enumerate() {
        for (series, &v) in row.iter().enumerate() {
            values[(series, time)] = v;
        }
    }
    Panel::from_raw(values, series_ids, periods)
}

/// Series CSV: header row, first column period labels, exactly one value
/// column.
fn parse_series_csv(text: &str) -> Result<SeriesData> {
    let mut reader = csv_reader(text);
    let headers = reader.headers().map_err(Error::from)?.clone();
    if headers.len() != 2 {
        return Err(Error::Load(format!(
            "series file needs exactly one value column after the period \
             column, found {} columns",
            headers.len()
        )));
    }
    let name = headers.get(1).unwrap_or("value").to_string();
    let mut periods = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(Error::from)?;
        let period = record.get(0).unwrap_or("").to_string();
        let cell = record.get(1).unwrap_or("");
        let value: f64 = cell.parse().map_err(|_| {
            Error::Load(format!(
                "cannot parse value `{cell}` for series {name} at period {period}"
            ))
        })?;
        periods.push(period);
        values.push(value);
    }
    SeriesData::new(values, periods)
}

/// Long quantile CSV with columns period, tau, quantile.
fn parse_quantile_csv(text: &str) -> Result<Vec<(String, f64, f64)>> {
    let mut reader = csv_reader(text);
    let headers = reader.headers().map_err(Error::from)?.clone();
    let expect = ["period", "tau", "quantile"];
    let got: Vec<String> = headers.iter().map(|h| h.to_lowercase()).collect();
    if got != expect {
        return Err(Error::Load(format!(
            "quantile file must have header `period,tau,quantile`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(Error::from)?;
        let period = record.get(0).unwrap_or("").to_string();
        let tau: f64 = Resolver::parse("tau", record.get(1).unwrap_or(""), "a real number")?;
        let value: f64 =
            Resolver::parse("quantile", record.get(2).unwrap_or(""), "a real number")?;
        rows.push((period, tau, value));
    }
    if rows.is_empty() {
        return Err(Error::Load("quantile file has no data rows".into()));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Output writing
// ---------------------------------------------------------------------------

fn write_output(out_dir: &str, name: &str, content: &str) -> Result<String> {
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Load(format!("cannot create output directory {out_dir}: {e}")))?;
    let path = Path::new(out_dir).join(name);
    fs::write(&path, content)
        .map_err(|e| Error::Load(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces
// ---------------------------------------------------------------------------

/// Extracted factors aligned to the series periods; `None` when no panel is
/// configured. Returns the factor data and the k actually used.
fn factors_for(
    resolver: &mut Resolver,
    y: &SeriesData,
    panel_path: Option<&str>,
    k_fixed: Option<usize>,
    k_max_flag: Option<usize>,
    penalty: IcPenalty,
) -> Result<Option<(FactorData, usize)>> {
    let Some(path) = panel_path else {
        return Ok(None);
    };
    let panel = parse_panel_csv(&read_input(path, "panel")?)?;
    if panel.periods() != y.periods() {
        let detail = first_period_mismatch(panel.periods(), y.periods());
        return Err(Error::Alignment(format!(
            "panel and series periods differ: {detail}"
        )));
    }
    let cap = panel.n_series().min(panel.n_periods());
    let k_max = resolver.usize_key("k_max", k_max_flag, cap.min(8))?;
    let k = match k_fixed {
        Some(k) => k,
        None => select_num_factors(&panel, k_max, penalty)?,
    };
    let model = extract_factors(&panel, k)?;
    let factors = FactorData::new(model.factors().to_owned(), y.periods().to_vec())?;
    Ok(Some((factors, k)))
}

fn first_period_mismatch(a: &[String], b: &[String]) -> String {
    if a.len() != b.len() {
        return format!("{} vs {} periods", a.len(), b.len());
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            return format!("position {i}: `{x}` vs `{y}`");
        }
    }
    "identical".into()
}

// ---------------------------------------------------------------------------
// factors
// ---------------------------------------------------------------------------

fn cmd_factors(args: FactorsArgs) -> Result<()> {
    apply_thread_cap(args.common.threads);
    let mut r = Resolver::new(&args.common, "factors")?;
    let _seed = r.u64_key("seed", args.common.seed, DEFAULT_SEED)?;
    let panel_path = r.required_path("panel", args.panel)?;
    let k_fixed = r.k_key("k", args.k)?;
    let penalty_name = r.choice_key("penalty", args.penalty, "p2", &["p1", "p2", "p3"])?;
    let penalty = parse_penalty(&penalty_name);

    let panel = parse_panel_csv(&read_input(&panel_path, "panel")?)?;
    let cap = panel.n_series().min(panel.n_periods());
    let k_max = r.usize_key("k_max", args.k_max, cap.min(8))?;
    r.finish()?;

    let profile = ic_profile(&panel, k_max, penalty)?;
    let (k, source) = match k_fixed {
        Some(k) => (k, "fixed by configuration"),
        None => (
            select_num_factors(&panel, k_max, penalty)?,
            "information criterion",
        ),
    };
    let model = extract_factors(&panel, k)?;
    let embed = r.embed_block();

    let mut csv = String::from("period");
    for j in 1..=k {
        csv.push_str(&format!(",f{j}"));
    }
    csv.push('\n');
    for (i, period) in model.periods().iter().enumerate() {
        csv.push_str(period);
        for j in 0..k {
            csv.push(',');
            csv.push_str(&fmt_f64(model.factors()[(i, j)]));
        }
        csv.push('\n');
    }
    let factors_path = write_output(&args.common.out_dir, "factors.csv", &format!("{embed}{csv}"))?;

    let mut report = String::new();
    report.push_str("# factor extraction report\n");
    report.push_str(&embed);
    report.push_str(&format!("panel_series = {}\n", panel.n_series()));
    report.push_str(&format!("panel_periods = {}\n", panel.n_periods()));
    report.push_str(&format!("selected_k = {k}\n"));
    report.push_str(&format!("k_source = {source}\n"));
    report.push_str("\n[information criterion profile]\n");
    report.push_str("k  residual_variance  criterion\n");
    for row in &profile {
        report.push_str(&format!(
            "{:<2} {:<18} {}\n",
            row.k,
            fmt_f64(row.v),
            fmt_f64(row.ic)
        ));
    }
    report.push_str("\n[leading eigenvalues]\n");
    for (j, lam) in model.eigenvalues().iter().enumerate() {
        report.push_str(&format!("{}  {}\n", j + 1, fmt_f64(*lam)));
    }
    let report_path = write_output(&args.common.out_dir, "factor_report.txt", &report)?;

    println!(
        "extracted {k} factor(s) from {} series x {} periods ({source})",
        panel.n_series(),
        panel.n_periods()
    );
    println!("wrote {factors_path}");
    println!("wrote {report_path}");
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn cmd_fit(args: FitArgs) -> Result<()> {
    apply_thread_cap(args.common.threads);
    let mut r = Resolver::new(&args.common, "fit")?;
    let _seed = r.u64_key("seed", args.common.seed, DEFAULT_SEED)?;
    let series_path = r.required_path("series", args.series)?;
    let panel_path = r.optional_path("panel", args.panel);
    let p = r.usize_key("p", args.p, 1)?;
    let m = r.usize_key("tau_points", args.tau_points, 17)?;
    let tau_min = r.f64_key("tau_min", args.tau_min, 0.1)?;
    let tau_max = r.f64_key("tau_max", args.tau_max, 0.9)?;
    let (k_fixed, penalty) = if panel_path.is_some() {
        let k_fixed = r.k_key("k", args.k)?;
        let name = r.choice_key("penalty", args.penalty, "p2", &["p1", "p2", "p3"])?;
        (k_fixed, parse_penalty(&name))
    } else {
        (None, IcPenalty::P2)
    };

    let y = parse_series_csv(&read_input(&series_path, "series")?)?;
    let factors = factors_for(
        &mut r,
        &y,
        panel_path.as_deref(),
        k_fixed,
        args.k_max,
        penalty,
    )?;
    r.finish()?;

    let grid = tau_grid(m, tau_min, tau_max)?;
    let factor_data = factors.as_ref().map(|(fd, _)| fd);
    let frame = build_frame(&y, p, factor_data)?;
    let path = fit_path(&frame, &grid)?;
    let embed = r.embed_block();

    let k = frame.k();
    let mut csv = String::from("tau,intercept");
    for lag in 1..=p {
        csv.push_str(&format!(",lag{lag}"));
    }
    for j in 1..=k {
        csv.push_str(&format!(",factor{j}"));
    }
    csv.push_str(",objective,iterations\n");
    for (q, &tau) in grid.iter().enumerate() {
        csv.push_str(&fmt_f64(tau));
        for c in 0..frame.d() {
            csv.push(',');
            csv.push_str(&fmt_f64(path.coefficients()[(q, c)]));
        }
        csv.push_str(&format!(
            ",{},{}\n",
            fmt_f64(path.objectives()[q]),
            path.iterations()[q]
        ));
    }
    let coef_path = write_output(
        &args.common.out_dir,
        "coefficients.csv",
        &format!("{embed}{csv}"),
    )?;

    let predictions = path.predict(frame.design());
    let mut qcsv = String::from("period,tau,quantile\n");
    for (i, period) in frame.periods().iter().enumerate() {
        for (q, &tau) in grid.iter().enumerate() {
            qcsv.push_str(&format!(
                "{period},{},{}\n",
                fmt_f64(tau),
                fmt_f64(predictions[(i, q)])
            ));
        }
    }
    let quant_path = write_output(
        &args.common.out_dir,
        "fitted_quantiles.csv",
        &format!("{embed}{qcsv}"),
    )?;

    println!(
        "fitted {} quantile levels on {} effective rows (p = {p}, k = {k}); \
         {} monotonicity crossings",
        grid.len(),
        frame.t_eff(),
        path.crossings()
    );
    println!("wrote {coef_path}");
    println!("wrote {quant_path}");
    Ok(())
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

struct StageRow {
    m: usize,
    run: TestRun,
}

fn cmd_test(args: TestArgs) -> Result<()> {
    apply_thread_cap(args.common.threads);
    let mut r = Resolver::new(&args.common, "test")?;
    let seed = r.u64_key("seed", args.common.seed, DEFAULT_SEED)?;
    let series_path = r.required_path("series", args.series)?;
    let panel_path = r.optional_path("panel", args.panel);
    let p = r.usize_key("p", args.p, 1)?;
    let m_list = r.usize_list_key("tau_points", args.tau_points, &[5, 9, 17])?;
    let tau_min = r.f64_key("tau_min", args.tau_min, 0.1)?;
    let tau_max = r.f64_key("tau_max", args.tau_max, 0.9)?;
    let boot_reps = r.usize_key("boot_reps", args.boot_reps, 199)?;
    let alpha = r.f64_key("alpha", args.alpha, 0.05)?;
    let weights = WeightConfig {
        kappa: r.f64_key("kappa", args.kappa, 2.0)?,
        gamma_count: r.usize_key("gamma_count", args.gamma_count, 30)?,
        gamma_max: r.f64_key("gamma_max", args.gamma_max, 3.0)?,
        max_lag: r.usize_key("max_lag", args.max_lag, 4)?,
        dims: parse_dims(&r.choice_key("dims", args.dims, "tied", &["tied", "per-block"])?),
        ..WeightConfig::default()
    };
    let form = parse_form(&r.choice_key("form", args.form, "squared", &["squared", "literal"])?);
    let (k_fixed, penalty) = if panel_path.is_some() {
        let k_fixed = r.k_key("k", args.k)?;
        let name = r.choice_key("penalty", args.penalty, "p2", &["p1", "p2", "p3"])?;
        (k_fixed, parse_penalty(&name))
    } else {
        (None, IcPenalty::P2)
    };
    weights.validate()?;

    let y = parse_series_csv(&read_input(&series_path, "series")?)?;
    let factors = factors_for(
        &mut r,
        &y,
        panel_path.as_deref(),
        k_fixed,
        args.k_max,
        penalty,
    )?;
    r.finish()?;
    let embed = r.embed_block();
    let streams = Streams::new(seed);

    let factor_data = factors.as_ref().map(|(fd, _)| fd);
    let frame_h01 = build_frame(&y, p, None)?;
    let mut stage1 = Vec::new();
    for &m in &m_list {
        let grid = tau_grid(m, tau_min, tau_max)?;
        let boot = BootstrapConfig {
            replications: boot_reps,
            seed: streams.derive_seed("test-stage1", m as u64),
            alpha,
        };
        let run = run_test(
            &frame_h01,
            factor_data,
            &weights,
            &boot,
            NullHypothesis::FactorsInWeightsOnly,
            form,
            &grid,
        )?;
        write_surface_csv(&args.common.out_dir, &embed, "h01", m, &run)?;
        stage1.push(StageRow { m, run });
    }

    // Second stage per grid size whose first-stage CvM p-value rejects,
    // and only when factors are available to enter the regression.
    let mut stage2: Vec<Option<StageRow>> = Vec::new();
    let mut frame_h02: Option<_> = None;
    for row in &stage1 {
        let rejected = row.run.bootstrap.p_cvm < alpha;
        if !(rejected && factor_data.is_some()) {
            stage2.push(None);
            continue;
        }
        if frame_h02.is_none() {
            frame_h02 = Some(build_frame(&y, p, factor_data)?);
        }
        let grid = tau_grid(row.m, tau_min, tau_max)?;
        let boot = BootstrapConfig {
            replications: boot_reps,
            seed: streams.derive_seed("test-stage2", row.m as u64),
            alpha,
        };
        let run = run_test(
            frame_h02.as_ref().expect("just built"),
            factor_data,
            &weights,
            &boot,
            NullHypothesis::FactorsAsRegressors,
            form,
            &grid,
        )?;
        write_surface_csv(&args.common.out_dir, &embed, "h02", row.m, &run)?;
        stage2.push(Some(StageRow { m: row.m, run }));
    }

    let report = render_test_report(&embed, &y, factors.as_ref(), alpha, &stage1, &stage2);
    let report_path = write_output(&args.common.out_dir, "test_report.txt", &report)?;
    println!("wrote {report_path}");
    for row in &stage1 {
        println!(
            "m = {:>2}: stage-1 p(cvm) = {}, p(ks) = {}",
            row.m,
            fmt_stat(row.run.bootstrap.p_cvm),
            fmt_stat(row.run.bootstrap.p_ks)
        );
    }
    Ok(())
}

fn write_surface_csv(
    out_dir: &str,
    embed: &str,
    stage: &str,
    m: usize,
    run: &TestRun,
) -> Result<()> {
    let surface = &run.surface;
    let mut csv = String::from("tau,gamma_y,gamma_f,s\n");
    for (q, &tau) in surface.tau_grid().iter().enumerate() {
        for (c, cell) in surface.cells().iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(tau),
                fmt_f64(cell.gamma_y),
                fmt_f64(cell.gamma_f),
                fmt_f64(surface.values()[(q, c)])
            ));
        }
    }
    write_output(
        out_dir,
        &format!("surface_{stage}_m{m}.csv"),
        &format!("{embed}{csv}"),
    )?;
    Ok(())
}

fn render_test_report(
    embed: &str,
    y: &SeriesData,
    factors: Option<&(FactorData, usize)>,
    alpha: f64,
    stage1: &[StageRow],
    stage2: &[Option<StageRow>],
) -> String {
    let mut out = String::new();
    out.push_str("# joint specification test report\n");
    out.push_str(embed);
    out.push_str(&format!("series_periods = {}\n", y.len()));
    match factors {
        Some((_, k)) => out.push_str(&format!("factors_used = {k}\n")),
        None => out.push_str("factors_used = none\n"),
    }
    out.push_str(
        "\n[stage 1: null = quantile autoregression correctly specified, \
         factors omitted from the regression]\n",
    );
    for row in stage1 {
        let b = &row.run.bootstrap;
        out.push_str(&format!(
            "m = {:>2}: cvm = {}, p_cvm = {}, ks = {}, p_ks = {} -> {}\n",
            row.m,
            fmt_stat(b.original_cvm),
            fmt_stat(b.p_cvm),
            fmt_stat(b.original_ks),
            fmt_stat(b.p_ks),
            if b.p_cvm < alpha {
                "rejected"
            } else {
                "not rejected"
            }
        ));
    }
    out.push_str("\n[decision]\n");
    out.push_str(&format!(
        "rule = run stage 2 for every grid size whose stage-1 CvM p-value \
         falls below alpha = {}\n",
        fmt_f64(alpha)
    ));
    let any_rejected = stage1
        .iter()
        .any(|row| row.run.bootstrap.p_cvm < alpha);
    if !any_rejected {
        out.push_str(
            "stage_2 = skipped: no stage-1 rejection, the dynamic quantile \
             specification stands\n",
        );
    } else if factors.is_none() {
        out.push_str(
            "stage_2 = skipped: stage 1 rejected but no panel of candidate \
             factors was supplied\n",
        );
    } else {
        let ms: Vec<String> = stage2
            .iter()
            .flatten()
            .map(|r| r.m.to_string())
            .collect();
        out.push_str(&format!(
            "stage_2 = run for grid sizes {{{}}} with factors entering the \
             regression\n",
            ms.join(", ")
        ));
    }
    let has_stage2 = stage2.iter().any(Option::is_some);
    if has_stage2 {
        out.push_str("\n[stage 2: null = factor-augmented quantile autoregression correctly specified]\n");
        for row in stage2.iter().flatten() {
            let b = &row.run.bootstrap;
            out.push_str(&format!(
                "m = {:>2}: cvm = {}, p_cvm = {}, ks = {}, p_ks = {} -> {}\n",
                row.m,
                fmt_f64(b.original_cvm),
                fmt_f64(b.p_cvm),
                fmt_f64(b.original_ks),
                fmt_f64(b.p_ks),
                if b.p_cvm < alpha {
                    "rejected"
                } else {
                    "not rejected"
                }
            ));
        }
    }
    out.push_str("\n[p-values]\n");
    out.push_str("m    stage1_cvm  stage1_ks  stage2_cvm  stage2_ks\n");
    for (i, row) in stage1.iter().enumerate() {
        let (s2c, s2k) = match stage2.get(i).and_then(Option::as_ref) {
            Some(r) => (
                fmt_stat(r.run.bootstrap.p_cvm),
                fmt_stat(r.run.bootstrap.p_ks),
            ),
            None => ("-".into(), "-".into()),
        };
        out.push_str(&format!(
            "{:<4} {:<11} {:<10} {:<11} {}\n",
            row.m,
            fmt_stat(row.run.bootstrap.p_cvm),
            fmt_stat(row.run.bootstrap.p_ks),
            s2c,
            s2k
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// montecarlo
// ---------------------------------------------------------------------------

fn cmd_montecarlo(args: MontecarloArgs) -> Result<()> {
    apply_thread_cap(args.common.threads);
    let mut r = Resolver::new(&args.common, "montecarlo")?;
    let seed = r.u64_key("seed", args.common.seed, DEFAULT_SEED)?;
    let scale_flag = if args.full_scale {
        Some("full".to_string())
    } else {
        args.scale
    };
    let scale_name = r.choice_key("scale", scale_flag, "desk", &["desk", "full"])?;
    let scale = if scale_name == "full" {
        Scale::Full
    } else {
        Scale::Desk
    };
    let case = r.choice_key("case", args.case, "all", &["all", "case1", "case2"])?;
    let mut cfg = McConfig::at_scale(scale, seed);
    cfg.mc_reps = r.usize_key("mc_reps", args.mc_reps, cfg.mc_reps)?;
    cfg.boot_reps = r.usize_key("boot_reps", args.boot_reps, cfg.boot_reps)?;
    cfg.alpha = r.f64_key("alpha", args.alpha, cfg.alpha)?;
    cfg.tau_points = r.usize_key("tau_points", args.tau_points, cfg.tau_points)?;
    cfg.p = r.usize_key("p", args.p, cfg.p)?;
    cfg.k = r.usize_key("k", args.k, cfg.k)?;
    cfg.weights = WeightConfig {
        kappa: r.f64_key("kappa", args.kappa, 2.0)?,
        gamma_count: r.usize_key("gamma_count", args.gamma_count, 30)?,
        gamma_max: r.f64_key("gamma_max", args.gamma_max, 3.0)?,
        max_lag: r.usize_key("max_lag", args.max_lag, 4)?,
        dims: parse_dims(&r.choice_key("dims", args.dims, "tied", &["tied", "per-block"])?),
        ..WeightConfig::default()
    };
    cfg.form = parse_form(&r.choice_key("form", args.form, "squared", &["squared", "literal"])?);
    r.finish()?;
    cfg.validate()?;

    let cells: Vec<_> = study_cells()
        .into_iter()
        .filter(|cell| case == "all" || cell.dgp.case.label() == case)
        .collect();
    if scale == Scale::Full {
        eprintln!(
            "warning: full scale runs {} replications x {} bootstrap draws \
             per cell across {} cells; expect hours, not minutes",
            cfg.mc_reps,
            cfg.boot_reps,
            cells.len()
        );
    }
    let table = crate::monte_carlo::run_experiment(&cells, &cfg)?;
    let embed = r.embed_block();
    let csv_path = write_output(
        &args.common.out_dir,
        "montecarlo.csv",
        &format!("{embed}{}", table.to_csv()),
    )?;
    let txt_path = write_output(
        &args.common.out_dir,
        "montecarlo.txt",
        &format!("{embed}\n{}", table.to_text()),
    )?;
    println!(
        "tabulated {} cells at {} x {} replications",
        cells.len(),
        cfg.mc_reps,
        cfg.boot_reps
    );
    println!("wrote {csv_path}");
    println!("wrote {txt_path}");
    Ok(())
}

// ---------------------------------------------------------------------------
// smooth
// ---------------------------------------------------------------------------

enum PeriodFit {
    Fitted(SkewTFit),
    Flagged(String),
}

fn cmd_smooth(args: SmoothArgs) -> Result<()> {
    apply_thread_cap(args.common.threads);
    let mut r = Resolver::new(&args.common, "smooth")?;
    let _seed = r.u64_key("seed", args.common.seed, DEFAULT_SEED)?;
    let quantiles_path = r.required_path("quantiles", args.quantiles)?;
    let grid = r.usize_key("grid", args.grid, 0)?;
    r.finish()?;
    if grid == 1 {
        return Err(Error::Parameter(
            "density grid needs at least 2 points (or 0 to skip it)".into(),
        ));
    }

    let rows = parse_quantile_csv(&read_input(&quantiles_path, "quantile")?)?;
    // Group by period, preserving first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut by_period: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    for (period, tau, value) in rows {
        by_period
            .entry(period.clone())
            .or_insert_with(|| {
                order.push(period.clone());
                Vec::new()
            })
            .push((tau, value));
    }

    let fits: Vec<(String, PeriodFit)> = order
        .par_iter()
        .map(|period| {
            let mut pairs = by_period[period].clone();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let outcome = fit_period(&pairs);
            (period.clone(), outcome)
        })
        .collect();

    let embed = r.embed_block();
    let mut csv = String::from("period,status,mu,sigma,alpha,nu,objective,converged\n");
    let mut fitted = 0usize;
    let mut flagged = 0usize;
    for (period, outcome) in &fits {
        match outcome {
            PeriodFit::Fitted(fit) => {
                fitted += 1;
                csv.push_str(&format!(
                    "{period},ok,{},{},{},{},{},{}\n",
                    fmt_f64(fit.params.mu),
                    fmt_f64(fit.params.sigma),
                    fmt_f64(fit.params.alpha),
                    fmt_f64(fit.params.nu),
                    fmt_f64(fit.objective),
                    fit.converged
                ));
            }
            PeriodFit::Flagged(_) => {
                flagged += 1;
                csv.push_str(&format!("{period},flagged,,,,,,\n"));
            }
        }
    }
    let params_path = write_output(
        &args.common.out_dir,
        "smooth_params.csv",
        &format!("{embed}{csv}"),
    )?;

    let mut report = String::new();
    report.push_str("# density smoothing report\n");
    report.push_str(&embed);
    report.push_str(&format!("periods = {}\n", fits.len()));
    report.push_str(&format!("fitted = {fitted}\n"));
    report.push_str(&format!("flagged = {flagged}\n"));
    if flagged > 0 {
        report.push_str("\n[flagged periods]\n");
        for (period, outcome) in &fits {
            if let PeriodFit::Flagged(reason) = outcome {
                report.push_str(&format!("{period}: {reason}\n"));
            }
        }
    }
    let report_path = write_output(&args.common.out_dir, "smooth_report.txt", &report)?;

    let mut density_path = None;
    if grid >= 2 {
        let mut dcsv = String::from("period,y,density\n");
        for (period, outcome) in &fits {
            let PeriodFit::Fitted(fit) = outcome else {
                continue;
            };
            let lo = fit.params.mu - 6.0 * fit.params.sigma;
            let hi = fit.params.mu + 6.0 * fit.params.sigma;
            for i in 0..grid {
                let y = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
                let density = skewt_pdf(y, &fit.params)?;
                dcsv.push_str(&format!("{period},{},{}\n", fmt_f64(y), fmt_f64(density)));
            }
        }
        density_path = Some(write_output(
            &args.common.out_dir,
            "smooth_density.csv",
            &format!("{embed}{dcsv}"),
        )?);
    }

    println!("fitted {fitted} period(s), flagged {flagged}");
    println!("wrote {params_path}");
    println!("wrote {report_path}");
    if let Some(path) = density_path {
        println!("wrote {path}");
    }
    if fitted == 0 {
        return Err(Error::Parameter(format!(
            "no period yielded a usable quantile set; see {report_path}"
        )));
    }
    Ok(())
}

fn fit_period(pairs: &[(f64, f64)]) -> PeriodFit {
    for window in pairs.windows(2) {
        if window[0].0 == window[1].0 {
            return PeriodFit::Flagged(format!(
                "duplicate quantile level {}",
                fmt_f64(window[0].0)
            ));
        }
    }
    let probs: Vec<f64> = pairs.iter().map(|(p, _)| *p).collect();
    let values: Vec<f64> = pairs.iter().map(|(_, v)| *v).collect();
    let targets = match QuantileTargets::new(probs, values) {
        Ok(t) => t,
        Err(e) => return PeriodFit::Flagged(e.to_string()),
    };
    match fit_skewt(&targets) {
        Ok(fit) => PeriodFit::Fitted(fit),
        Err(e) => PeriodFit::Flagged(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_text_plain_and_embedded_forms() {
        let plain = "\n# comment\np = 3\nseed = 9\n";
        let map = parse_kv_text(plain).unwrap();
        assert_eq!(map["p"], "3");
        assert_eq!(map["seed"], "9");

        // With #cfg lines present, data and plain comments are ignored.
        let embedded = "#cfg p = 4\n# note\nperiod,tau,quantile\nq1,0.5,1.25\n#cfg seed = 7\n";
        let map = parse_kv_text(embedded).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["p"], "4");
        assert_eq!(map["seed"], "7");

        let broken = "p: 3\n";
        assert!(parse_kv_text(broken).is_err());
        let dup = "p = 1\np = 2\n";
        assert!(parse_kv_text(dup).unwrap_err().to_string().contains("duplicate"));
    }

    fn resolver_from(text: &str, command: &str) -> Result<Resolver> {
        let mut resolver = Resolver {
            file: parse_kv_text(text)?,
            consumed: BTreeSet::new(),
            resolved: BTreeMap::new(),
        };
        if let Some(declared) = resolver.file_value("command") {
            if declared != command {
                return Err(Error::Parameter(format!(
                    "config file belongs to subcommand `{declared}`, not `{command}`"
                )));
            }
        }
        resolver
            .resolved
            .insert("command".into(), command.to_string());
        Ok(resolver)
    }

    #[test]
    fn precedence_is_default_then_file_then_flag() {
        let mut r = resolver_from("p = 5\n", "fit").unwrap();
        // File overrides default.
        assert_eq!(r.usize_key("p", None, 1).unwrap(), 5);
        // Flag overrides file.
        let mut r = resolver_from("p = 5\n", "fit").unwrap();
        assert_eq!(r.usize_key("p", Some(9), 1).unwrap(), 9);
        // Default applies when neither is given.
        let mut r = resolver_from("", "fit").unwrap();
        assert_eq!(r.usize_key("p", None, 1).unwrap(), 1);
    }

    #[test]
    fn unknown_keys_and_foreign_commands_are_rejected()
    {
        let mut r = resolver_from("p = 5\nmystery = 1\n", "fit").unwrap();
        let _ = r.usize_key("p", None, 1).unwrap();
        let err = r.finish().unwrap_err().to_string();
        assert!(err.contains("mystery"), "{err}");

        let err = match resolver_from("command = smooth\n", "fit") {
            Err(e) => e.to_string(),
            Ok(_) => panic!("foreign command accepted"),
        };
        assert!(err.contains("smooth"), "{err}");
    }

    #[test]
    fn embed_block_round_trips_through_the_parser() {
        let mut r = resolver_from("", "test").unwrap();
        let _ = r.u64_key("seed", Some(41), 17).unwrap();
        let _ = r.f64_key("alpha", None, 0.05).unwrap();
        let _ = r.usize_list_key("tau_points", None, &[5, 9, 17]).unwrap();
        let block = r.embed_block();
        assert!(block.starts_with("#cfg "));
        let reparsed = parse_kv_text(&format!("{block}data,rows\n1,2\n")).unwrap();
        assert_eq!(reparsed["seed"], "41");
        assert_eq!(reparsed["alpha"], "0.05");
        assert_eq!(reparsed["tau_points"], "5,9,17");
        assert_eq!(reparsed["command"], "test");
    }

    #[test]
    fn list_and_choice_keys_validate() {
        let mut r = resolver_from("", "test").unwrap();
        assert_eq!(
            r.usize_list_key("tau_points", Some("5, 9,17".into()), &[5]).unwrap(),
            vec![5, 9, 17]
        );
        let mut r = resolver_from("", "test").unwrap();
        assert!(r.usize_list_key("tau_points", Some("5,x".into()), &[5]).is_err());
        let mut r = resolver_from("", "montecarlo").unwrap();
        let err = r
            .choice_key("case", Some("case9".into()), "all", &["all", "case1", "case2"])
            .unwrap_err()
            .to_string();
        assert!(err.contains("case9") && err.contains("case1"), "{err}");
        let mut r = resolver_from("", "factors").unwrap();
        assert_eq!(r.k_key("k", Some("auto".into())).unwrap(), None);
        let mut r = resolver_from("", "factors").unwrap();
        assert_eq!(r.k_key("k", Some("3".into())).unwrap(), Some(3));
        let mut r = resolver_from("", "factors").unwrap();
        assert!(r.k_key("k", Some("0".into())).is_err());
    }

    #[test]
    fn panel_csv_parses_and_reports_bad_cells() {
        let text = "period,gdp,cpi\n1991Q1,1.0,2.0\n1991Q2,1.5,2.5\n1991Q3,0.5,1.5\n\
                    1991Q4,2.0,3.0\n1992Q1,0.0,1.0\n";
        let panel = parse_panel_csv(text).unwrap();
        assert_eq!(panel.n_series(), 2);
        assert_eq!(panel.n_periods(), 5);
        assert_eq!(panel.series_ids(), ["gdp", "cpi"]);
        assert_eq!(panel.periods()[1], "1991Q2");

        let bad = "period,gdp\n1991Q1,1.0\n1991Q2,oops\n";
        let err = parse_panel_csv(bad).unwrap_err().to_string();
        assert!(err.contains("gdp") && err.contains("1991Q2"), "{err}");
    }

    #[test]
    fn series_csv_requires_exactly_one_value_column() {
        let ok = "period,y\np1,1.0\np2,2.0\n";
        let y = parse_series_csv(ok).unwrap();
        assert_eq!(y.len(), 2);
        assert_eq!(y.values(), [1.0, 2.0]);

        let too_many = "period,y,z\np1,1.0,2.0\n";
        assert!(parse_series_csv(too_many).is_err());
    }

    #[test]
    fn quantile_csv_validates_header_and_cells() {
        let ok = "period,tau,quantile\nq1,0.25,1.0\nq1,0.75,2.0\n";
        let rows = parse_quantile_csv(ok).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], ("q1".into(), 0.25, 1.0));

        let bad_header = "period,level,value\nq1,0.25,1.0\n";
        assert!(parse_quantile_csv(bad_header).is_err());
    }

    #[test]
    fn comment_lines_are_skipped_when_reading_csv() {
        let text = "#cfg command = fit\n#cfg seed = 17\nperiod,y\np1,1.0\np2,2.0\n";
        let y = parse_series_csv(text).unwrap();
        assert_eq!(y.len(), 2);
    }

    #[test]
    fn f64_formatting_round_trips() {
        for &v in &[0.05, 1.0 / 3.0, 1e-12, 123456.789, -0.0321] {
            let text = fmt_f64(v);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{text}");
        }
    }
}
