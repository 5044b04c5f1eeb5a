//! Command-line front end. [`run`] parses arguments, runs one subcommand and
//! writes a JSON document; `main` only forwards the exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    latest_two_biases, run_bounds, run_compare_rr, run_event_study, run_forecast, run_mc, run_po, run_sc_bounds,
    run_validate, BoundsOptions, EventStudyOptions, ForecastOptions, InfoSpec, McEstimator, PlotRow, PoOptions,
    SCHEMA_VERSION,
};
use crate::dgp::{analytic_truth, simulate, DgpFamily, DgpSpec};
use crate::error::Error;
use crate::gdid::{DrSpec, OrSpec, PsSpec};
use crate::inference::{BootstrapPlan, ResampleLevel};
use crate::panel::{PanelDataset, SchemaConfig, TreatmentScheme};
use crate::po::LossKind;

/// Environment variable fixing the worker-thread count.
pub const THREADS_ENV: &str = "RDID_THREADS";

#[derive(Parser, Debug)]
#[command(name = "robust-did", version, about = "Bias-set bounds for difference-in-differences designs")]
struct Cli {
    /// Seed for every stochastic step (bootstrap, simulation, Monte Carlo).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bias-set bounds, standard DID, optional doubly-robust estimand and union CIs.
    Bounds(BoundsArgs),
    /// Policy-oriented point estimates under L1, L2 or L-infinity loss.
    Po(PoArgs),
    /// Trend forecast of the post-period bias.
    Forecast(ForecastArgs),
    /// Per-period bounds for multi-period designs, optionally with TWFE fits.
    EventStudy(EventStudyArgs),
    /// Worst-case bounds over a donor pool.
    ScBounds(ScArgs),
    /// Compare the bias-set hull with smoothness / relative-magnitude restrictions.
    CompareRr(RrArgs),
    /// Draw a dataset from a simulation design.
    Simulate(SimulateArgs),
    /// Monte Carlo study of an estimator against the design's analytic truth.
    Mc(McArgs),
    /// Load and check a dataset.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Input CSV in long format.
    #[arg(long, short)]
    input: PathBuf,
    /// JSON column mapping; flags below override it.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    unit_col: Option<String>,
    #[arg(long)]
    period_col: Option<String>,
    #[arg(long)]
    outcome_col: Option<String>,
    #[arg(long)]
    treatment_col: Option<String>,
    /// Covariate columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SchemeArg {
    BinarySinglePost,
    MultiPeriodPaths,
    DonorPool,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write the JSON result here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write a tidy per-period CSV for plotting.
    #[arg(long)]
    plot_csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct InfoArgs {
    /// Pre-periods in the information set, e.g. -2,-1,0 (default: all).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    info_periods: Option<Vec<i64>>,
    /// Discrete baseline covariate whose levels form the information set.
    #[arg(long, conflicts_with_all = ["info_periods", "info_sources", "bin_edges"])]
    info_covariate: Option<String>,
    /// Covariate coding the data source of each row.
    #[arg(long, conflicts_with_all = ["info_periods", "info_covariate"])]
    info_sources: Option<String>,
    /// Levels (or sources) to keep, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    levels: Option<Vec<i64>>,
    /// Bin edges for a continuous `--info-covariate`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "info_covariate")]
    bin_edges: Option<Vec<f64>>,
}

impl InfoArgs {
    fn spec(&self) -> InfoSpec {
        if let Some(col) = &self.info_covariate {
            match &self.bin_edges {
                Some(edges) => InfoSpec::Binned { column: col.clone(), edges: edges.clone() },
                None => InfoSpec::Covariate { column: col.clone(), levels: self.levels.clone() },
            }
        } else if let Some(col) = &self.info_sources {
            InfoSpec::Sources { column: col.clone(), sources: self.levels.clone() }
        } else {
            InfoSpec::periods(self.info_periods.as_deref().unwrap_or(&[]))
        }
    }
}

#[derive(Args, Debug, Clone)]
struct BootArgs {
    /// Number of bootstrap replicates; requires --seed.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    #[arg(long, value_enum, default_value_t = ResampleArg::Unit)]
    resample: ResampleArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ResampleArg {
    Unit,
    Row,
}

impl BootArgs {
    fn plan(&self, seed: Option<u64>) -> Result<Option<BootstrapPlan>, Failure> {
        let Some(b) = self.bootstrap else { return Ok(None) };
        let seed = seed.ok_or_else(|| Failure::Usage("--seed is required with --bootstrap".into()))?;
        Ok(Some(BootstrapPlan {
            replicates: b,
            seed,
            resample: match self.resample {
                ResampleArg::Unit => ResampleLevel::Unit,
                ResampleArg::Row => ResampleLevel::Row,
            },
            ci_level: self.ci_level,
        }))
    }
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    info: InfoArgs,
    #[command(flatten)]
    boot: BootArgs,
    /// Also compute the doubly-robust estimand and its bounds.
    #[arg(long)]
    dr: bool,
    #[arg(long, value_enum, default_value_t = PsArg::Logit)]
    ps: PsArg,
    #[arg(long = "or", value_enum, default_value_t = OrArg::Linear)]
    or_model: OrArg,
    /// Propensity clipping threshold.
    #[arg(long, default_value_t = 1e-6)]
    clip: f64,
    /// Also report bounds under bias-variation stability.
    #[arg(long)]
    variation: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PsArg {
    Logit,
    KnownConstant,
    Saturated,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum OrArg {
    Linear,
    Quadratic,
    KnownConstant,
    Saturated,
}

#[derive(Args, Debug)]
struct PoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    info: InfoArgs,
    #[command(flatten)]
    boot: BootArgs,
    /// Losses, comma separated (default: all three).
    #[arg(long, value_delimiter = ',', value_parser = parse_loss)]
    loss: Option<Vec<LossKind>>,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse::<LossKind>().map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    info_periods: Option<Vec<i64>>,
    /// Polynomial degree of the bias trend.
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Period at which the trend is evaluated (default: post-period midpoint).
    #[arg(long, allow_hyphen_values = true)]
    target: Option<f64>,
    #[command(flatten)]
    boot: BootArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct EventStudyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    info_periods: Option<Vec<i64>>,
    /// Fit the saturated TWFE regression for each baseline.
    #[arg(long)]
    twfe: bool,
    #[command(flatten)]
    boot: BootArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct ScArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    info_periods: Option<Vec<i64>>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct RrArgs {
    /// Dataset to take SB_-1 and SB_0 from (the two latest pre-periods).
    #[arg(long, short, conflicts_with_all = ["sb_minus1", "sb0"])]
    input: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true, requires = "sb0")]
    sb_minus1: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "sb_minus1")]
    sb0: Option<f64>,
    /// Smoothness bound on the change in bias slope.
    #[arg(long = "M", alias = "m", allow_hyphen_values = true)]
    m: Option<f64>,
    /// Relative-magnitude bound.
    #[arg(long = "Mbar", alias = "mbar", allow_hyphen_values = true)]
    mbar: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
struct DesignArgs {
    /// Simulation family.
    #[arg(long, value_parser = parse_family, required_unless_present = "spec")]
    family: Option<DgpFamily>,
    /// Number of units.
    #[arg(long, short = 'n', default_value_t = 1000)]
    n: usize,
    /// Parameter override `name=value`, repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// JSON design (family, params, n, seed); flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<DgpFamily, String> {
    s.parse::<DgpFamily>().map_err(|e| e.to_string())
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

impl DesignArgs {
    fn spec(&self, seed: Option<u64>, n_given: bool) -> Result<DgpSpec, Failure> {
        let mut spec = match &self.spec {
            Some(p) => DgpSpec::from_json_file(p)?,
            None => DgpSpec::new(self.family.expect("clap enforces --family"), self.n, 0),
        };
        if let Some(f) = self.family {
            spec.family = f;
        }
        if n_given || self.spec.is_none() {
            spec.n = self.n;
        }
        if let Some(s) = seed {
            spec.seed = s;
        }
        for (k, v) in &self.params {
            spec.params.insert(k.clone(), *v);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// CSV destination (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write the analytic truth of the design as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the column schema of the emitted CSV as JSON.
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, value_parser = parse_estimator, default_value = "bounds")]
    estimator: McEstimator,
    /// Bootstrap replicates per dataset for union-CI coverage.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_estimator(s: &str) -> Result<McEstimator, String> {
    s.parse::<McEstimator>().map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Propensity threshold for the overlap check.
    #[arg(long, default_value_t = 0.01)]
    overlap_epsilon: f64,
    #[command(flatten)]
    out: OutputArgs,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Failure {
    Failure::Data(Error::Io { path: path.to_path_buf(), source })
}

fn load(data: &DataArgs) -> Result<PanelDataset, Failure> {
    let mut schema = match &data.schema {
        Some(p) => SchemaConfig::from_json_file(p)?,
        None => SchemaConfig::default(),
    };
    let set = |dst: &mut String, v: &Option<String>| {
        if let Some(v) = v {
            dst.clone_from(v);
        }
    };
    set(&mut schema.unit, &data.unit_col);
    set(&mut schema.period, &data.period_col);
    set(&mut schema.outcome, &data.outcome_col);
    set(&mut schema.treatment, &data.treatment_col);
    if let Some(c) = &data.covariates {
        schema.covariates = c.clone();
    }
    if let Some(s) = data.scheme {
        schema.scheme = Some(match s {
            SchemeArg::BinarySinglePost => TreatmentScheme::BinarySinglePost,
            SchemeArg::MultiPeriodPaths => TreatmentScheme::MultiPeriodPaths,
            SchemeArg::DonorPool => TreatmentScheme::DonorPool,
        });
    }
    Ok(PanelDataset::load_csv(&data.input, &schema)?)
}

fn envelope(command: &str, input: Option<&Path>, seed: Option<u64>, result: impl Serialize) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "input": input.map(|p| p.display().to_string()),
        "seed": seed,
        "result": result,
    })
}

fn write_plot_csv(path: &Path, rows: &[PlotRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Data(Error::Parse(e.to_string())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Data(Error::Parse(e.to_string())))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn emit(out: &OutputArgs, doc: &serde_json::Value, plot: Option<Vec<PlotRow>>, stdout: &mut dyn Write) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("reports serialise");
    match &out.output {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| io_error(p, e))?,
        None => writeln!(stdout, "{text}").map_err(|e| io_error(Path::new("<stdout>"), e))?,
    }
    if let (Some(path), Some(rows)) = (&out.plot_csv, plot) {
        write_plot_csv(path, &rows)?;
    }
    Ok(())
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Bounds(a) => {
            let ds = load(&a.data)?;
            let dr = a.dr.then(|| DrSpec {
                ps: match a.ps {
                    PsArg::Logit => PsSpec::Logit,
                    PsArg::KnownConstant => PsSpec::KnownConstant,
                    PsArg::Saturated => PsSpec::Saturated,
                },
                or: match a.or_model {
                    OrArg::Linear => OrSpec::Linear,
                    OrArg::Quadratic => OrSpec::Quadratic,
                    OrArg::KnownConstant => OrSpec::KnownConstant,
                    OrArg::Saturated => OrSpec::Saturated,
                },
                clip: a.clip,
            });
            let opts = BoundsOptions { info: a.info.spec(), dr, bootstrap: a.boot.plan(seed)?, variation: a.variation };
            let r = run_bounds(&ds, &opts)?;
            emit(&a.out, &envelope("bounds", Some(&a.data.input), seed, &r), Some(r.plot_rows()), stdout)
        }
        Command::Po(a) => {
            let ds = load(&a.data)?;
            let opts = PoOptions {
                info: a.info.spec(),
                losses: a.loss.clone().unwrap_or_else(|| LossKind::ALL.to_vec()),
                bootstrap: a.boot.plan(seed)?,
            };
            let r = run_po(&ds, &opts)?;
            emit(&a.out, &envelope("po", Some(&a.data.input), seed, &r), Some(r.plot_rows()), stdout)
        }
        Command::Forecast(a) => {
            let ds = load(&a.data)?;
            let opts = ForecastOptions {
                info_periods: a.info_periods.clone().unwrap_or_default(),
                degree: a.degree,
                target: a.target,
                bootstrap: a.boot.plan(seed)?,
            };
            let r = run_forecast(&ds, &opts)?;
            emit(&a.out, &envelope("forecast", Some(&a.data.input), seed, &r), Some(r.plot_rows()), stdout)
        }
        Command::EventStudy(a) => {
            let ds = load(&a.data)?;
            let opts = EventStudyOptions {
                info_periods: a.info_periods.clone().unwrap_or_default(),
                bootstrap: a.boot.plan(seed)?,
                twfe: a.twfe,
            };
            let r = run_event_study(&ds, &opts)?;
            emit(&a.out, &envelope("event-study", Some(&a.data.input), seed, &r), Some(r.plot_rows()), stdout)
        }
        Command::ScBounds(a) => {
            let ds = load(&a.data)?;
            let r = run_sc_bounds(&ds, a.info_periods.as_deref().unwrap_or(&[]))?;
            let row = PlotRow {
                series: "sc_bounds".into(),
                period: r.post_period as f64,
                lower: r.bounds.lower,
                upper: r.bounds.upper,
                ci_lower: None,
                ci_upper: None,
            };
            emit(&a.out, &envelope("sc-bounds", Some(&a.data.input), seed, &r), Some(vec![row]), stdout)
        }
        Command::CompareRr(a) => {
            let (sb_m1, sb0) = match (&a.input, a.sb_minus1, a.sb0) {
                (Some(p), _, _) => {
                    let data = DataArgs {
                        input: p.clone(),
                        schema: a.schema.clone(),
                        unit_col: None,
                        period_col: None,
                        outcome_col: None,
                        treatment_col: None,
                        covariates: None,
                        scheme: None,
                    };
                    latest_two_biases(&load(&data)?)?
                }
                (None, Some(x), Some(y)) => (x, y),
                _ => return Err(Failure::Usage("give --input or both --sb-minus1 and --sb0".into())),
            };
            if a.m.is_none() && a.mbar.is_none() {
                return Err(Failure::Usage("give --M, --Mbar or both".into()));
            }
            let r = run_compare_rr(sb_m1, sb0, a.m, a.mbar)?;
            emit(&a.out, &envelope("compare-rr", a.input.as_deref(), seed, &r), None, stdout)
        }
        Command::Simulate(a) => {
            if seed.is_none() && a.design.spec.is_none() {
                return Err(Failure::Usage("--seed is required for simulate".into()));
            }
            let spec = a.design.spec(seed, true)?;
            let ds = simulate(&spec)?;
            match &a.output {
                Some(p) => ds.save_csv(p)?,
                None => ds.write_csv(&mut *stdout)?,
            }
            if let Some(p) = &a.truth {
                let doc = envelope("simulate", None, Some(spec.seed), json!({ "spec": spec, "truth": analytic_truth(&spec) }));
                std::fs::write(p, serde_json::to_string_pretty(&doc).expect("serialises") + "\n").map_err(|e| io_error(p, e))?;
            }
            if let Some(p) = &a.schema_out {
                let schema = SchemaConfig::for_dataset(&ds);
                std::fs::write(p, serde_json::to_string_pretty(&schema).expect("serialises") + "\n").map_err(|e| io_error(p, e))?;
            }
            Ok(())
        }
        Command::Mc(a) => {
            let seed = seed.ok_or_else(|| Failure::Usage("--seed is required for mc".into()))?;
            let spec = a.design.spec(Some(seed), true)?;
            let plan = a.bootstrap.map(|b| BootstrapPlan { replicates: b, seed, resample: ResampleLevel::Unit, ci_level: a.ci_level });
            let r = run_mc(&spec, a.reps, seed, a.estimator, plan)?;
            emit(&a.out, &envelope("mc", None, Some(seed), &r), None, stdout)
        }
        Command::Validate(a) => {
            let ds = load(&a.data)?;
            let r = run_validate(&ds, a.overlap_epsilon)?;
            emit(&a.out, &envelope("validate", Some(&a.data.input), seed, &r), None, stdout)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns 0 on success, 2 on usage errors and 1 on data or
/// identification errors.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.name());
            1
        }
    }
}
