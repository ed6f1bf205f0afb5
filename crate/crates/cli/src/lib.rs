//! `povgap` command line: index tables, decomposition reports, simulation
//! experiments and rank-weight diagnostics.
//!
//! [`run`] does everything except touching the process: it returns the exit
//! code and the text destined for stdout and stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use povgap::asymptotics::hd_diagnostic;
use povgap::decomposition::{decompose_with, ComponentWeights, DecomposeOptions, GapReport};
use povgap::indices::{compute_gpi, MEASURE_GRAMMAR};
use povgap::montecarlo::{ExperimentConfig, SimResult};
use povgap::survey_data::{load_survey, SurveySource};
use povgap::{Error, GroupedSample, Measure, MeasureSpec};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "povgap", version, about = "Poverty indices and the gap of decomposability across strata")]
struct Cli {
    /// Append a generation timestamp to the output.
    #[arg(long, global = true)]
    timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-stratum and pooled index values.
    Index(DataArgs),
    /// Gap of decomposability with variance components and intervals.
    Decompose {
        #[command(flatten)]
        data: DataArgs,
        /// Confidence level of the intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Share weights of the cross-stratum variance terms.
        #[arg(long, value_enum, default_value_t = WeightsArg::Derived)]
        weights: WeightsArg,
    },
    /// Run a Monte Carlo experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        output: OutputFormat,
    },
    /// Deviations of the finite-sample rank weights from their limits.
    Diagnose {
        #[arg(long)]
        measure: String,
        /// Sample sizes to sweep.
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        n: Vec<usize>,
        /// Headcount ratio Q/n held fixed across the sweep.
        #[arg(long, default_value_t = 0.4)]
        ratio: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        output: OutputFormat,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Survey CSV with columns income, eq_adults, group.
    #[arg(long, required_unless_present = "legacy", conflicts_with = "legacy")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Csv)]
    format: InputFormat,
    /// Legacy triple: income file, equivalent-adult file, label file.
    #[arg(long, num_args = 3, value_names = ["INCOME", "EQ_ADULTS", "LABELS"])]
    legacy: Option<Vec<PathBuf>>,
    #[arg(long = "poverty-line", short = 'z', allow_negative_numbers = true)]
    poverty_line: f64,
    #[arg(long, default_value = "sen")]
    measure: String,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    output: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Csv,
    Legacy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightsArg {
    Derived,
    Printed,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn fail(code: i32, message: impl std::fmt::Display) -> Self {
        let one_line = message.to_string().replace('\n', " ");
        Self {
            code,
            stdout: String::new(),
            stderr: format!("error: {one_line}\n"),
        }
    }
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EXIT_DATA, e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome::ok(e.to_string()),
                _ => {
                    // keep clap's first paragraph, folded onto one line
                    let text = e.to_string();
                    let head: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
                    Outcome::fail(EXIT_USAGE, head.join(" ").trim_start_matches("error: "))
                }
            };
        }
    };
    match dispatch(&cli) {
        Ok(mut out) => {
            if cli.timestamp {
                let secs = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                let _ = writeln!(out, "generated: {secs}");
            }
            Outcome::ok(out)
        }
        Err(Failure(code, msg)) => Outcome::fail(code, msg),
    }
}

fn parse_measure(s: &str) -> Result<Measure, Failure> {
    s.parse::<Measure>().map_err(|e| {
        let msg = e.to_string();
        if msg.contains(MEASURE_GRAMMAR) {
            usage(msg)
        } else {
            usage(format!("{msg}; {MEASURE_GRAMMAR}"))
        }
    })
}

fn check_line(z: f64) -> Result<(), Failure> {
    if z.is_finite() && z > 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--poverty-line must be positive, got {z}")))
    }
}

fn load(data: &DataArgs) -> Result<GroupedSample, Failure> {
    let sample = match (&data.legacy, &data.input, data.format) {
        (Some(paths), _, _) => load_survey(SurveySource::Legacy {
            income: &paths[0],
            eq_adults: &paths[1],
            labels: &paths[2],
        })?,
        (None, Some(_), InputFormat::Legacy) => {
            return Err(usage("--format legacy takes its three files through --legacy"))
        }
        (None, Some(path), InputFormat::Csv) => load_survey(SurveySource::Csv(path))?,
        (None, None, _) => return Err(usage("one of --input or --legacy is required")),
    };
    Ok(sample)
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Index(data) => {
            let measure = parse_measure(&data.measure)?;
            check_line(data.poverty_line)?;
            let sample = load(data)?;
            index_command(&sample, data.poverty_line, measure, data.output)
        }
        Command::Decompose { data, level, weights } => {
            let measure = parse_measure(&data.measure)?;
            check_line(data.poverty_line)?;
            if !(*level > 0.0 && *level < 1.0) {
                return Err(usage(format!("--level must lie in (0, 1), got {level}")));
            }
            let sample = load(data)?;
            let options = DecomposeOptions {
                level: *level,
                weights: match weights {
                    WeightsArg::Derived => ComponentWeights::Derived,
                    WeightsArg::Printed => ComponentWeights::Printed,
                },
            };
            let report = decompose_with(&sample, data.poverty_line, measure, &options)?;
            Ok(render_report(&report, data.output))
        }
        Command::Simulate { config, seed, reps, n, output } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| Failure(EXIT_DATA, format!("cannot read {}: {e}", config.display())))?;
            let mut cfg: ExperimentConfig = text.parse()?;
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            if let Some(r) = reps {
                cfg.reps = *r;
            }
            if let Some(n) = n {
                cfg.n = *n;
            }
            let result = cfg.run()?;
            Ok(render_simulation(&cfg, &result, *output))
        }
        Command::Diagnose { measure, n, ratio, output } => {
            let measure = parse_measure(measure)?;
            if !(*ratio > 0.0 && *ratio <= 1.0) {
                return Err(usage(format!("--ratio must lie in (0, 1], got {ratio}")));
            }
            let spec = MeasureSpec::new(measure).map_err(|e| usage(e.to_string()))?;
            diagnose_command(&spec, n, *ratio, *output)
        }
    }
}

/// Left-aligned columns separated by two spaces; trailing spaces trimmed.
fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{cell:<w$}", w = widths[c]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn percent(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn sci(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.6e}")
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct IndexRow {
    area: String,
    index: f64,
    size: usize,
    poor: usize,
}

#[derive(Serialize)]
struct IndexTable {
    measure: Measure,
    #[serde(rename = "Z")]
    z: f64,
    rows: Vec<IndexRow>,
}

fn index_command(sample: &GroupedSample, z: f64, measure: Measure, output: OutputFormat) -> Result<String, Failure> {
    let spec = MeasureSpec::new(measure)?;
    let mut rows = Vec::new();
    for (i, dist) in sample.group_distributions().iter().enumerate() {
        let v = compute_gpi(dist, z, &spec)?;
        rows.push(IndexRow {
            area: sample.labels()[i].to_string(),
            index: v.value,
            size: v.n,
            poor: v.poor,
        });
    }
    let g = compute_gpi(&sample.pooled_distribution(), z, &spec)?;
    rows.push(IndexRow { area: "global".into(), index: g.value, size: g.n, poor: g.poor });
    let table = IndexTable { measure, z, rows };
    Ok(match output {
        OutputFormat::Json => json(&table),
        OutputFormat::Table => {
            let mut cells = vec![vec!["area".to_string(), "index".into(), "size".into(), "poor".into()]];
            cells.extend(table.rows.iter().map(|r| {
                vec![r.area.clone(), percent(r.index), r.size.to_string(), r.poor.to_string()]
            }));
            format!("measure: {measure}  poverty line: {z}\n{}", aligned(&cells))
        }
    })
}

/// Renders a decomposition report as an aligned table (indices in percent,
/// gap and interval bounds in scientific notation) or as JSON.
pub fn render_report(report: &GapReport, format: OutputFormat) -> String {
    if format == OutputFormat::Json {
        return json(report);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "measure: {}  poverty line: {}  n: {}  level: {}",
        report.measure, report.z, report.n, report.level
    );
    out.push('\n');
    let mut cells = vec![vec!["area".to_string(), "index".into(), "size".into(), "poor".into()]];
    for g in &report.group_indices {
        cells.push(vec![g.label.to_string(), percent(g.value), g.n.to_string(), g.poor.to_string()]);
    }
    cells.push(vec![
        "global".into(),
        percent(report.global_index),
        report.n.to_string(),
        report.global_poor.to_string(),
    ]);
    out.push_str(&aligned(&cells));
    out.push('\n');
    let c = &report.components;
    let interval = |i: &povgap::decomposition::Interval| format!("[{}, {}]", sci(i.lower), sci(i.upper));
    let rows: Vec<Vec<String>> = vec![
        vec!["gd_n".into(), sci(report.gd_n)],
        vec!["theta1^2".into(), sci(c.theta1_sq)],
        vec!["theta2^2".into(), sci(c.theta2_sq)],
        vec!["theta3^2".into(), sci(c.theta3_sq)],
        vec!["ci gd".into(), interval(&report.ci_gd)],
        vec!["ci gd0".into(), interval(&report.ci_gd0)],
        vec!["A1".into(), sci(c.a1)],
        vec!["A2".into(), sci(c.a2)],
        vec!["A31".into(), sci(c.a31)],
        vec!["A32".into(), sci(c.a32)],
        vec!["B1".into(), sci(c.b1)],
        vec!["B2".into(), sci(c.b2)],
        vec!["B3".into(), sci(c.b3)],
    ];
    out.push_str(&aligned(&rows));
    for w in &report.warnings {
        let tag = if report.decomposable && w.contains("decomposable measure") { "note" } else { "warning" };
        let _ = writeln!(out, "{tag}: {w}");
    }
    out
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    result: &'a SimResult,
}

fn render_simulation(cfg: &ExperimentConfig, r: &SimResult, output: OutputFormat) -> String {
    if output == OutputFormat::Json {
        return json(&SimulationOutput { config: cfg, result: r });
    }
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into());
    let rows = vec![
        vec!["measure".to_string(), cfg.measure.to_string()],
        vec!["n".into(), r.n.to_string()],
        vec!["reps".into(), r.reps.to_string()],
        vec!["seed".into(), cfg.seed.to_string()],
        vec!["true gd".into(), sci(r.true_gd)],
        vec!["mean gd_n".into(), sci(r.mean_gd_n)],
        vec!["coverage".into(), format!("{:.4}", r.coverage)],
        vec!["empirical var".into(), sci(r.empirical_var)],
        vec!["mean plug-in theta^2".into(), sci(r.mean_plugin_theta_sq)],
        vec!["ks statistic".into(), opt(r.ks_stat)],
        vec!["ks p-value".into(), r.ks_pvalue.map(sci).unwrap_or_else(|| "n/a".into())],
    ];
    aligned(&rows)
}

#[derive(Serialize)]
struct DiagnoseRow {
    n: usize,
    q: usize,
    dev1: f64,
    dev2: f64,
    scaled_dev1: f64,
    scaled_dev2: f64,
}

fn diagnose_command(spec: &MeasureSpec, ns: &[usize], ratio: f64, output: OutputFormat) -> Result<String, Failure> {
    let mut rows = Vec::new();
    for &n in ns {
        if n == 0 {
            return Err(usage("sample sizes must be positive"));
        }
        let q = ((ratio * n as f64).round() as usize).clamp(1, n);
        let (dev1, dev2) = hd_diagnostic(spec, n, q);
        let nf = n as f64;
        rows.push(DiagnoseRow { n, q, dev1, dev2, scaled_dev1: nf.sqrt() * dev1, scaled_dev2: nf.powf(1.5) * dev2 });
    }
    Ok(match output {
        OutputFormat::Json => json(&rows),
        OutputFormat::Table => {
            let mut cells = vec![vec![
                "n".to_string(),
                "Q".into(),
                "dev1".into(),
                "dev2".into(),
                "sqrt(n)*dev1".into(),
                "n^1.5*dev2".into(),
            ]];
            cells.extend(rows.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    r.q.to_string(),
                    sci(r.dev1),
                    sci(r.dev2),
                    sci(r.scaled_dev1),
                    sci(r.scaled_dev2),
                ]
            }));
            format!("measure: {}\n{}", spec.measure(), aligned(&cells))
        }
    })
}
