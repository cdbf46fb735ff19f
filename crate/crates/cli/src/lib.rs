//! Command-line front end for `patree`.
//!
//! Every command writes its primary output to standard output, or to `--out`
//! when given. Commands that produce a table (`verify-*`, `--dump-series`,
//! `--dump-tree`) write CSV there and a one-line JSON summary to standard
//! error. JSON documents carry `"schema": "1"`.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 solver or series
//! failure, 3 a monotonicity violation.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use patree::grd::{self, PathOptions, PathReport, Verdict};
use patree::simulate::{self, DEFAULT_SEED};
use patree::{
    affine_closed_form, depth_constant, exact_expected_depth, height_speed, interpolate, laplace_m, monte_carlo,
    product_weights, AttachmentFunction, Error, TruncationConfig,
};

pub const SCHEMA: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "patree",
    version,
    about = "Depth and height constants of preferential attachment trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Depth constant c_f, and with --height the height constant c*_f.
    Constants {
        #[arg(long = "fn", value_name = "SPEC")]
        f: AttachmentFunction,
        #[arg(long)]
        height: bool,
        /// CSV of n, A_n, r_n at λ_f instead of the JSON document.
        #[arg(long)]
        dump_series: bool,
        #[command(flatten)]
        series: SeriesArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Closed-form constants for f(k) = k + δ.
    Affine {
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// The geometric interpolation g (f/g)^θ and its first values.
    Interpolate {
        #[arg(long, value_name = "SPEC")]
        g: AttachmentFunction,
        #[arg(long, value_name = "SPEC")]
        f: AttachmentFunction,
        #[arg(long)]
        theta: f64,
        /// Largest k to tabulate.
        #[arg(long, default_value_t = 20)]
        k_max: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monotonicity of the depth constant along the path from g to f.
    VerifyDepth(VerifyArgs),
    /// Monotonicity of the height constant along the path from g to f.
    VerifyHeight(VerifyArgs),
    /// Monte Carlo estimates of D_n/log n and H_n/log n.
    Simulate {
        #[arg(long = "fn", value_name = "SPEC")]
        f: AttachmentFunction,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Grow one tree with --seed and write its edges as CSV.
        #[arg(long)]
        dump_tree: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact E[D_n] by enumerating attachment histories.
    Oracle {
        #[arg(long = "fn", value_name = "SPEC")]
        f: AttachmentFunction,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_name = "SPEC")]
    g: AttachmentFunction,
    #[arg(long, value_name = "SPEC")]
    f: AttachmentFunction,
    #[arg(long, default_value_t = grd::DEFAULT_GRID_POINTS, value_parser = grid_points)]
    grid: usize,
    /// Skip midpoint refinement around near-violations.
    #[arg(long)]
    no_refine: bool,
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn grid_points(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("expected an integer ≥ 2, got {s:?}")),
    }
}

#[derive(Debug, Args)]
struct SeriesArgs {
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_terms: Option<usize>,
}

impl SeriesArgs {
    /// Tolerances out of range are usage errors.
    fn config(&self) -> Result<TruncationConfig, Failure> {
        let mut cfg = TruncationConfig::default();
        if let Some(t) = self.rel_tol {
            cfg.rel_tol = t;
        }
        if let Some(m) = self.max_terms {
            cfg.max_terms = m;
        }
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl OutputArgs {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

/// Failures after argument parsing.
#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
    Usage(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Lib(Error::Parse(_)) | Failure::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Lib(e) => e.kind(),
            Failure::Io(_) => "IoError",
            Failure::Csv(_) => "CsvError",
            Failure::Json(_) => "JsonError",
            Failure::Usage(_) => "UsageError",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Io(e) => e.to_string(),
            Failure::Csv(e) => e.to_string(),
            Failure::Json(e) => e.to_string(),
            Failure::Usage(m) => m.clone(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Csv(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Json(e)
    }
}

fn error_record(kind: &str, message: &str) -> String {
    json!({ "schema": SCHEMA, "error": kind, "message": message }).to_string()
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    let first = text.lines().next().unwrap_or("usage error");
                    let _ = writeln!(stderr, "{}", error_record("UsageError", first));
                    EXIT_USAGE
                }
            };
        }
    };

    let result = thread_pool().and_then(|pool| execute(cli.command, &Workers(pool), stdout, stderr));
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "{}", error_record(f.kind(), &f.message()));
            f.code()
        }
    }
}

/// Runs parallel work on the `PA_THREADS` pool when one is configured.
struct Workers(Option<rayon::ThreadPool>);

impl Workers {
    fn install<R: Send>(&self, op: impl FnOnce() -> R + Send) -> R {
        match &self.0 {
            Some(pool) => pool.install(op),
            None => op(),
        }
    }
}

/// A dedicated pool when `PA_THREADS` is set.
fn thread_pool() -> Result<Option<rayon::ThreadPool>, Failure> {
    let Ok(raw) = std::env::var("PA_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("PA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Failure::Usage(e.to_string()))
}

/// Where the primary output goes.
fn sink<'a>(out: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout),
    })
}

fn with_schema<T: Serialize>(command: &str, body: &T) -> Result<Value, Failure> {
    let mut v = serde_json::to_value(body)?;
    let map = v.as_object_mut().expect("command documents are objects");
    map.insert("command".into(), Value::from(command));
    map.insert("schema".into(), Value::from(SCHEMA));
    Ok(v)
}

fn write_json(w: &mut dyn Write, v: &Value) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// A single-record CSV document with the given header.
fn write_row(w: &mut dyn Write, header: &[&str], row: &[String]) -> Result<(), Failure> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(header)?;
    c.write_record(row)?;
    c.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn execute(
    command: Command,
    workers: &Workers,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    match command {
        Command::Constants {
            f,
            height,
            dump_series,
            series,
            output,
        } => constants(&f, height, dump_series, &series.config()?, &output, stdout, stderr),
        Command::Affine { delta, output } => affine(delta, &output, stdout),
        Command::Interpolate {
            g,
            f,
            theta,
            k_max,
            output,
        } => interpolate_cmd(&g, &f, theta, k_max, &output, stdout),
        Command::VerifyDepth(a) => verify(grd::PathKind::Depth, &a, workers, stdout, stderr),
        Command::VerifyHeight(a) => verify(grd::PathKind::Height, &a, workers, stdout, stderr),
        Command::Simulate {
            f,
            n,
            reps,
            seed,
            dump_tree,
            output,
        } => simulate_cmd(&f, n, reps, seed, dump_tree, &output, workers, stdout, stderr),
        Command::Oracle { f, n, output } => oracle(&f, n, &output, stdout),
    }
}

#[derive(Serialize)]
struct ConstantsDoc {
    #[serde(rename = "fn")]
    f: String,
    depth: patree::DepthSolution,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<patree::HeightSolution>,
}

fn constants(
    f: &AttachmentFunction,
    height: bool,
    dump_series: bool,
    cfg: &TruncationConfig,
    output: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let depth = depth_constant(f, cfg)?;
    let height = if height { Some(height_speed(f, cfg)?) } else { None };
    let doc = ConstantsDoc {
        f: f.to_string(),
        depth,
        height,
    };
    let mut w = sink(&output.out, stdout)?;

    if dump_series {
        let lambda = doc.depth.lambda_f;
        let n = laplace_m(f, lambda, cfg)?.n_used;
        let table = product_weights(f, lambda, n)?;
        let r = table.tails(n);
        let mut c = csv::Writer::from_writer(&mut w);
        c.write_record(["n", "A_n", "r_n"])?;
        for (i, r_i) in r.iter().enumerate() {
            c.write_record([i.to_string(), table.a(i).to_string(), r_i.to_string()])?;
        }
        c.flush()?;
        drop(c);
        w.flush()?;
        writeln!(stderr, "{}", with_schema("constants", &doc)?)?;
        return Ok(EXIT_OK);
    }

    match output.format_or(Format::Json) {
        Format::Json => write_json(&mut w, &with_schema("constants", &doc)?)?,
        Format::Csv => {
            let h = doc.height.as_ref();
            write_row(
                &mut w,
                &["fn", "lambda_f", "q_f", "c_f", "lambda_star", "kappa", "c_star"],
                &[
                    doc.f.clone(),
                    doc.depth.lambda_f.to_string(),
                    doc.depth.q_f.to_string(),
                    doc.depth.c_f.to_string(),
                    opt(h.map(|h| h.lambda_star)),
                    opt(h.map(|h| h.kappa)),
                    opt(h.map(|h| h.c_star)),
                ],
            )?
        }
    }
    Ok(EXIT_OK)
}

fn affine(delta: f64, output: &OutputArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let (depth, height) = affine_closed_form(delta)?;
    let mut w = sink(&output.out, stdout)?;
    match output.format_or(Format::Json) {
        Format::Json => write_json(
            &mut w,
            &with_schema("affine", &json!({ "delta": delta, "depth": depth, "height": height }))?,
        )?,
        Format::Csv => write_row(
            &mut w,
            &["delta", "lambda_f", "q_f", "c_f", "lambda_star", "kappa", "c_star"],
            &[
                delta.to_string(),
                depth.lambda_f.to_string(),
                depth.q_f.to_string(),
                depth.c_f.to_string(),
                height.lambda_star.to_string(),
                height.kappa.to_string(),
                height.c_star.to_string(),
            ],
        )?,
    }
    Ok(EXIT_OK)
}

fn interpolate_cmd(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    theta: f64,
    k_max: u64,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, Failure> {
    let h = interpolate(g, f, theta)?;
    let rows = (0..=k_max)
        .map(|k| Ok((k, g.eval(k)?, f.eval(k)?, h.eval(k)?)))
        .collect::<patree::Result<Vec<_>>>()?;
    let mut w = sink(&output.out, stdout)?;
    match output.format_or(Format::Json) {
        Format::Json => {
            let doc = json!({
                "g": g.to_string(),
                "f": f.to_string(),
                "theta": theta,
                "spec": h.to_string(),
                "rv_index": h.rv_index(),
                "values": rows.iter().map(|r| r.3).collect::<Vec<_>>(),
            });
            write_json(&mut w, &with_schema("interpolate", &doc)?)?
        }
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            c.write_record(["k", "g", "f", "f_theta"])?;
            for (k, a, b, v) in rows {
                c.write_record([k.to_string(), a.to_string(), b.to_string(), v.to_string()])?;
            }
            c.flush()?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    kind: grd::PathKind,
    g: String,
    f: String,
    points: usize,
    failed_points: usize,
    #[serde(flatten)]
    verdict: Verdict,
    grd: &'a patree::GrdVerdict,
    min_derivative: Option<f64>,
    warnings: &'a [String],
}

fn verify(
    kind: grd::PathKind,
    a: &VerifyArgs,
    workers: &Workers,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let cfg = a.series.config()?;
    let opts = PathOptions {
        refine: !a.no_refine,
        ..PathOptions::default()
    };
    let grid = grd::uniform_grid(a.grid);
    let report: PathReport = workers.install(|| match kind {
        grd::PathKind::Depth => grd::depth_path(&a.g, &a.f, &grid, &opts, &cfg),
        grd::PathKind::Height => grd::height_path(&a.g, &a.f, &grid, &opts, &cfg),
    })?;
    let command = match kind {
        grd::PathKind::Depth => "verify-depth",
        grd::PathKind::Height => "verify-height",
    };
    let summary = VerifySummary {
        kind,
        g: a.g.to_string(),
        f: a.f.to_string(),
        points: report.points.len(),
        failed_points: report.failed_points(),
        verdict: report.verdict,
        grd: &report.grd,
        min_derivative: report.min_derivative(),
        warnings: &report.warnings,
    };

    let mut w = sink(&a.output.out, stdout)?;
    match a.output.format_or(Format::Csv) {
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            for p in &report.points {
                c.serialize(p)?;
            }
            c.flush()?;
            drop(c);
            w.flush()?;
            writeln!(stderr, "{}", with_schema(command, &summary)?)?;
        }
        Format::Json => {
            let mut doc = with_schema(command, &summary)?;
            doc["report"] = serde_json::to_value(&report)?;
            write_json(&mut w, &doc)?;
        }
    }

    Ok(match report.verdict {
        Verdict::ViolationAt { .. } => EXIT_VIOLATION,
        Verdict::Monotone if report.failed_points() > 0 => EXIT_FAILURE,
        Verdict::Monotone => EXIT_OK,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    f: &AttachmentFunction,
    n: usize,
    reps: usize,
    seed: u64,
    dump_tree: bool,
    output: &OutputArgs,
    workers: &Workers,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut w = sink(&output.out, stdout)?;
    if dump_tree {
        let tree = simulate::grow(f, n, seed)?;
        let mut c = csv::Writer::from_writer(&mut w);
        c.write_record(["child", "parent", "depth"])?;
        for (child, parent, depth) in tree.edges() {
            c.write_record([child.to_string(), parent.to_string(), depth.to_string()])?;
        }
        c.flush()?;
        drop(c);
        w.flush()?;
        let doc = json!({
            "fn": f.to_string(),
            "n": n,
            "seed": seed,
            "insertion_depth": tree.insertion_depth(),
            "height": tree.height(),
        });
        writeln!(stderr, "{}", with_schema("simulate", &doc)?)?;
        return Ok(EXIT_OK);
    }

    let s = workers.install(|| monte_carlo(f, n, reps, seed))?;
    match output.format_or(Format::Json) {
        Format::Json => {
            let mut doc = with_schema("simulate", &s)?;
            doc["fn"] = Value::from(f.to_string());
            write_json(&mut w, &doc)?
        }
        Format::Csv => write_row(
            &mut w,
            &[
                "fn",
                "n",
                "reps",
                "seed_base",
                "mean_d_over_logn",
                "stderr_d",
                "mean_h_over_logn",
                "stderr_h",
            ],
            &[
                f.to_string(),
                s.n.to_string(),
                s.reps.to_string(),
                s.seed_base.to_string(),
                s.mean_d_over_logn.to_string(),
                s.stderr_d.to_string(),
                s.mean_h_over_logn.to_string(),
                s.stderr_h.to_string(),
            ],
        )?,
    }
    Ok(EXIT_OK)
}

fn oracle(f: &AttachmentFunction, n: usize, output: &OutputArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let e = exact_expected_depth(f, n)?;
    let mut w = sink(&output.out, stdout)?;
    match output.format_or(Format::Json) {
        Format::Json => write_json(
            &mut w,
            &with_schema("oracle", &json!({ "fn": f.to_string(), "n": n, "expected_depth": e }))?,
        )?,
        Format::Csv => write_row(
            &mut w,
            &["fn", "n", "expected_depth"],
            &[f.to_string(), n.to_string(), e.to_string()],
        )?,
    }
    Ok(EXIT_OK)
}
