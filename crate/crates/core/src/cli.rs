//! Command-line front end: argument parsing, config files, worker pool and
//! dispatch to the library operations.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::anisofilter::{filter, AlgorithmKind, FilterAlgorithm};
use crate::decomp::AnisoKernelSpec;
use crate::error::Error;
use crate::image::{BinaryMask, Image2D};
use crate::interp::InterpScheme;
use crate::io::{read_image, write_image, write_mask};
use crate::orientation::{
    angle_histogram, colorize, hessian_estimate, mr_estimate, structure_tensor_estimate, MRParams,
    OrientationField, TensorParams,
};
use crate::segment::{segment_pipeline, NiblackParams, SegmentParams};
use crate::synthbench::{
    accuracy_algorithms, kernel_accuracy_experiment, run_contrast_experiment, throughput_benchmark,
    write_kernel_curves_csv, write_kernel_table_csv, write_throughput_csv, ContrastConfig, Method,
    ThroughputConfig, ACCURACY_SPECS, DEFAULT_SIZE, MR_SIGMA1,
};

/// Environment variable overriding the default worker count.
pub const WORKERS_ENV: &str = "ANISOFLOW_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_data_error() => EXIT_DATA,
            CliError::Lib(Error::InvalidSize(_) | Error::EmptyMask | Error::LineTooShort(_)) => {
                EXIT_DATA
            }
            CliError::Lib(_) => EXIT_USAGE,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "anisoflow",
    version,
    about = "Anisotropic Gaussian filtering and fiber orientation analysis"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Flat `key = value` file supplying option defaults; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (default: ANISOFLOW_WORKERS, else available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the command tree with all options as JSON and exit.
    #[arg(long, global = true)]
    help_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter an image with an anisotropic Gaussian.
    Filter(FilterArgs),
    /// Estimate local fiber orientation.
    Estimate(EstimateArgs),
    /// Segment fibers from the maximal response.
    Segment(SegmentArgs),
    /// Benchmarks on synthetic data.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Render an angle map (and optional response) as a color image.
    Colorize(ColorizeArgs),
    /// Run one of the reference experiments end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// l² error of reconstructed impulse responses over θ.
    KernelAccuracy(KernelAccuracyArgs),
    /// Filtering time versus image size.
    Throughput(ThroughputArgs),
    /// Orientation error on synthetic fiber images.
    Synthetic(SyntheticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Naive,
    Geometric,
    Linebuffer,
    Hybrid,
    Oracle,
}

impl AlgoArg {
    fn kind(self) -> AlgorithmKind {
        match self {
            AlgoArg::Naive => AlgorithmKind::NaiveRotation,
            AlgoArg::Geometric => AlgorithmKind::Geometric,
            AlgoArg::Linebuffer => AlgorithmKind::LineBuffer,
            AlgoArg::Hybrid => AlgorithmKind::Hybrid,
            AlgoArg::Oracle => AlgorithmKind::DenseOracle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InterpArg {
    Linear,
    Cubic,
    Keys,
}

impl InterpArg {
    fn scheme(self) -> InterpScheme {
        match self {
            InterpArg::Linear => InterpScheme::Linear,
            InterpArg::Cubic => InterpScheme::Cubic,
            InterpArg::Keys => InterpScheme::CubicConvolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mr,
    Tensor,
    Hessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Section {
    Table2,
    Fig2a,
    Fig3b,
    Fig4,
    Fig6,
}

/// Filter used by the estimators: hybrid with cubic interpolation and the
/// major-axis modification.
#[derive(Debug, Args)]
struct MrAlgoArgs {
    #[arg(long, value_enum, default_value = "hybrid")]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "cubic")]
    interp: InterpArg,
    #[arg(long = "mod", value_enum, default_value = "on")]
    modification: OnOff,
}

impl MrAlgoArgs {
    fn algorithm(&self) -> FilterAlgorithm {
        FilterAlgorithm::new(
            self.algo.kind(),
            self.interp.scheme(),
            self.modification.on(),
        )
    }
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    sigma1: f64,
    #[arg(long)]
    sigma2: f64,
    /// Major-axis angle in degrees.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, value_enum, default_value = "hybrid")]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "linear")]
    interp: InterpArg,
    #[arg(long = "mod", value_enum, default_value = "off")]
    modification: OnOff,
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// `.pgm` writes 16-bit PGM, anything else the float-raw format.
    #[arg(long = "out", value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long, value_enum, default_value = "mr")]
    method: MethodArg,
    #[arg(long, default_value_t = MR_SIGMA1)]
    sigma1: f64,
    /// Minor half-axis; defaults to half the fiber radius.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Fiber radius in pixels.
    #[arg(long)]
    radius: Option<f64>,
    /// Structure-tensor integration scale.
    #[arg(long, default_value_t = TensorParams::DEFAULT_RHO)]
    rho: f64,
    #[command(flatten)]
    algo: MrAlgoArgs,
    #[arg(long, default_value_t = 1.0)]
    angles_step: f64,
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_angle: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_response: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out_color: Option<PathBuf>,
    /// CSV of valid-pixel angle counts (bin_start, count).
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    histogram_bin: f64,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long, default_value_t = MR_SIGMA1)]
    sigma1: f64,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[command(flatten)]
    algo: MrAlgoArgs,
    #[arg(long, default_value_t = 1.0)]
    angles_step: f64,
    #[arg(long, default_value_t = NiblackParams::DEFAULT_K)]
    niblack_k: f64,
    /// Threshold the min-max normalized response instead of Niblack.
    #[arg(long)]
    global_threshold: Option<f64>,
    #[arg(long, default_value_t = 100)]
    min_size: usize,
    #[arg(long, default_value_t = 2)]
    erode: usize,
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_mask: PathBuf,
}

#[derive(Debug, Args)]
struct KernelAccuracyArgs {
    /// The 13 reference (σ1, σ2) rows × the 5 reference algorithms.
    #[arg(long)]
    table2: bool,
    /// Comma-separated `sigma1:sigma2` pairs (default: the reference rows).
    #[arg(long)]
    specs: Option<String>,
    /// Comma-separated algorithm labels such as `hybrid-mod-cubic`.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    theta_step: f64,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    size: usize,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Per-angle error curves.
    #[arg(long, value_name = "FILE")]
    curves_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ThroughputArgs {
    /// `start:stop:step` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "100:4990:30")]
    sizes: String,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0.1)]
    trim: f64,
    #[arg(long, default_value = "linebuffer-linear,hybrid-linear,hybrid-cubic")]
    algos: String,
    #[arg(long, default_value_t = 30.0)]
    theta: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma1: f64,
    #[arg(long, default_value_t = 2.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    /// Number of noise images, or a comma-separated list of seeds.
    #[arg(long, default_value = "10")]
    seeds: String,
    #[arg(long, default_value = "0.1,0.15,0.2,0.25,0.3,0.4,0.5,0.75,1")]
    contrasts: String,
    /// Comma-separated fiber widths.
    #[arg(long, default_value = "1,2")]
    w: String,
    #[arg(long, default_value_t = 5.0)]
    theta_step: f64,
    /// MR angle step (default: the fiber-direction step).
    #[arg(long)]
    mr_angle_step: Option<f64>,
    /// Comma-separated `mr:<algo>`, `mr`, `tensor`, `hessian`.
    #[arg(
        long,
        default_value = "mr:linebuffer-linear,mr:hybrid-linear,mr:hybrid-cubic,mr:hybrid-mod-linear,mr:hybrid-mod-cubic,tensor,hessian"
    )]
    methods: String,
    #[arg(long, value_enum, default_value = "off")]
    median: OnOff,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    size: usize,
    /// Fiber images with the unscaled sinusoid (only the amplitude
    /// depends on the width).
    #[arg(long)]
    unscaled_fibers: bool,
    /// Summary CSV (mean and std per method, width and contrast).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Per-seed CSV.
    #[arg(long, value_name = "FILE")]
    rows_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ColorizeArgs {
    /// Angle map in degrees.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Response image for the brightness channel (default: uniform).
    #[arg(long, value_name = "FILE")]
    response: Option<PathBuf>,
    /// Binary PPM output.
    #[arg(long = "out", value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    section: Section,
    /// 10 seeds, 5° steps and a reduced size list.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long, default_value = ".", value_name = "DIR")]
    out_dir: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if argv.iter().skip(1).any(|a| a == "--help-json") {
        println!("{}", help_json());
        return EXIT_OK;
    }
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let workers = match cli.command {
        Command::Bench(BenchCommand::Throughput(_))
        | Command::Reproduce(ReproduceArgs {
            section: Section::Fig3b,
            ..
        }) => 1,
        _ => worker_count(cli.workers)?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| usage(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::Filter(a) => cmd_filter(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Bench(BenchCommand::KernelAccuracy(a)) => cmd_kernel_accuracy(a),
        Command::Bench(BenchCommand::Throughput(a)) => cmd_throughput(a),
        Command::Bench(BenchCommand::Synthetic(a)) => cmd_synthetic(a),
        Command::Colorize(a) => cmd_colorize(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    })
}

fn worker_count(flag: Option<usize>) -> CliResult<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                usage(format!(
                    "{WORKERS_ENV} must be a positive integer, got {v:?}"
                ))
            })?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(usage("worker count must be positive"));
    }
    Ok(n)
}

const TOP_COMMANDS: [&str; 6] = [
    "filter",
    "estimate",
    "segment",
    "bench",
    "colorize",
    "reproduce",
];
const BENCH_COMMANDS: [&str; 3] = ["kernel-accuracy", "throughput", "synthetic"];

fn config_path(argv: &[OsString]) -> CliResult<Option<PathBuf>> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return match it.next() {
                Some(p) => Ok(Some(PathBuf::from(p))),
                None => Err(usage("--config needs a file")),
            };
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

/// Splices the config file's options in right after the subcommand so
/// that explicit flags, which come later, take precedence.
fn apply_config(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut path_names = Vec::new();
    let mut insert_at = None;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        let expected: &[&str] = match path_names.as_slice() {
            [] => &TOP_COMMANDS,
            ["bench"] => &BENCH_COMMANDS,
            _ => break,
        };
        if expected.contains(&s.as_ref()) {
            path_names.push(expected[expected.iter().position(|e| *e == s).unwrap()]);
            insert_at = Some(i + 1);
            if path_names[0] != "bench" {
                break;
            }
        }
    }
    let Some(insert_at) = insert_at else {
        return Ok(argv);
    };
    let mut cmd = Cli::command();
    cmd.build();
    let mut sub = &cmd;
    for name in &path_names {
        sub = sub
            .find_subcommand(name)
            .ok_or_else(|| usage(format!("unknown subcommand {name}")))?;
    }
    let mut extra = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!(
                "{}:{}: expected key = value",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(usage("config files cannot include other config files"));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                usage(format!(
                    "{}:{}: unknown option {key:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
        if arg.get_action().takes_values() {
            extra.push(OsString::from(format!("--{key}={value}")));
        } else {
            match value {
                "true" | "on" | "yes" | "1" => extra.push(OsString::from(format!("--{key}"))),
                "false" | "off" | "no" | "0" => {}
                v => {
                    return Err(usage(format!(
                        "{}:{}: {key} expects true/false, got {v:?}",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
    }
    let mut out = argv;
    out.splice(insert_at..insert_at, extra);
    Ok(out)
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn command_json(cmd: &clap::Command) -> String {
    let args: Vec<String> = cmd
        .get_arguments()
        .filter(|a| a.get_id() != "help" && a.get_id() != "version")
        .map(|a| {
            let defaults: Vec<String> = a.get_default_values().iter().map(|v| json_string(&v.to_string_lossy())).collect();
            let choices: Vec<String> = a.get_possible_values().iter().map(|v| json_string(v.get_name())).collect();
            format!(
                "{{\"id\":{},\"long\":{},\"help\":{},\"takes_value\":{},\"required\":{},\"default\":[{}],\"choices\":[{}]}}",
                json_string(a.get_id().as_str()),
                a.get_long().map_or("null".to_string(), json_string),
                a.get_help().map_or("null".to_string(), |h| json_string(&h.to_string())),
                a.get_action().takes_values(),
                a.is_required_set(),
                defaults.join(","),
                choices.join(","),
            )
        })
        .collect();
    let subs: Vec<String> = cmd
        .get_subcommands()
        .filter(|s| s.get_name() != "help")
        .map(command_json)
        .collect();
    format!(
        "{{\"name\":{},\"about\":{},\"args\":[{}],\"subcommands\":[{}]}}",
        json_string(cmd.get_name()),
        cmd.get_about()
            .map_or("null".to_string(), |h| json_string(&h.to_string())),
        args.join(","),
        subs.join(",")
    )
}

fn help_json() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    command_json(&cmd)
}

fn create(path: &Path) -> CliResult<Box<dyn Write>> {
    if path == Path::new("-") {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(io::BufWriter::new(fs::File::create(path)?)))
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| usage(format!("bad {what} {p:?}"))))
        .collect()
}

fn parse_sizes(s: &str) -> CliResult<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, c] => {
            let p = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| usage(format!("bad size range {s:?}")))
            };
            let (start, stop, step) = (p(a)?, p(b)?, p(c)?);
            if step == 0 || start > stop {
                return Err(usage(format!("bad size range {s:?}")));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        [_] => parse_list(s, "size"),
        _ => Err(usage(format!(
            "sizes must be start:stop:step or a list, got {s:?}"
        ))),
    }
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    if s.contains(',') {
        return parse_list(s, "seed");
    }
    let n: u64 = s
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad seed count {s:?}")))?;
    Ok((0..n).collect())
}

fn parse_algos(s: &str) -> CliResult<Vec<FilterAlgorithm>> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| FilterAlgorithm::parse_label(p).map_err(|e| usage(e.to_string())))
        .collect()
}

fn minor_axis(sigma2: Option<f64>, radius: Option<f64>) -> CliResult<(f64, f64)> {
    match (sigma2, radius) {
        (Some(s2), Some(r)) => Ok((s2, r)),
        (Some(s2), None) => Ok((s2, 2.0 * s2)),
        (None, Some(r)) => Ok((r / 2.0, r)),
        (None, None) => Err(usage("give --sigma2 or --radius")),
    }
}

fn cmd_filter(a: FilterArgs) -> CliResult<()> {
    let img = read_image(&a.input)?;
    let spec = AnisoKernelSpec::new(a.sigma1, a.sigma2, a.theta)?;
    let algo = FilterAlgorithm::new(a.algo.kind(), a.interp.scheme(), a.modification.on());
    write_image(&filter(&img, &spec, algo)?, &a.output)?;
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> CliResult<()> {
    let img = read_image(&a.input)?;
    let (sigma2, radius) = minor_axis(a.sigma2, a.radius)?;
    let field = match a.method {
        MethodArg::Mr => {
            let mut p = MRParams::new(a.sigma1, sigma2, a.algo.algorithm())
                .with_angles(MRParams::angle_grid(a.angles_step)?);
            p.fiber_radius = a.radius;
            mr_estimate(&img, &p)?
        }
        MethodArg::Tensor => {
            let p = TensorParams {
                sigma: radius,
                rho: a.rho,
            };
            p.validate()?;
            structure_tensor_estimate(&img, &p)?
        }
        MethodArg::Hessian => hessian_estimate(&img, radius)?,
    };
    write_image(&field.angle, &a.out_angle)?;
    if let Some(p) = &a.out_response {
        write_image(&field.response, p)?;
    }
    if let Some(p) = &a.out_color {
        fs::write(p, colorize(&field).to_ppm())?;
    }
    if let Some(p) = &a.histogram {
        let (w, h) = field.dims();
        let counts = angle_histogram(&field, &BinaryMask::full(w, h)?, a.histogram_bin)?;
        let mut wr = csv::Writer::from_writer(create(p)?);
        wr.write_record(["bin_start", "count"])
            .map_err(Error::from)?;
        for (k, c) in counts.iter().enumerate() {
            wr.write_record([(k as f64 * a.histogram_bin).to_string(), c.to_string()])
                .map_err(Error::from)?;
        }
        wr.flush()?;
    }
    Ok(())
}

fn cmd_segment(a: SegmentArgs) -> CliResult<()> {
    let img = read_image(&a.input)?;
    let (sigma2, _) = minor_axis(a.sigma2, a.radius)?;
    let mr = MRParams::new(a.sigma1, sigma2, a.algo.algorithm())
        .with_angles(MRParams::angle_grid(a.angles_step)?);
    let p = SegmentParams {
        niblack: NiblackParams::for_sigma2(sigma2, a.niblack_k)?,
        global_threshold: a.global_threshold,
        erode_side: a.erode,
        min_size: a.min_size,
        connectivity: a.connectivity,
    };
    write_mask(&segment_pipeline(&img, &mr, &p)?, &a.out_mask)?;
    Ok(())
}

fn theta_grid(step: f64) -> CliResult<Vec<f64>> {
    Ok(MRParams::angle_grid(step)?)
}

fn cmd_kernel_accuracy(a: KernelAccuracyArgs) -> CliResult<()> {
    let specs: Vec<(f64, f64)> = match (&a.specs, a.table2) {
        (Some(s), false) => s
            .split(',')
            .map(|p| {
                let (s1, s2) = p
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| usage(format!("bad spec {p:?}")))?;
                let f = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("bad spec {p:?}")))
                };
                Ok((f(s1)?, f(s2)?))
            })
            .collect::<CliResult<_>>()?,
        (Some(_), true) => return Err(usage("--specs and --table2 are exclusive")),
        (None, _) => ACCURACY_SPECS.to_vec(),
    };
    let algos = match (&a.algos, a.table2) {
        (Some(s), false) => parse_algos(s)?,
        (Some(_), true) => return Err(usage("--algos and --table2 are exclusive")),
        (None, _) => accuracy_algorithms().to_vec(),
    };
    let rows = kernel_accuracy_experiment(&specs, &algos, &theta_grid(a.theta_step)?, a.size)?;
    write_kernel_table_csv(&rows, create(&a.out)?)?;
    if let Some(p) = &a.curves_out {
        write_kernel_curves_csv(&rows, create(p)?)?;
    }
    Ok(())
}

fn cmd_throughput(a: ThroughputArgs) -> CliResult<()> {
    let cfg = ThroughputConfig {
        sizes: parse_sizes(&a.sizes)?,
        reps: a.reps,
        trim: a.trim,
        algos: parse_algos(&a.algos)?,
        theta: a.theta,
        sigma1: a.sigma1,
        sigma2: a.sigma2,
        seed: a.seed,
    };
    write_throughput_csv(&throughput_benchmark(&cfg)?, create(&a.out)?)?;
    Ok(())
}

fn cmd_synthetic(a: SyntheticArgs) -> CliResult<()> {
    let methods = a
        .methods
        .split(',')
        .map(|m| m.trim())
        .filter(|m| !m.is_empty())
        .map(|m| Method::parse(m).map_err(|e| usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    let cfg = ContrastConfig {
        size: a.size,
        seeds: parse_seeds(&a.seeds)?,
        contrasts: parse_list(&a.contrasts, "contrast")?,
        widths: parse_list(&a.w, "width")?,
        theta_step: a.theta_step,
        mr_angle_step: a.mr_angle_step,
        methods,
        median: a.median.on(),
        frequency_scaled: !a.unscaled_fibers,
        ..ContrastConfig::desk()
    };
    let report = run_contrast_experiment(&cfg)?;
    report.write_summary_csv(create(&a.out)?)?;
    if let Some(p) = &a.rows_out {
        report.write_rows_csv(create(p)?)?;
    }
    Ok(())
}

fn cmd_colorize(a: ColorizeArgs) -> CliResult<()> {
    let angle = read_image(&a.input)?;
    let (w, h) = angle.dims();
    let response = match &a.response {
        Some(p) => {
            let r = read_image(p)?;
            if r.dims() != (w, h) {
                return Err(Error::mismatch(r.dims(), (w, h)).into());
            }
            r
        }
        None => Image2D::filled(w, h, 1.0)?,
    };
    let valid = BinaryMask::from_fn(w, h, |x, y| {
        angle.get(x, y).is_finite() && response.get(x, y).is_finite()
    })?;
    let field = OrientationField {
        angle,
        response,
        valid,
    };
    fs::write(&a.output, colorize(&field).to_ppm())?;
    Ok(())
}

fn cmd_reproduce(a: ReproduceArgs) -> CliResult<()> {
    fs::create_dir_all(&a.out_dir)?;
    let out = |name: &str| a.out_dir.join(name);
    let theta_step = if a.desk_scale { 5.0 } else { 1.0 };
    match a.section {
        Section::Table2 => {
            let rows = kernel_accuracy_experiment(
                &ACCURACY_SPECS,
                &accuracy_algorithms(),
                &theta_grid(theta_step)?,
                DEFAULT_SIZE,
            )?;
            write_kernel_table_csv(&rows, create(&out("t2.csv"))?)?;
            write_kernel_curves_csv(&rows, create(&out("t2_curves.csv"))?)?;
        }
        Section::Fig2a => {
            let rows = kernel_accuracy_experiment(
                &[(25.0, 2.0)],
                &accuracy_algorithms(),
                &theta_grid(theta_step)?,
                DEFAULT_SIZE,
            )?;
            write_kernel_curves_csv(&rows, create(&out("fig2a.csv"))?)?;
        }
        Section::Fig3b => {
            let cfg = if a.desk_scale {
                ThroughputConfig {
                    sizes: (100..=1990).step_by(270).collect(),
                    reps: 10,
                    ..ThroughputConfig::default()
                }
            } else {
                ThroughputConfig::default()
            };
            write_throughput_csv(&throughput_benchmark(&cfg)?, create(&out("fig3b.csv"))?)?;
        }
        Section::Fig4 | Section::Fig6 => {
            let mut cfg = if a.desk_scale {
                ContrastConfig::desk()
            } else {
                ContrastConfig::full()
            };
            let name = if a.section == Section::Fig6 {
                cfg.median = true;
                "fig6"
            } else {
                "fig4"
            };
            let report = run_contrast_experiment(&cfg)?;
            report.write_summary_csv(create(&out(&format!("{name}.csv")))?)?;
            report.write_rows_csv(create(&out(&format!("{name}_rows.csv")))?)?;
        }
    }
    Ok(())
}
