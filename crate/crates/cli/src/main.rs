//! `mrkmeans` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 ingestion or file-format error,
//! 3 configuration error.

use std::fs::{self, File};
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mrkmeans::bench::{self, BenchReport, DatasetDescriptor, Sweep};
use mrkmeans::ingest::{self, AttributeProjection, SyntheticSpec};
use mrkmeans::memplane::{build_layout, SIMPLE_MODE_CAP};
use mrkmeans::{ClusteringConfig, Engine, Error, SampleSet};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "mrkmeans", version, about = "Map-Reduce style data-parallel k-means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a dataset and write labels, centroids and a summary.
    Cluster(ClusterArgs),
    /// Sweep the mapper count on one dataset.
    BenchM(BenchMArgs),
    /// Sweep the sample count on synthetic data.
    BenchN(BenchNArgs),
    /// Write a synthetic Gaussian-mixture dataset in the binary sample format.
    Gen(GenArgs),
    /// Print the memory-plane block layout.
    DumpLayout(LayoutArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Projection {
    Power2d,
    Power4d,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// UCI text file or binary sample file.
    #[arg(long)]
    input: PathBuf,
    /// Columns to keep from a UCI text file.
    #[arg(long, value_enum, default_value = "none")]
    projection: Projection,
}

#[derive(Debug, Args)]
struct EngineArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Absolute threshold on the change of distortion.
    #[arg(long, default_value_t = ClusteringConfig::DEFAULT_EPSILON)]
    epsilon: f32,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bytes per memory-plane transfer.
    #[arg(long, default_value_t = SIMPLE_MODE_CAP)]
    transfer_cap: u64,
}

impl EngineArgs {
    fn config(&self) -> ClusteringConfig {
        ClusteringConfig {
            k: self.k,
            m: self.m,
            epsilon: self.epsilon,
            max_iterations: self.max_iters,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write a bench report in this format.
    #[arg(long, value_enum)]
    report: Option<ReportFormat>,
    /// Print the block layout before clustering.
    #[arg(long)]
    dump_layout: bool,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    k_true: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f32,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

#[derive(Debug, Args)]
struct BenchMArgs {
    /// Dataset file; synthetic data is generated when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    projection: Projection,
    /// Synthetic sample count when no input is given.
    #[arg(long, default_value_t = 512_000)]
    n: usize,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    m_values: Vec<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct BenchNArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    n_values: Vec<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    k_true: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct LayoutArgs {
    /// Take n and d from this dataset instead of --n/--d.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    projection: Projection,
    #[arg(long, required_unless_present = "input")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "input")]
    d: Option<usize>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    /// Wraps a library error, naming the flag or file it concerns.
    fn from_lib(err: Error, file: Option<&Path>) -> Self {
        let in_file = |msg: String| match file {
            Some(p) => format!("{}: {msg}", p.display()),
            None => msg,
        };
        match err {
            Error::Config { field, reason } => Self {
                code: 3,
                message: format!("configuration error: {}: {reason}", flag_for(field)),
            },
            e @ (Error::Ingest { .. } | Error::Format(_) | Error::Io(_)) => Self {
                code: 2,
                message: in_file(e.to_string()),
            },
            other => Self {
                code: 3,
                message: format!("configuration error: {other}"),
            },
        }
    }
}

fn flag_for(field: &str) -> String {
    match field {
        "max_iterations" => "--max-iters".into(),
        other => format!("--{}", other.replace('_', "-")),
    }
}

type CliResult<T> = Result<T, CliError>;

fn lib<T>(r: mrkmeans::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from_lib(e, None))
}

fn at<T>(path: &Path, r: mrkmeans::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from_lib(e, Some(path)))
}

struct Loaded {
    samples: SampleSet,
    dropped: Option<usize>,
}

fn load(path: &Path, projection: Projection) -> CliResult<Loaded> {
    let mut magic = [0u8; 4];
    let read = File::open(path)
        .and_then(|mut f| f.read(&mut magic))
        .map_err(|e| CliError::from_lib(e.into(), Some(path)))?;
    if ingest::is_binary(&magic[..read]) {
        return Ok(Loaded {
            samples: at(path, ingest::read_binary(path))?,
            dropped: None,
        });
    }
    let projection = match projection {
        Projection::Power2d => AttributeProjection::power2d(),
        Projection::Power4d => AttributeProjection::power4d(),
        Projection::None => {
            return Err(CliError::usage(format!(
                "{} is not a binary sample file; choose --projection power2d or power4d",
                path.display()
            )))
        }
    };
    let data = at(path, ingest::parse_uci(path, &projection))?;
    Ok(Loaded {
        samples: data.samples,
        dropped: Some(data.dropped),
    })
}

fn create_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::from_lib(e.into(), Some(dir)))
}

fn write_reports(reports: &[BenchReport], format: ReportFormat, dir: &Path, stem: &str) -> CliResult<PathBuf> {
    let path = dir.join(match format {
        ReportFormat::Csv => format!("{stem}.csv"),
        ReportFormat::Json => format!("{stem}.json"),
    });
    let file = File::create(&path).map_err(|e| CliError::from_lib(e.into(), Some(&path)))?;
    let w = BufWriter::new(file);
    at(
        &path,
        match format {
            ReportFormat::Csv => bench::write_csv(reports, w),
            ReportFormat::Json => bench::write_json(reports, w),
        },
    )?;
    Ok(path)
}

fn cluster(args: ClusterArgs) -> CliResult<()> {
    let config = args.engine.config();
    lib(config.validate())?;
    let path = &args.input.input;
    let loaded = load(path, args.input.projection)?;
    let samples = &loaded.samples;
    if args.dump_layout {
        print!("{}", lib(build_layout(samples.n(), samples.d(), config.k, config.m, 4))?);
    }
    let mut engine = lib(Engine::new(config.clone()))?.with_transfer_cap(args.engine.transfer_cap);
    let run = lib(engine.run(samples))?;

    create_out_dir(&args.out_dir)?;
    let labels_path = args.out_dir.join("labels.bin");
    at(&labels_path, ingest::write_labels(run.labels.labels(), &labels_path))?;
    let centroids_path = args.out_dir.join("centroids.bin");
    let centroid_samples = lib(SampleSet::new(run.centroids.as_slice().to_vec(), run.centroids.d()))?;
    at(&centroids_path, ingest::write_binary(&centroid_samples, &centroids_path))?;

    let descriptor = DatasetDescriptor {
        source: path.display().to_string(),
        n: samples.n(),
        d: samples.d(),
        k: config.k,
    };
    let report = lib(BenchReport::from_run(descriptor, &config, &run))?;
    let summary = json!({
        "input": path.display().to_string(),
        "n": samples.n(),
        "d": samples.d(),
        "k": config.k,
        "m": config.m,
        "seed": config.seed,
        "epsilon": config.epsilon,
        "max_iterations": config.max_iterations,
        "dropped_rows": loaded.dropped,
        "iterations": run.iterations_run,
        "converged": run.converged,
        "distortion_history": run.distortions(),
        "timings": run.history.iter().map(|s| json!({
            "map_time_s": s.map_time,
            "reduce_time_s": s.reduce_time,
            "total_time_s": s.total_time,
        })).collect::<Vec<_>>(),
        "mean_iter_time_s": report.mean_iter_time_s,
        "throughput_bps": report.throughput_bps,
        "throughput_gbps": report.throughput_gbps,
        "map_ratio": report.map_ratio,
        "unit_convention": bench::UNIT_CONVENTION,
    });
    let summary_path = args.out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, text + "\n").map_err(|e| CliError::from_lib(e.into(), Some(&summary_path)))?;
    if let Some(format) = args.report {
        write_reports(std::slice::from_ref(&report), format, &args.out_dir, "report")?;
    }
    println!(
        "n={} d={} k={} m={} iterations={} converged={} distortion={} map_ratio={:.3} throughput={:.3} Gbps",
        samples.n(),
        samples.d(),
        config.k,
        config.m,
        run.iterations_run,
        run.converged,
        run.distortions().last().copied().unwrap_or(0.0),
        report.map_ratio,
        report.throughput_gbps
    );
    Ok(())
}

fn print_sweep(sweep: &Sweep, path: &Path) {
    for r in &sweep.reports {
        println!(
            "n={} m={} iterations={} iter_time={:.6}s throughput={:.3} Gbps map_ratio={:.3}",
            r.dataset.n, r.m, r.iterations_run, r.mean_iter_time_s, r.throughput_gbps, r.map_ratio
        );
    }
    for w in &sweep.warnings {
        eprintln!("warning: {w}");
    }
    println!("report written to {}", path.display());
}

fn synthetic_spec(n: usize, s: &SyntheticArgs) -> SyntheticSpec {
    SyntheticSpec {
        n,
        d: s.d,
        k_true: s.k_true,
        spread: s.spread,
        seed: s.data_seed,
    }
}

fn bench_m(args: BenchMArgs) -> CliResult<()> {
    let config = args.engine.config();
    lib(config.validate())?;
    let (samples, source) = match &args.input {
        Some(path) => (load(path, args.projection)?.samples, path.display().to_string()),
        None => {
            let spec = synthetic_spec(args.n, &args.synthetic);
            (lib(ingest::generate_synthetic(&spec))?, format!("synthetic(seed={})", spec.seed))
        }
    };
    let sweep = lib(bench::sweep_mappers(&samples, &source, &config, &args.m_values))?;
    create_out_dir(&args.out_dir)?;
    let path = write_reports(&sweep.reports, args.report, &args.out_dir, "bench_m")?;
    print_sweep(&sweep, &path);
    Ok(())
}

fn bench_n(args: BenchNArgs) -> CliResult<()> {
    let config = args.engine.config();
    lib(config.validate())?;
    let template = synthetic_spec(0, &args.synthetic);
    let sweep = lib(bench::sweep_samples(&template, &config, &args.n_values))?;
    create_out_dir(&args.out_dir)?;
    let path = write_reports(&sweep.reports, args.report, &args.out_dir, "bench_n")?;
    print_sweep(&sweep, &path);
    Ok(())
}

fn gen(args: GenArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        n: args.n,
        d: args.d,
        k_true: args.k_true,
        spread: args.spread,
        seed: args.seed,
    };
    let samples = lib(ingest::generate_synthetic(&spec))?;
    at(&args.output, ingest::write_binary(&samples, &args.output))?;
    println!("wrote {}×{} samples to {}", samples.n(), samples.d(), args.output.display());
    Ok(())
}

fn dump_layout(args: LayoutArgs) -> CliResult<()> {
    let (n, d) = match &args.input {
        Some(path) => {
            let s = load(path, args.projection)?.samples;
            (s.n(), s.d())
        }
        None => (args.n.unwrap_or(0), args.d.unwrap_or(0)),
    };
    let layout = lib(build_layout(n, d, args.k, args.m, 4))?;
    lib(layout.check_disjoint())?;
    print!("{layout}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::BenchM(a) => bench_m(a),
        Command::BenchN(a) => bench_n(a),
        Command::Gen(a) => gen(a),
        Command::DumpLayout(a) => dump_layout(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
