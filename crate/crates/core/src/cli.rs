//! Command-line front end. `main` only forwards to [`main_with`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{parse_shape, run_bench, to_csv, BenchScenario};
use crate::chunk::{parse_bytes, profile_budget, ExecOptions, HostBackend, MemoryBudget, DEFAULT_FRACTION};
use crate::error::{Error, Result};
use crate::io::{crop, meta_path_for, VolumeFile, VolumeMeta};
use crate::quantify::label_metrics_chunked;
use crate::registry::{self, Params, CATALOG};
use crate::service::{Service, ServiceConfig};
use crate::source::SlabSource;
use crate::volume::DType;

#[derive(Debug, Parser)]
#[command(name = "harpia", version, about = "Out-of-core volumetric segmentation")]
struct Cli {
    /// Worker threads for in-chunk parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Fixed usable working memory, e.g. 512MiB.
    #[arg(long, conflicts_with = "budget_fraction")]
    budget: Option<String>,
    /// Fraction of available host memory to plan against.
    #[arg(long)]
    budget_fraction: Option<f64>,
}

impl BudgetArgs {
    fn resolve(&self) -> Result<MemoryBudget> {
        match &self.budget {
            Some(text) => Ok(MemoryBudget::fixed(parse_bytes(text)?)),
            None => profile_budget(&HostBackend::probed(), self.budget_fraction.unwrap_or(DEFAULT_FRACTION)),
        }
    }
}

#[derive(Debug, Args)]
struct OpArgs {
    /// Input volumes; metadata is read from the `.meta` sidecar of each.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output data file; its sidecar is written next to it.
    #[arg(short, long)]
    output: PathBuf,
    /// Operator parameter as key=value; repeatable.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Write the chunk plan as JSON to this path.
    #[arg(long)]
    dump_plan: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run any registered operator.
    Run {
        op: String,
        #[command(flatten)]
        args: OpArgs,
    },
    /// Smoothing, denoising, edge and texture filters.
    Filter {
        #[arg(value_parser = ["gaussian", "mean", "median", "unsharp", "nlm", "diffusion", "sobel", "prewitt", "hessian", "lbp"])]
        kind: String,
        #[command(flatten)]
        args: OpArgs,
    },
    /// Global or local thresholding into a label volume.
    Threshold {
        #[arg(value_parser = ["value", "otsu", "local"])]
        method: String,
        #[command(flatten)]
        args: OpArgs,
    },
    /// Morphology and label editing.
    Morph {
        #[arg(value_parser = ["erode", "dilate", "open", "close", "components", "remove-islands", "fill-holes", "reconstruct", "smooth-labels"])]
        op: String,
        #[command(flatten)]
        args: OpArgs,
    },
    /// Marker-based slice-wise watershed: inputs are landscape then markers.
    Watershed {
        #[command(flatten)]
        args: OpArgs,
    },
    /// Per-label volume, surface area, perimeter and fraction as CSV.
    Metrics {
        labels: PathBuf,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Copy a Z range of a volume to a new file.
    Crop {
        input: PathBuf,
        /// Half-open slice range START:END.
        #[arg(long)]
        z: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time an operator over a ladder of volume sizes.
    Bench {
        #[arg(long, default_value = "median")]
        op: String,
        #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Comma-separated sizes: N for N slices of XY, or ZxYxX.
        #[arg(long, default_value = "64,128,192,256")]
        ladder: String,
        /// In-plane size for plain slice counts, as N or YxX.
        #[arg(long, default_value = "64")]
        xy: String,
        #[arg(long, default_value_t = 30)]
        repeats: usize,
        /// Fixed usable working memory for every run.
        #[arg(long, default_value = "64MiB")]
        budget: String,
        #[arg(long, default_value = "uint8")]
        dtype: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Keep the input loaded across repeats.
        #[arg(long)]
        warm: bool,
        /// Include file reads and writes in the timing.
        #[arg(long)]
        include_io: bool,
        /// Crop ladder volumes from this file instead of generating them.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Scratch directory for ladder volumes (default: system temp).
        #[arg(long)]
        workdir: Option<PathBuf>,
        /// CSV destination; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, env = "HARPIA_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "HARPIA_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "HARPIA_WORKERS", default_value_t = 1)]
        workers: usize,
        #[arg(long, env = "HARPIA_BUDGET_FRACTION")]
        budget_fraction: Option<f64>,
        /// Fixed usable bytes shared by the workers; overrides the fraction.
        #[arg(long)]
        budget: Option<String>,
        #[arg(long, default_value_t = 16)]
        queue: usize,
        /// Label states kept per dataset for undo.
        #[arg(long, default_value_t = 5)]
        snapshots: usize,
        #[arg(long)]
        workdir: Option<PathBuf>,
    },
    /// List registered operators and their parameters.
    Ops,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 runtime failure, 2 usage error.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("harpia: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::param("--threads must be at least 1"));
        }
        // fails only if the pool was already built, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Run { op, args } => run_op(&op, &args),
        Command::Filter { kind, args } => run_op(&kind, &args),
        Command::Threshold { method, args } => {
            let op = match method.as_str() {
                "value" => "threshold",
                "local" => "local-threshold",
                other => other,
            };
            run_op(op, &args)
        }
        Command::Morph { op, args } => run_op(&op, &args),
        Command::Watershed { args } => run_op("watershed", &args),
        Command::Metrics { labels, output, format, budget } => metrics(&labels, output.as_deref(), &format, &budget),
        Command::Crop { input, z, output } => {
            let range = parse_range(&z)?;
            let file = VolumeFile::open_default(&input)?;
            let out = crop(&file, range, &output, &meta_path_for(&output))?;
            eprintln!("wrote {} ({})", output.display(), out.meta().shape);
            Ok(())
        }
        Command::Bench { op, params, ladder, xy, repeats, budget, dtype, seed, warm, include_io, source, workdir, out } => {
            let default_xy = parse_xy(&xy)?;
            let shapes = ladder
                .split(',')
                .map(|s| parse_shape(s.trim(), default_xy))
                .collect::<Result<Vec<_>>>()?;
            let scratch;
            let workdir = match workdir {
                Some(d) => d,
                None => {
                    scratch = std::env::temp_dir().join(format!("harpia-bench-{}", std::process::id()));
                    scratch.clone()
                }
            };
            let mut scn = BenchScenario::new(&op, shapes, &workdir);
            scn.params = Params::parse_pairs(&params)?;
            scn.repeats = repeats;
            scn.budget_bytes = parse_bytes(&budget)?;
            scn.dtype = DType::parse(&dtype)?;
            scn.seed = seed;
            scn.warm = warm;
            scn.include_io = include_io;
            scn.source = source;
            let rows = run_bench(&scn);
            let _ = std::fs::remove_dir(&workdir);
            let csv = to_csv(&rows?);
            write_text(out.as_deref(), &csv)
        }
        Command::Serve { host, port, workers, budget_fraction, budget, queue, snapshots, workdir } => {
            let budget = BudgetArgs { budget, budget_fraction }.resolve()?;
            let mut cfg = ServiceConfig::new(budget);
            cfg.host = host;
            cfg.port = port;
            cfg.workers = workers;
            cfg.queue_capacity = queue;
            cfg.snapshots = snapshots;
            cfg.workdir = workdir;
            let service = Service::start(cfg)?;
            eprintln!("listening on http://{}:{}", service.config().host, service.config().port);
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            rt.block_on(service.serve())
        }
        Command::Ops => {
            let mut text = String::new();
            for op in CATALOG {
                text.push_str(&format!("{:<16} {}\n", op.name, op.summary));
                for p in op.params {
                    text.push_str(&format!("    {}={:<10} {}\n", p.name, p.default, p.help));
                }
            }
            write_text(None, &text)
        }
    }
}

fn run_op(name: &str, args: &OpArgs) -> Result<()> {
    let op = registry::build(name, &Params::parse_pairs(&args.params)?)?;
    let budget = args.budget.resolve()?;
    let files = args
        .inputs
        .iter()
        .map(|p| VolumeFile::open_default(p))
        .collect::<Result<Vec<_>>>()?;
    let sources: Vec<&dyn SlabSource> = files.iter().map(|f| f as &dyn SlabSource).collect();
    let dtypes: Vec<DType> = files.iter().map(|f| f.meta().dtype).collect();
    let out_dtype = op.out_dtype(&dtypes)?;
    let first = files[0].meta();
    let out_meta = VolumeMeta::new(out_dtype, first.shape, first.spacing);
    let mut out = VolumeFile::create_default(&args.output, out_meta)?;
    let report = match op.run(&sources, &mut out, &budget, &ExecOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            let _ = std::fs::remove_file(&args.output);
            let _ = std::fs::remove_file(meta_path_for(&args.output));
            return Err(e);
        }
    };
    if let Some(path) = &args.dump_plan {
        std::fs::write(path, report.plan.to_text()).map_err(|e| Error::io(path, e))?;
    }
    eprintln!(
        "{}: {} chunk(s), {:.3} s, peak {} B (predicted {} B), residual {} B",
        op.name(),
        report.chunk_count,
        report.total_seconds,
        report.peak_bytes,
        report.predicted_peak_bytes,
        report.residual_bytes
    );
    Ok(())
}

fn metrics(labels: &Path, output: Option<&Path>, format: &str, budget: &BudgetArgs) -> Result<()> {
    let file = VolumeFile::open_default(labels)?;
    let (table, _) = label_metrics_chunked(&file, &budget.resolve()?, &ExecOptions::default())?;
    let text = match format {
        "json" => serde_json::to_string_pretty(&table).map_err(|e| Error::Internal(e.to_string()))? + "\n",
        _ => table.to_csv()?,
    };
    write_text(output, &text)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn parse_range(text: &str) -> Result<std::ops::Range<usize>> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::param(format!("range {text:?} is not START:END")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::param(format!("range {text:?} is not START:END")))
    };
    Ok(num(a)?..num(b)?)
}

fn parse_xy(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::param(format!("in-plane size {text:?} is not N or YxX"));
    match text.split_once('x') {
        Some((y, x)) => Ok((y.trim().parse().map_err(|_| bad())?, x.trim().parse().map_err(|_| bad())?)),
        None => {
            let n = text.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}
