//! `specalloc` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors (unreadable or inconsistent dataset, failed stage).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use specalloc::config::RunConfig;
use specalloc::dataset::io::{self, read_labels, read_manifest, read_multisu, read_predictions, read_scenarios};
use specalloc::dataset::pipeline::{self, AugmentRequest, BaselineAlgo};
use specalloc::exec::Exec;
use specalloc::metrics::{multisu_report, score, write_report, EvalReport, ReportFormat};
use specalloc::multi_su::MultiAlgo;
use specalloc::propagation::{fit_alpha, sample_path_losses, LogDistance};

#[derive(Debug, Parser)]
#[command(name = "specalloc", version, about = "Shared-spectrum allocation toolkit: datasets, baselines and scoring")]
struct Cli {
    /// Run configuration (TOML). Missing sections use built-in defaults; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Global seed for scenario sampling and the propagation field [default: config value, else 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel stages; 1 runs sequentially [default: logical cores]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataDir {
    /// Dataset directory
    #[arg(long, alias = "data", value_name = "DIR", default_value = "data")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Lbt,
    Ipb,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MultiArg {
    Binary,
    Greedy,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample scenarios into a fresh dataset directory
    Gen {
        #[command(flatten)]
        dir: DataDir,
        /// Number of scenarios
        #[arg(long, default_value_t = 2048)]
        count: usize,
        /// SUs per scenario; the first one is the requesting SU [default: config, else 1]
        #[arg(long)]
        n_sus: Option<u32>,
    },
    /// Compute exact and conservative labels for every scenario
    Label {
        #[command(flatten)]
        dir: DataDir,
    },
    /// Encode every scenario as an image tensor
    Encode {
        #[command(flatten)]
        dir: DataDir,
        /// PU power sheets; one SU sheet is added [default: config, else 6]
        #[arg(long)]
        sheets: Option<usize>,
        /// Image side length in pixels [default: config, else 100]
        #[arg(long, value_name = "PX")]
        size: Option<usize>,
    },
    /// Append synthetic samples derived from the original samples
    Augment {
        #[command(flatten)]
        dir: DataDir,
        /// Rotations in degrees, comma separated (90, 180, 270)
        #[arg(long, value_delimiter = ',', value_name = "DEG")]
        rotations: Vec<u32>,
        /// Far-PU power reduction synthetics, kept when the label drifts by at most the configured dB
        #[arg(long)]
        far_pu: bool,
        /// Sensors added by 4-nearest IDW interpolation per sample [default: config, else 0]
        #[arg(long, value_name = "N")]
        idw: Option<usize>,
    },
    /// Generate a labeled and encoded pre-training dataset in one streamed pass
    PretrainGen {
        #[command(flatten)]
        dir: DataDir,
        /// Number of samples
        #[arg(long, default_value_t = 2048)]
        count: usize,
    },
    /// Run a classical allocator and write its predictions
    Baseline {
        #[command(flatten)]
        dir: DataDir,
        #[arg(long, value_enum)]
        algo: AlgoArg,
        /// Fitted path-loss exponent for IP-Based [default: config, else 3.3]
        #[arg(long)]
        alpha: Option<f64>,
        /// Output file [default: DIR/predictions.csv]
        #[arg(long, value_name = "FILE")]
        pred: Option<PathBuf>,
    },
    /// Allocate several SUs per scenario and write multisu_labels.csv
    Multisu {
        #[command(flatten)]
        dir: DataDir,
        /// Allocator [default: config, else binary]
        #[arg(long, value_enum)]
        algo: Option<MultiArg>,
        /// SUs drawn per scenario; 0 keeps the scenario's own [default: config, else 10]
        #[arg(long)]
        n_sus: Option<u32>,
        /// Channels the SUs are split over [default: config, else 1]
        #[arg(long)]
        channels: Option<usize>,
        /// Binary-Alloc stopping width in dB [default: config, else 0.1]
        #[arg(long, value_name = "DB")]
        threshold_db: Option<f64>,
    },
    /// Score prediction files against the dataset labels
    Eval {
        #[command(flatten)]
        dir: DataDir,
        /// Prediction files (sample_id, predicted_dbm, algo); repeatable [default: DIR/predictions.csv]
        #[arg(long, value_name = "FILE")]
        pred: Vec<PathBuf>,
        /// Report file; a .md extension writes markdown, anything else CSV [default: DIR/report.csv]
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Also report fairness, data rate (bit/s) and total power (W) from multisu_labels.csv
        #[arg(long)]
        multisu: bool,
    },
    /// Fit the path-loss exponent to (distance_m, loss_db) samples
    FitAlpha {
        /// CSV with header distance_m,loss_db; without it, links are drawn from the configured model
        #[arg(long, value_name = "FILE")]
        samples: Option<PathBuf>,
        /// Links drawn when no sample file is given
        #[arg(long, default_value_t = 10_000)]
        count: usize,
    },
}

/// Errors are tagged with the exit status they map to.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut run = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        run.set_seed(seed);
    }
    Ok(run)
}

fn exec_for(jobs: Option<usize>) -> Exec {
    match jobs {
        Some(1) => Exec::Sequential,
        _ if cfg!(feature = "parallel") => Exec::Parallel,
        _ => Exec::Sequential,
    }
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| usage(anyhow!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T: Send>(_jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    Ok(f())
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.jobs == Some(0) {
        return Err(usage(anyhow!("--jobs must be at least 1")));
    }
    let mut run = load_config(&cli)?;
    let exec = exec_for(cli.jobs);
    let jobs = cli.jobs;
    match cli.command {
        Command::Gen { dir, count, n_sus } => {
            if let Some(n) = n_sus {
                run.sampler.n_sus = n;
            }
            run.validate().map_err(usage)?;
            let m = with_pool(jobs, || pipeline::generate(&dir.out, &run, count, exec))?.map_err(data)?;
            println!("generated {} scenarios in {}", m.counts.scenarios, dir.out.display());
        }
        Command::Label { dir } => {
            run.conservative.validate().map_err(usage)?;
            let m = with_pool(jobs, || pipeline::label(&dir.out, &run, exec))?.map_err(data)?;
            println!("labeled {} samples", m.counts.labels);
        }
        Command::Encode { dir, sheets, size } => {
            if let Some(s) = sheets {
                run.sheets.n_pu_sheets = s;
            }
            if let Some(px) = size {
                run.sheets.image_px = px;
            }
            run.sheets.validate().map_err(usage)?;
            let m = with_pool(jobs, || pipeline::encode(&dir.out, &run, exec))?.map_err(data)?;
            let d = run.sheets.dims();
            println!("encoded {} images of {}x{}x{}", m.counts.images, d.sheets, d.height, d.width);
        }
        Command::Augment { dir, rotations, far_pu, idw } => {
            if let Some(&bad) = rotations.iter().find(|d| ![90, 180, 270].contains(*d)) {
                return Err(usage(anyhow!("rotation {bad} is not one of 90, 180, 270")));
            }
            let req = AugmentRequest {
                far_pu,
                rotations,
                idw_new_sensors: idw.unwrap_or(run.augment.idw_new_sensors),
            };
            let s = with_pool(jobs, || pipeline::augment(&dir.out, &run, &req, exec))?.map_err(data)?;
            println!(
                "sources {} far_pu {}/{} rotated {} idw {}",
                s.sources, s.far_pu_kept, s.far_pu_generated, s.rotated, s.idw
            );
            if let Some(rate) = s.far_pu_pass_rate() {
                println!("far_pu pass rate {rate:.4}");
            }
        }
        Command::PretrainGen { dir, count } => {
            run.validate().map_err(usage)?;
            let m = with_pool(jobs, || pipeline::pretrain(&dir.out, &run, count, exec))?.map_err(data)?;
            println!("wrote {} pre-training samples", m.counts.scenarios);
        }
        Command::Baseline { dir, algo, alpha, pred } => {
            if let Some(a) = alpha {
                run.ipb.alpha_fitted = a;
            }
            let algo = match algo {
                AlgoArg::Lbt => BaselineAlgo::Lbt,
                AlgoArg::Ipb => BaselineAlgo::Ipb,
            };
            let rows = with_pool(jobs, || pipeline::baseline(&dir.out, &run, algo, exec))?.map_err(data)?;
            let path = pred.unwrap_or_else(|| dir.out.join(io::PREDICTIONS));
            io::write_predictions(&path, &rows).map_err(data)?;
            let denied = rows.iter().filter(|r| r.predicted_dbm.is_none()).count();
            println!("{}: {} predictions, {} denied, written to {}", algo.name(), rows.len(), denied, path.display());
        }
        Command::Multisu { dir, algo, n_sus, channels, threshold_db } => {
            if let Some(a) = algo {
                run.multisu.algo = match a {
                    MultiArg::Binary => MultiAlgo::Binary,
                    MultiArg::Greedy => MultiAlgo::Greedy,
                };
            }
            if let Some(n) = n_sus {
                run.multisu.n_sus = n;
            }
            if let Some(c) = channels {
                run.multisu.channels = c;
            }
            if let Some(t) = threshold_db {
                run.multisu.threshold_db = t;
            }
            run.validate().map_err(usage)?;
            let rows = with_pool(jobs, || pipeline::multisu(&dir.out, &run, exec))?.map_err(data)?;
            let granted = rows.iter().filter(|r| r.granted_dbm.is_some()).count();
            println!("{} SU allocations, {} granted", rows.len(), granted);
        }
        Command::Eval { dir, pred, report, multisu } => eval(&dir.out, pred, report, multisu, &run)?,
        Command::FitAlpha { samples, count } => {
            let points = match samples {
                Some(path) => read_loss_samples(&path).map_err(data)?,
                None => {
                    run.validate().map_err(usage)?;
                    let model = LogDistance::new(run.propagation, &run.region).map_err(usage)?;
                    sample_path_losses(&model, &run.region, count, run.seed)
                }
            };
            let alpha = fit_alpha(&points, run.propagation.pl0_db, run.propagation.d0_m).map_err(data)?;
            println!("alpha = {alpha}");
        }
    }
    Ok(())
}

fn eval(dir: &Path, pred: Vec<PathBuf>, report: Option<PathBuf>, multisu: bool, run: &RunConfig) -> Result<(), Failure> {
    let manifest = read_manifest(dir).map_err(data)?;
    let floor = manifest.oracle.denial_floor_dbm;
    let name = dataset_name(dir);
    let mut reports = Vec::new();

    let pred_files = if pred.is_empty() { vec![dir.join(io::PREDICTIONS)] } else { pred };
    let labels = read_labels(&dir.join(io::LABELS), manifest.conservative.is_some()).map_err(data)?;
    for file in &pred_files {
        let rows = read_predictions(file).map_err(data)?;
        let mut algos: Vec<&str> = rows.iter().map(|r| r.algo.as_str()).collect();
        algos.sort_unstable();
        algos.dedup();
        for algo in algos {
            let subset: Vec<_> = rows.iter().filter(|r| r.algo == algo).cloned().collect();
            let s = score(&subset, &labels, floor)
                .with_context(|| format!("scoring {} ({algo})", file.display()))
                .map_err(data)?;
            reports.push(EvalReport::from_score(algo, &name, &s));
        }
    }

    if multisu {
        let rows = read_multisu(&dir.join(io::MULTISU_LABELS)).map_err(data)?;
        let scenarios = read_scenarios(&dir.join(io::SCENARIOS)).map_err(data)?;
        let model = pipeline::world(&manifest).map_err(data)?;
        let mut algos: Vec<&str> = rows.iter().map(|r| r.algo.as_str()).collect();
        algos.sort_unstable();
        algos.dedup();
        for algo in algos {
            let r = multisu_report(&rows, &scenarios, &model, &manifest.oracle, &run.metrics, algo, &name)
                .map_err(data)?;
            reports.push(r);
        }
    }

    let path = report.unwrap_or_else(|| dir.join("report.csv"));
    write_report(&reports, &path, ReportFormat::from_path(&path)).map_err(data)?;
    for r in &reports {
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{} n={} a_err_db={} a_fp_db={} fp_rate={} fairness={} total_rate_bps={} total_power_w={}",
            r.algo,
            r.n,
            cell(r.a_err_db),
            cell(r.a_fp_db),
            cell(r.fp_rate),
            cell(r.fairness),
            cell(r.total_rate_bps),
            cell(r.total_power_w)
        );
    }
    println!("report written to {}", path.display());
    Ok(())
}

fn read_loss_samples(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    #[derive(serde::Deserialize)]
    struct Row {
        distance_m: f64,
        loss_db: f64,
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    reader
        .deserialize::<Row>()
        .map(|r| r.map(|r| (r.distance_m, r.loss_db)).with_context(|| format!("reading {}", path.display())))
        .collect()
}

/// Joins the cause chain, skipping causes a message already spells out.
fn render(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(2)
        }
    }
}
