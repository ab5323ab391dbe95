#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use surfel_lio::bench::{bench, rows_to_csv, BenchConfig};
use surfel_lio::dataset::{read_tum, write_dataset, write_tum, DatasetReader, CONFIG_FILE};
use surfel_lio::eval::{evaluate, DEFAULT_MAX_DT};
use surfel_lio::exec::Exec;
use surfel_lio::pipeline::{run_dataset, PipelineConfig};
use surfel_lio::sim::{simulate, PlanarWorld, ScanPattern, SimConfig, TrajectoryKind, TrajectorySpec};
use surfel_lio::Error;

const USAGE: u8 = 1;
const DATA: u8 = 2;
const FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "surfel-lio", version, about = "Surfel-map LiDAR-inertial odometry toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fov {
    Cone70,
    Ring360,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    None,
    Realistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Spec {
    Rest,
    Line,
    Circle,
    Figure8,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a ground-truthed dataset in the planar room.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        spec: Spec,
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "ring360")]
        fov: Fov,
        #[arg(long, default_value_t = 15_000)]
        points_per_scan: usize,
        #[arg(long, value_enum, default_value = "realistic")]
        noise: Noise,
    },
    /// Run the odometry over a dataset directory.
    Run {
        #[arg(long)]
        data: PathBuf,
        /// Pipeline config; defaults to the one stored with the dataset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_traj: PathBuf,
        #[arg(long)]
        out_timing: Option<PathBuf>,
        /// Force the single-threaded code paths.
        #[arg(long)]
        sequential: bool,
    },
    /// Absolute pose error after rigid alignment.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_DT)]
        max_dt: f64,
    },
    /// Query and update timings of the surfel map against the kNN baseline.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "10000,100000,1000000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        queries: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

struct Failure {
    code: u8,
    err: Error,
}

fn with(code: u8) -> impl Fn(Error) -> Failure {
    move |err| Failure { code, err }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure { code: DATA, err: Error::Io { path: path.to_path_buf(), source: e } }
}

fn synth(
    out: &Path,
    spec: Spec,
    duration: f64,
    seed: u64,
    fov: Fov,
    points: usize,
    noise: Noise,
) -> Result<(), Failure> {
    let kind = match spec {
        Spec::Rest => TrajectoryKind::Rest,
        Spec::Line => TrajectoryKind::Line,
        Spec::Circle => TrajectoryKind::Circle,
        Spec::Figure8 => TrajectoryKind::Figure8,
    };
    let trajectory = TrajectorySpec::of_kind(kind, duration);
    let pattern = match fov {
        Fov::Cone70 => ScanPattern::cone70(points),
        Fov::Ring360 => ScanPattern::ring360(points),
    };
    let cfg = match noise {
        Noise::None => SimConfig { seed, ..SimConfig::noiseless(trajectory, pattern) },
        Noise::Realistic => SimConfig::realistic(trajectory, pattern, seed),
    };
    let data = simulate(&cfg, &PlanarWorld::room(), Exec::default()).map_err(with(USAGE))?;
    let manifest = write_dataset(out, &data, &PipelineConfig::default()).map_err(with(DATA))?;
    println!(
        "wrote {} scans, {} imu samples, {} files to {}",
        data.scans.len(),
        data.imu.len(),
        manifest.entries.len(),
        out.display()
    );
    Ok(())
}

fn run(
    data: &Path,
    config: Option<&Path>,
    out_traj: &Path,
    out_timing: Option<&Path>,
    sequential: bool,
) -> Result<(), Failure> {
    let config_path = config.map(Path::to_path_buf).unwrap_or_else(|| data.join(CONFIG_FILE));
    let text = fs::read_to_string(&config_path).map_err(io(&config_path))?;
    let cfg = PipelineConfig::from_toml(&text).map_err(with(DATA))?;
    let reader = DatasetReader::open(data).map_err(with(DATA))?;
    let exec = if sequential { Exec::Sequential } else { Exec::default() };
    let out = run_dataset(reader, cfg, exec).map_err(with(DATA))?;
    write_tum(out_traj, &out.trajectory).map_err(with(DATA))?;
    if let Some(path) = out_timing {
        fs::write(path, out.timings.to_csv()).map_err(io(path))?;
    }
    let total = out.timings.total_ms();
    println!(
        "frames={} poses={} total_ms_mean={:.3} total_ms_p95={:.3}",
        out.frames,
        out.trajectory.len(),
        total.mean,
        total.p95
    );
    Ok(())
}

fn eval(est: &Path, reference: &Path, max_dt: f64) -> Result<(), Failure> {
    if !(max_dt > 0.0) {
        return Err(Failure { code: USAGE, err: Error::InvalidInput("--max-dt must be positive".into()) });
    }
    let est = read_tum(est).map_err(with(DATA))?;
    let reference = read_tum(reference).map_err(with(DATA))?;
    let report = evaluate(&est, &reference, max_dt).map_err(with(FAILURE))?;
    print!("{}", report.to_key_values());
    Ok(())
}

fn run_bench(sizes: Vec<usize>, queries: usize, k: usize, seed: u64, reps: usize) -> Result<(), Failure> {
    let cfg = BenchConfig { sizes, queries, k, seed, reps: reps.max(1), ..Default::default() };
    let rows = match bench(&cfg) {
        Ok(rows) => rows,
        Err(e @ Error::InvalidInput(_)) => return Err(Failure { code: USAGE, err: e }),
        Err(e) => return Err(Failure { code: FAILURE, err: e }),
    };
    print!("{}", rows_to_csv(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth { out, spec, duration, seed, fov, points_per_scan, noise } => {
            synth(&out, spec, duration, seed, fov, points_per_scan, noise)
        }
        Command::Run { data, config, out_traj, out_timing, sequential } => {
            run(&data, config.as_deref(), &out_traj, out_timing.as_deref(), sequential)
        }
        Command::Eval { est, reference, max_dt } => eval(&est, &reference, max_dt),
        Command::Bench { sizes, queries, k, seed, reps } => run_bench(sizes, queries, k, seed, reps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.err);
            ExitCode::from(f.code)
        }
    }
}
