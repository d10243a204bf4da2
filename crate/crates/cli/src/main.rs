//! Command-line front end: runs the laboratory's experiments end to end,
//! emits machine-readable tables with a config digest, renders static
//! plots and images, and (with `--check`) evaluates the fixed acceptance
//! bounds, exiting nonzero on any miss.

mod emit;
mod runners;

use std::path::PathBuf;
use std::process::ExitCode;

use bfpfft_core::fft::PrecisionMode;
use clap::{Parser, ValueEnum};

use emit::EmitSet;
use runners::{Check, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentKind {
    /// Forward-transform SQNR vs the direct-summation reference
    FftSqnr,
    /// Matched-filter magnitude trace (shift x filter-normalization grid)
    FftTrace,
    /// Point-target imaging in four precision modes, with quality deltas
    Sar,
    /// Storage-only SQNR sweep across fp16/bf16/e4m3/e5m2
    FormatSweep,
    /// Host-CPU timing of batched transforms (informational only)
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
    Both,
}

#[derive(Parser, Debug)]
#[command(
    name = "bfpfft",
    version,
    about = "Reduced-precision FFT / SAR numerical laboratory",
    after_help = "Environment: BFPFFT_THREADS caps the worker-thread count."
)]
struct Cli {
    #[arg(value_enum)]
    experiment: ExperimentKind,

    /// Transform lengths / scene sides (comma separated, powers of two)
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    /// Precision modes: fp32, pure-fp16, fp16-storage, fp16-mul-fp32-acc
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,

    /// Random trials per cell (fft-sqnr: 200, format-sweep: 50, bench: 30)
    #[arg(long)]
    trials: Option<usize>,

    #[arg(long, default_value_t = 20260809)]
    seed: u64,

    /// Run cells with the block shift on, off, or both (sar)
    #[arg(long, value_enum, default_value_t = Toggle::Both)]
    bfp: Toggle,

    /// Matched-filter normalization for the shift-less sar cells; quality
    /// cells always use the normalized filter
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    normalize_filter: Toggle,

    /// Artifact kinds to write
    #[arg(long, default_value = "csv,json,svg")]
    emit: String,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Evaluate the fixed acceptance bounds; exit nonzero on a miss
    #[arg(long)]
    check: bool,

    /// Scene side for the sar experiment (e.g. 4096)
    #[arg(long)]
    full_scale: Option<usize>,

    /// Also dump raw binary images with sidecar descriptors (sar)
    #[arg(long)]
    raw: bool,
}

fn parse_modes(names: &Option<Vec<String>>) -> Result<Vec<PrecisionMode>, String> {
    match names {
        None => Ok(PrecisionMode::ALL.to_vec()),
        Some(list) => list
            .iter()
            .map(|s| {
                PrecisionMode::parse(s).ok_or_else(|| {
                    format!(
                        "unknown mode '{s}' (fp32, pure-fp16, fp16-storage, fp16-mul-fp32-acc)"
                    )
                })
            })
            .collect(),
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var("BFPFFT_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .ok();
            }
            _ => eprintln!("warning: ignoring BFPFFT_THREADS={value:?} (want a positive integer)"),
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<Check>, String> {
    let emit = EmitSet::parse(&cli.emit)?;
    let modes = parse_modes(&cli.modes)?;
    let default_sizes: Vec<usize> = match cli.experiment {
        ExperimentKind::Sar => vec![],
        _ => vec![1024, 4096],
    };
    let sizes = cli.sizes.clone().unwrap_or(default_sizes);
    for &n in &sizes {
        if !n.is_power_of_two() {
            return Err(format!("size {n} is not a power of two"));
        }
    }
    let trials = cli.trials.unwrap_or(match cli.experiment {
        ExperimentKind::FftSqnr => 200,
        ExperimentKind::FormatSweep => 50,
        ExperimentKind::Bench => 30,
        _ => 1,
    });
    if trials < 1 {
        return Err("--trials must be at least 1".into());
    }

    std::fs::create_dir_all(&cli.out)
        .map_err(|e| format!("cannot create output dir {}: {e}", cli.out.display()))?;

    let cfg = RunConfig {
        sizes,
        modes,
        trials,
        seed: cli.seed,
        bfp_on: matches!(cli.bfp, Toggle::On | Toggle::Both),
        bfp_off: matches!(cli.bfp, Toggle::Off | Toggle::Both),
        normalize_filter: matches!(cli.normalize_filter, Toggle::On | Toggle::Both),
        emit,
        check: cli.check,
        raw_images: cli.raw,
    };

    let result = match cli.experiment {
        ExperimentKind::FftSqnr => runners::run_fft_sqnr(&cfg, &cli.out),
        ExperimentKind::FftTrace => runners::run_fft_trace(&cfg, &cli.out),
        ExperimentKind::Sar => {
            let n = cli.full_scale.unwrap_or(1024);
            if !n.is_power_of_two() {
                return Err(format!("--full-scale {n} is not a power of two"));
            }
            runners::run_sar(&cfg, &cli.out, n)
        }
        ExperimentKind::FormatSweep => runners::run_format_sweep(&cfg, &cli.out),
        ExperimentKind::Bench => runners::run_bench(&cfg, &cli.out),
    };
    result.map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(checks) => {
            let mut failed = 0usize;
            for c in &checks {
                println!(
                    "CHECK {}: {} ({})",
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail
                );
                if !c.pass {
                    failed += 1;
                }
            }
            if cli.check {
                println!(
                    "CHECK summary: {}/{} passed",
                    checks.len() - failed,
                    checks.len()
                );
            }
            if failed > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
