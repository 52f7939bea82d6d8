use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cold::eval::{aggregate, EvalReport};
use cold::scenario::parse_scenario;
use cold::sim::{run_scenario, summary_text, write_outputs, ModeSelect, RunOptions};

#[derive(Parser)]
#[command(name = "cold", about = "Collective lane detection toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Convoy,
    Spline,
}

impl From<ModeArg> for ModeSelect {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ModeSelect::Auto,
            ModeArg::Convoy => ModeSelect::Convoy,
            ModeArg::Spline => ModeSelect::Spline,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write frames.csv plus summary.txt.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        codec: OnOff,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<u32>,
    },
    /// Repeat a scenario and report fusion runtime statistics.
    Bench {
        scenario: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeat: u32,
    },
    /// Re-aggregate a frames.csv written by `run` into a summary table.
    Report { dir: PathBuf },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load_config(path: &PathBuf) -> Result<cold::ScenarioConfig, u8> {
    let bytes = std::fs::read(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        EXIT_CONFIG
    })?;
    parse_scenario(&bytes).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_CONFIG
    })
}

fn cmd_run(
    scenario: PathBuf,
    out: PathBuf,
    codec: OnOff,
    mode: ModeArg,
    seed: Option<u64>,
    frames: Option<u32>,
) -> Result<(), u8> {
    let mut cfg = load_config(&scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = frames {
        cfg.frames = n;
    }
    let opts = RunOptions {
        codec: matches!(codec, OnOff::On),
        mode: mode.into(),
        apex: true,
    };
    let result = run_scenario(&cfg, &opts).map_err(|e| {
        eprintln!("run failed: {e}");
        EXIT_RUNTIME
    })?;
    write_outputs(&out, &result).map_err(|e| {
        eprintln!("cannot write outputs: {e}");
        EXIT_RUNTIME
    })?;
    log::info!("{} frames written to {}", result.reports.len(), out.display());
    print!("{}", summary_text(&result));
    Ok(())
}

fn cmd_bench(scenario: PathBuf, repeat: u32) -> Result<(), u8> {
    let cfg = load_config(&scenario)?;
    let opts = RunOptions::default();
    let mut runtimes = Vec::new();
    for _ in 0..repeat.max(1) {
        let result = run_scenario(&cfg, &opts).map_err(|e| {
            eprintln!("run failed: {e}");
            EXIT_RUNTIME
        })?;
        runtimes.extend(result.reports.iter().map(|r| r.runtime_us));
    }
    let n = runtimes.len() as f64;
    let mean = runtimes.iter().sum::<f64>() / n;
    let std = (runtimes.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let max = runtimes.iter().cloned().fold(0.0, f64::max);
    println!("fusion runtime over {} frames ({repeat} repeats):", runtimes.len());
    println!("  mean {:.1} us   std {:.1} us   max {:.1} us", mean, std, max);
    Ok(())
}

fn cmd_report(dir: PathBuf) -> Result<(), u8> {
    let path = dir.join("frames.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        EXIT_CONFIG
    })?;
    let mut reports = Vec::new();
    let mut modes = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            eprintln!("{}:{}: expected 9 columns, got {}", path.display(), i + 1, cols.len());
            return Err(EXIT_CONFIG);
        }
        let num = |s: &str| -> Result<f64, u8> {
            s.parse().map_err(|e| {
                eprintln!("{}:{}: bad number {s:?}: {e}", path.display(), i + 1);
                EXIT_CONFIG
            })
        };
        reports.push(EvalReport {
            frame_id: cols[0].parse().map_err(|_| EXIT_CONFIG)?,
            mse_left: num(cols[2])?,
            mse_right: num(cols[3])?,
            max_left: num(cols[4])?,
            max_right: num(cols[5])?,
            p95: num(cols[6])?,
            perception_range: num(cols[7])?,
            runtime_us: num(cols[8])?,
        });
        modes.push(cols[1].to_string());
    }
    let summary = aggregate(&reports).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_CONFIG
    })?;
    println!("frames: {}", summary.frames);
    println!("metric            mean        std        max");
    let row = |name: &str, f: fn(&EvalReport) -> f64| {
        println!(
            "{:<14} {:>10.4} {:>10.4} {:>10.4}",
            name,
            f(&summary.mean),
            f(&summary.std),
            f(&summary.max)
        );
    };
    row("mse_left [m]", |r| r.mse_left);
    row("mse_right [m]", |r| r.mse_right);
    row("max_left [m]", |r| r.max_left);
    row("max_right [m]", |r| r.max_right);
    row("p95 [m]", |r| r.p95);
    row("range [m]", |r| r.perception_range);
    row("runtime [us]", |r| r.runtime_us);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("COLD_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            codec,
            mode,
            seed,
            frames,
        } => cmd_run(scenario, out, codec, mode, seed, frames),
        Command::Bench { scenario, repeat } => cmd_bench(scenario, repeat),
        Command::Report { dir } => cmd_report(dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
