//! `wavedenoise`: denoise signal files, run minimax experiments, check
//! probability bounds and fit convergence rates.
//!
//! Exit codes: 0 success, 2 data error, 3 config error, 4 numerical failure.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wavedenoise::experiment::{run_experiment, verify_bounds, BoundOutcome, ExperimentConfig};
use wavedenoise::io::{mask_to_csv, pyramid_to_csv, read_signal, write_atomic, write_signal};
use wavedenoise::risk::report::{rate_fit, RiskReport};
use wavedenoise::Error;

#[derive(Parser)]
#[command(name = "wavedenoise", version, about = "Wavelet shrinkage for heavy-tailed noise")]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replicates (overrides the config file).
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a signal file (text, or raw little-endian `.f64`).
    Denoise {
        input: PathBuf,
        /// TOML file with an `[estimator]` table; defaults to the universal threshold.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the minimax experiment described by a TOML config.
    Experiment { config: PathBuf },
    /// Check the exponential tail bounds and moment inequalities by simulation.
    VerifyBounds,
    /// Fit log-log convergence rates to an existing report CSV.
    RateFit {
        report: PathBuf,
        /// Smoothness used for the target slope `-2m/(2m+1)`.
        #[arg(long)]
        m: Option<f64>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn default_output(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match input.extension() {
        Some(ext) => format!("{stem}.denoised.{}", ext.to_string_lossy()),
        None => format!("{stem}.denoised"),
    };
    input.with_file_name(name)
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Denoise { input, config } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => ExperimentConfig::from_toml("[estimator]\nrule = \"universal\"")?,
            };
            let plan = cfg.plan()?;
            if plan.calibrate.is_some() {
                return Err(Error::Config("denoise needs a numeric `C`; calibration only runs in experiments".into()));
            }
            for w in &plan.warnings {
                eprintln!("warning: {w}");
            }
            let signal = read_signal(&input)?;
            let pipeline = plan.estimator.build(signal.len(), plan.besov.m).map_err(|e| match e {
                Error::NotDyadic(_) | Error::Shape(_) => e,
                other => Error::Config(other.to_string()),
            })?;
            let result = pipeline.denoise(signal.samples())?;
            let out = cli.out.unwrap_or_else(|| default_output(&input));
            write_signal(&out, result.signal.samples())?;
            write_atomic(&sidecar(&out, ".coeffs.csv"), pyramid_to_csv(&result.coefficients).as_bytes())?;
            if let Some(mask) = &result.mask {
                write_atomic(&sidecar(&out, ".mask.csv"), mask_to_csv(mask).as_bytes())?;
            }
            eprintln!("wrote {}", out.display());
        }
        Command::Experiment { config } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(r) = cli.reps {
                cfg.reps = r;
            }
            if cli.threads.is_some() {
                cfg.threads = cli.threads;
            }
            let out = cli
                .out
                .or_else(|| cfg.out.clone())
                .ok_or_else(|| Error::Config("no output path: set `out` or pass --out".into()))?;
            cfg.experiment_plan()?;
            set_threads(cfg.threads)?;
            let report = run_experiment(&cfg, &mut |line| eprintln!("{line}"))?;
            write_atomic(&out, report.to_csv()?.as_bytes())?;
            for f in &report.fits {
                eprintln!("{}: slope {:.4} (residual {:.4})", f.estimator, f.slope, f.residual);
            }
            eprintln!("wrote {}", out.display());
        }
        Command::VerifyBounds => {
            set_threads(cli.threads)?;
            let outcomes = verify_bounds(cli.reps.unwrap_or(1_000_000), cli.seed.unwrap_or(1))?;
            let mut csv = format!("{}\n", BoundOutcome::CSV_HEADER);
            for o in &outcomes {
                eprintln!(
                    "{:<28} {} empirical {:.6e} (se {:.2e}) in [{:.6e}, {:.6e}]",
                    o.name,
                    if o.pass { "PASS" } else { "FAIL" },
                    o.empirical,
                    o.se,
                    o.lower,
                    o.upper
                );
                csv.push_str(&o.csv_line());
                csv.push('\n');
            }
            match cli.out {
                Some(p) => write_atomic(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            if let Some(bad) = outcomes.iter().find(|o| !o.pass) {
                return Err(Error::Numerical(format!("check `{}` failed", bad.name)));
            }
        }
        Command::RateFit { report, m } => {
            let text = std::fs::read_to_string(&report)?;
            let mut rep = RiskReport::from_csv(&text)?;
            rep.fits.clear();
            for est in rep.estimators() {
                let rows: Vec<_> = rep.rows.iter().filter(|r| r.estimator == est).cloned().collect();
                let fit = rate_fit(&rows, m).map_err(|e| Error::Config(format!("{est}: {e}")))?;
                eprintln!("{est}: slope {:.4}, intercept {:.4}, residual {:.4}", fit.slope, fit.intercept, fit.residual);
                rep.fits.push(fit);
            }
            let csv = rep.to_csv()?;
            match cli.out {
                Some(p) => write_atomic(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
