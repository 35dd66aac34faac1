use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use awavo::envs::EpisodeTrace;
use awavo::harness::verify::{oracle_all, verify_all, SuiteReport};
use awavo::harness::{fit_rate, run_training, LearningCurve, RateOutcome, TrainConfig, DEFAULT_BURN_IN};
use awavo::inference::{interpret_trace, write_interpretation};
use awavo::Error;

#[derive(Parser)]
#[command(name = "awavo", version, about = "Adaptive sliced-Wasserstein variational optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a control task from a key = value config file.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run every property suite and print one line per property.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this directory as `verify.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the convergence-rate exponent of a learning curve.
    Rate {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: f64,
    },
    /// Emit the per-step interpretation series of an episode trace.
    Interpret {
        #[arg(long)]
        trace: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the fast 1-D Wasserstein distance with the brute-force oracle.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn report(lines: &[SuiteReport], out: Option<PathBuf>) -> Result<bool, Error> {
    let text: String = lines.iter().map(|r| format!("{r}\n")).collect();
    print!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("verify.txt"), &text)?;
    }
    Ok(lines.iter().all(SuiteReport::passed))
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            episodes,
        } => {
            let mut cfg = match config {
                Some(path) => TrainConfig::load(path)?,
                None => TrainConfig::parse("")?,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            let outcome = run_training(&cfg, Some(&out))?;
            println!(
                "baseline return {:.3}  final return {:.3}  final j_g {:?}",
                outcome.baseline_return(),
                outcome.final_return(),
                outcome.final_eval.constraints.values
            );
            Ok(true)
        }
        Command::Verify { seed, out } => report(&verify_all(seed)?, out),
        Command::Oracle { seed, trials } => report(&oracle_all(seed, trials)?, None),
        Command::Rate { curve, burn_in } => {
            let curve = LearningCurve::load(curve)?;
            match fit_rate(&curve.returns(), burn_in)? {
                RateOutcome::Fitted(fit) => println!(
                    "exponent {:.4} ± {:.4}  (asymptote {:.3}, {} points, {} dropped)",
                    fit.exponent, fit.stderr, fit.asymptote, fit.points_used, fit.points_dropped
                ),
                RateOutcome::Skipped(why) => println!("rate fit skipped: {why}"),
            }
            Ok(true)
        }
        Command::Interpret { trace, out } => {
            let rows = interpret_trace(&EpisodeTrace::load(trace)?)?;
            match out {
                Some(path) => {
                    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
                    write_interpretation(&rows, &mut w)?;
                    std::io::Write::flush(&mut w)?;
                }
                None => write_interpretation(&rows, std::io::stdout().lock())?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
