//! CLI harness for recovery trials, phase-transition sweeps, and lemma
//! verification runs.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numerical failure.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasemax_core::harness::{
    ensure_writable, records_to_csv, run_sweep, run_trial, verify_lemmas, write_json,
    write_records_csv, AnchorSpec, LemmaId, LemmaParams, SweepConfig, TrialConfig,
};
use phasemax_core::Error;

#[derive(Parser)]
#[command(name = "phasemax", version, about = "Phase retrieval via linear programming: trials, sweeps, and lemma checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    /// Truncated spectral initializer.
    Tspectral,
    /// Plain spectral initializer.
    Spectral,
    /// Synthetic anchor with exact relative error --beta.
    Synthetic,
}

fn anchor_spec(anchor: AnchorArg, beta: f64) -> AnchorSpec {
    match anchor {
        AnchorArg::Tspectral => AnchorSpec::TruncatedSpectral,
        AnchorArg::Spectral => AnchorSpec::PlainSpectral,
        AnchorArg::Synthetic => AnchorSpec::Synthetic { beta },
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Base seed; every numeric output is a pure function of it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for parallel sections (0 = automatic).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one end-to-end recovery trial.
    Trial {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value_t = AnchorArg::Tspectral)]
        anchor: AnchorArg,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 1e-5)]
        threshold: f64,
    },
    /// Run a grid of trials over n values and oversampling ratios.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Signal dimensions, comma separated (e.g. 20,50).
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Oversampling ratios m/n, comma separated (e.g. 2,4,6,8).
        #[arg(long, value_delimiter = ',', required = true)]
        ratios: Vec<f64>,
        /// Trials per grid cell.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = AnchorArg::Tspectral)]
        anchor: AnchorArg,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 1e-5)]
        threshold: f64,
        /// Where to write the JSON summary (defaults to <out>.summary.json).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Verify a concentration lemma empirically.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// 1 = isometry deviation, 2 = l1 lower bound, 3 = closed-form expectation.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        lemma: u8,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 5000)]
        m: usize,
        /// Independent ensembles for lemma 1.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Monte Carlo samples per angle for lemma 3.
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        /// Angles in units of pi for lemma 3, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0])]
        thetas: Vec<f64>,
        /// Bound parameter delta for lemma 2.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Random unit-pair probes for lemma 2.
        #[arg(long, default_value_t = 200)]
        probes: usize,
        /// Alternating-minimization rounds per probe for lemma 2.
        #[arg(long, default_value_t = 30)]
        minimizer_steps: usize,
    },
}

fn emit<T: serde::Serialize>(
    value: &T,
    csv: Option<String>,
    common: &CommonArgs,
) -> Result<(), Error> {
    match (&common.out, common.format) {
        (Some(path), Format::Csv) => {
            if let Some(csv) = csv {
                std::fs::write(path, csv)?;
            } else {
                write_json(value, path)?;
            }
        }
        (Some(path), Format::Json) => write_json(value, path)?,
        (None, Format::Csv) => {
            if let Some(csv) = csv {
                print!("{csv}");
            } else {
                println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
            }
        }
        (None, Format::Json) => {
            println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Trial { common, n, m, anchor, beta, threshold } => {
            let mut cfg = TrialConfig::new(n, m, anchor_spec(anchor, beta), common.seed);
            cfg.threshold = threshold;
            let record = run_trial(&cfg);
            emit(&record, Some(records_to_csv(std::slice::from_ref(&record))), &common)?;
            Ok(())
        }
        Command::Sweep { common, n, ratios, trials, anchor, beta, threshold, summary } => {
            let mut sw = SweepConfig::new(n, ratios, anchor_spec(anchor, beta), trials, common.seed);
            sw.threshold = threshold;
            sw.threads = common.threads;

            // fail on unwritable outputs before any compute
            if let Some(path) = &common.out {
                ensure_writable(path)?;
            }
            let summary_path = summary.or_else(|| {
                common.out.as_ref().map(|p| {
                    let mut s = p.as_os_str().to_owned();
                    s.push(".summary.json");
                    PathBuf::from(s)
                })
            });
            if let Some(path) = &summary_path {
                ensure_writable(path)?;
            }

            let result = run_sweep(&sw)?;
            match common.format {
                Format::Csv => {
                    if let Some(path) = &common.out {
                        write_records_csv(&result.records, path)?;
                    } else {
                        print!("{}", records_to_csv(&result.records));
                    }
                }
                Format::Json => {
                    if let Some(path) = &common.out {
                        write_json(&result.records, path)?;
                    } else {
                        println!("{}", serde_json::to_string_pretty(&result.records).expect("serializable"));
                    }
                }
            }
            if let Some(path) = &summary_path {
                write_json(&result.summary, path)?;
            } else {
                println!("{}", serde_json::to_string_pretty(&result.summary).expect("serializable"));
            }
            Ok(())
        }
        Command::Verify {
            common,
            lemma,
            n,
            m,
            seeds,
            trials,
            thetas,
            delta,
            probes,
            minimizer_steps,
        } => {
            let id = match lemma {
                1 => LemmaId::Isometry,
                2 => LemmaId::L1LowerBound,
                3 => LemmaId::Expectation,
                _ => unreachable!("range-checked by clap"),
            };
            let params = LemmaParams {
                n,
                m,
                seeds,
                trials,
                thetas: thetas.iter().map(|t| t * PI).collect(),
                delta,
                probes,
                minimizer_steps,
            };
            let report = verify_lemmas(id, &params, common.seed)?;
            emit(&report, None, &common)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(err)) => {
            eprintln!("io error: {err}");
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(4)
        }
    }
}
