use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drumsep::evaluation::OutputKind;
use drumsep::io::{self, RunConfig};
use drumsep::nmfd::NmfdCaseId;
use drumsep::pipeline::{self, EvalInput};
use drumsep::Error;

#[derive(Parser)]
#[command(name = "drumsep", version, about = "Drum source separation toolkit")]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set solver.lr=1e-2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render stems and a mixture from a bank and a transcription.
    Render {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        transcription: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Track length in seconds; defaults to one second past the last onset.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic dataset of annotated tracks.
    Generate {
        #[arg(long, num_args = 1.., required = true)]
        banks: Vec<PathBuf>,
        #[arg(long)]
        tracks: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Separate a mixture into per-class stems.
    #[command(subcommand)]
    Separate(Separate),
    /// Class-agnostic onset detection.
    DetectOnsets {
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score estimated stems against references.
    Evaluate(EvaluateArgs),
    /// Write procedural one-shot kits.
    SynthBank {
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Separate {
    /// Transcription-informed NMFD followed by masking.
    Nmfd {
        #[arg(long, value_parser = parse_case)]
        case: Option<NmfdCaseId>,
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long)]
        transcription: PathBuf,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analysis-by-synthesis followed by masking.
    Abs {
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long)]
        transcription: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    /// Reference stem directory; repeat for several tracks.
    #[arg(long, required = true)]
    refs: Vec<PathBuf>,
    /// Estimated stem directory, paired with `--refs` by position.
    #[arg(long, required = true)]
    ests: Vec<PathBuf>,
    /// Reference transcription, paired with `--refs` by position.
    #[arg(long, required = true)]
    transcription: Vec<PathBuf>,
    #[arg(long, value_parser = ["9", "5"])]
    grouping: Option<String>,
    #[arg(long, value_enum, default_value_t = Kind::Masked)]
    kind: Kind,
    /// Estimated onsets (per-class or `unknown`) to score against the reference.
    #[arg(long)]
    onsets: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Masked,
    Synthesis,
}

fn parse_case(s: &str) -> Result<NmfdCaseId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure reported as `error: <kind>: <message>`.
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for assignment in &cli.overrides {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_overrides(mut cfg: RunConfig, pairs: &[(&str, Option<String>)]) -> Result<RunConfig, Error> {
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Render {
            bank,
            transcription,
            out,
            duration,
            seed,
        } => {
            let cfg = with_overrides(cfg, &[("seed", seed.map(|s| s.to_string()))])?;
            let bank = io::read_bank(&bank)?;
            let t = io::read_transcription(&transcription)?;
            pipeline::render_track(&bank, &t, duration, &cfg, &out)?;
        }
        Command::Generate {
            banks,
            tracks,
            seed,
            duration,
            out,
        } => {
            let cfg = with_overrides(cfg, &[("seed", seed.map(|s| s.to_string()))])?;
            let banks = banks.iter().map(io::read_bank).collect::<Result<Vec<_>, _>>()?;
            pipeline::generate(&banks, tracks, duration, &cfg, &out)?;
        }
        Command::Separate(Separate::Nmfd {
            case,
            mixture,
            transcription,
            bank,
            out,
        }) => {
            let cfg = with_overrides(cfg, &[("nmfd.case", case.map(|c| c.to_string()))])?;
            if cfg.nmfd_case().needs_bank() && bank.is_none() {
                return Err(Failure::Usage(format!("case {} requires --bank", cfg.nmfd_case)));
            }
            let bank = bank.as_deref().map(io::read_bank).transpose()?;
            let x = io::read_wav(&mixture)?;
            let t = io::read_transcription(&transcription)?;
            pipeline::separate_nmfd(&x, &t, bank.as_ref(), &cfg, &out)?;
        }
        Command::Separate(Separate::Abs {
            mixture,
            transcription,
            out,
            steps,
            seed,
        }) => {
            let cfg = with_overrides(
                cfg,
                &[
                    ("solver.steps", steps.map(|s| s.to_string())),
                    ("seed", seed.map(|s| s.to_string())),
                ],
            )?;
            let x = io::read_wav(&mixture)?;
            let t = io::read_transcription(&transcription)?;
            let solution = pipeline::separate_abs(&x, &t, &cfg, &out)?;
            if let (Some(first), Some(last)) = (solution.loss_trace.first(), solution.loss_trace.last()) {
                log::info!("abs loss {first:.6e} -> {last:.6e}");
            }
        }
        Command::DetectOnsets { mixture, out } => {
            let x = io::read_wav(&mixture)?;
            io::write_onset_times(&pipeline::detect_onsets(&x), &out)?;
        }
        Command::Evaluate(args) => {
            let cfg = with_overrides(cfg, &[("eval.grouping", args.grouping.clone())])?;
            if args.refs.len() != args.ests.len() || args.refs.len() != args.transcription.len() {
                return Err(Failure::Usage(format!(
                    "--refs, --ests and --transcription must be repeated equally often ({}, {}, {})",
                    args.refs.len(),
                    args.ests.len(),
                    args.transcription.len()
                )));
            }
            let inputs: Vec<EvalInput> = args
                .refs
                .iter()
                .zip(&args.ests)
                .zip(&args.transcription)
                .map(|((r, e), t)| EvalInput {
                    refs: r.clone(),
                    ests: e.clone(),
                    transcription: t.clone(),
                })
                .collect();
            let kind = match args.kind {
                Kind::Masked => OutputKind::Masked,
                Kind::Synthesis => OutputKind::Synthesis,
            };
            pipeline::evaluate(&inputs, kind, args.onsets.as_deref(), &cfg, &args.out)?;
        }
        Command::SynthBank { count, seed, out } => {
            pipeline::synth_banks(count, seed.unwrap_or(cfg.seed), &out)?;
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: usage: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
