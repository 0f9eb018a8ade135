use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use morsepack::complex;
use morsepack::harness::{
    generate_grid_complex, generate_signal, run_experiment, ExperimentSpec, GridSpec, SignalKind,
};
use morsepack::hodge::{hodge_basis, hodge_matching};
use morsepack::morse::reduce;
use morsepack::optimize::{run_pairings, Mode, OptimizerConfig};
use morsepack::{Matching, Signal};

/// Discrete Morse reductions of based chain complexes.
#[derive(Parser)]
#[command(name = "morsepack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a complex file and print its structural report.
    Validate { file: PathBuf },
    /// Reduce a complex along a Morse matching or its Hodge matching.
    Reduce {
        file: PathBuf,
        #[arg(long, conflicts_with = "hodge", required_unless_present = "hodge")]
        matching: Option<PathBuf>,
        #[arg(long)]
        hodge: bool,
        /// Write the reduced complex here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write Ψ, Φ and h as JSON.
        #[arg(long)]
        retraction: Option<PathBuf>,
    },
    /// Pick pairings that keep the reconstruction loss of a signal small.
    Optimize {
        file: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        /// Pair (n+1)-cells with n-cells.
        #[arg(short = 'n', long, default_value_t = 1)]
        degree: usize,
        #[arg(short = 'k', long)]
        steps: usize,
        #[arg(long, env = "MORSEPACK_SEED", default_value_t = 0)]
        seed: u64,
        /// Choose pairs uniformly at random instead.
        #[arg(long)]
        random: bool,
        /// Trajectory CSV path; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the reduced complex here.
        #[arg(long)]
        reduced: Option<PathBuf>,
    },
    /// Run an experiment spec and write its CSV and JSON outputs.
    Experiment {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a jittered grid complex and optionally a signal on its edges.
    Grid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        jitter_seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// uniform, normal, normal(mean,sd), height or radial.
        #[arg(long)]
        signal: Option<SignalKind>,
        #[arg(long, default_value_t = 0)]
        signal_seed: u64,
        #[arg(long, requires = "signal")]
        signal_output: Option<PathBuf>,
    },
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file } => {
            let c = complex::load_unchecked(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let report = c.validate();
            println!("{report}");
            if !report.ok {
                return Ok(ExitCode::FAILURE);
            }
            println!("dims: {:?}", c.dims());
            println!("betti: {:?}", c.betti_numbers());
        }
        Command::Reduce {
            file,
            matching,
            hodge,
            output,
            retraction,
        } => {
            let c = complex::load(&file).with_context(|| format!("reading {}", file.display()))?;
            let r = if hodge {
                let basis = hodge_basis(&c)?;
                let hm = hodge_matching(&c, &basis)?;
                eprintln!("boundary residual: {:e}", hm.boundary_residual);
                hm.retraction
            } else {
                let Some(path) = matching else {
                    bail!("either --matching or --hodge is required");
                };
                let m = Matching::load(&c, &path)
                    .with_context(|| format!("reading {}", path.display()))?;
                reduce(&c, &m)?
            };
            eprintln!("reduced dims: {:?}", r.reduced.dims());
            eprintln!("max residual: {:e}", r.residuals().max());
            write_or_print(output.as_deref(), &r.reduced.to_json_string())?;
            if let Some(p) = retraction {
                write_or_print(Some(&p), &serde_json::to_string_pretty(&r.to_file())?)?;
            }
        }
        Command::Optimize {
            file,
            signal,
            degree,
            steps,
            seed,
            random,
            output,
            reduced,
        } => {
            let c = complex::load(&file).with_context(|| format!("reading {}", file.display()))?;
            let s = Signal::load(&c, &signal)
                .with_context(|| format!("reading {}", signal.display()))?;
            let config = OptimizerConfig {
                mode: if random { Mode::Random } else { Mode::Optimal },
                ..OptimizerConfig::new(degree, steps, seed)
            };
            let run = run_pairings(&c, &[s], &config)?;
            if run.stopped_early {
                eprintln!("stopped after {} steps: no admissible pair left", run.trajectory.len());
            }
            let mut buf = Vec::new();
            run.write_csv(&mut buf)?;
            write_or_print(output.as_deref(), std::str::from_utf8(&buf)?)?;
            if let Some(p) = reduced {
                write_or_print(Some(&p), &run.reduced.to_json_string())?;
            }
        }
        Command::Experiment { spec, output } => {
            let spec = ExperimentSpec::load(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let report = run_experiment(&spec)?;
            report
                .write_to(&output)
                .with_context(|| format!("writing {}", output.display()))?;
            for m in &report.modes {
                if let Some(last) = m.terminal_mean() {
                    println!(
                        "{:?}: {} steps, terminal mean loss {last:.6}",
                        m.mode,
                        m.mean.len()
                    );
                }
            }
            println!("wall time: {:.3}s", report.wall_time_secs);
        }
        Command::Grid {
            rows,
            cols,
            jitter_seed,
            output,
            signal,
            signal_seed,
            signal_output,
        } => {
            let grid = generate_grid_complex(&GridSpec::new(rows, cols, jitter_seed))?;
            complex::save(&grid.complex, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            if let Some(kind) = signal {
                let s = generate_signal(&grid.complex, Some(&grid.coords), kind, signal_seed)?;
                match signal_output {
                    Some(p) => s.save(&grid.complex, &p)?,
                    None => bail!("--signal needs --signal-output"),
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
