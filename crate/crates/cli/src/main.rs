//! `orloj` command-line entry point.
//!
//! Settings come from a flat JSON config file (`--config`); command-line
//! flags override the file, which overrides built-in defaults.

use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use orloj::experiment::{self, ExperimentConfig};
use orloj::Error;

#[derive(Parser, Debug)]
#[command(
    name = "orloj",
    version,
    about = "Distribution-aware batch scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate workload traces (one per repeat seed).
    Gen(Common),
    /// Compare policies across SLO multiples.
    Run(Common),
    /// Sweep the score parameter b for Orloj.
    SweepB(Common),
    /// Micro-benchmark the priority queue at increasing sizes.
    BenchQueue {
        #[command(flatten)]
        common: Common,
        /// Queue sizes (repeatable; defaults to the config's bench sizes).
        #[arg(long = "size")]
        sizes: Vec<usize>,
    },
    /// Measure scheduler decision cost against shrinking execution times.
    Overhead(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Policy to run (repeatable).
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// SLO as a multiple of the P99 execution time (repeatable).
    #[arg(long = "slo-multiple")]
    slo_multiples: Vec<f64>,
    #[arg(long)]
    repeats: Option<usize>,
}

impl Common {
    fn resolve(&self) -> orloj::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            c.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if !self.policies.is_empty() {
            c.policies = self.policies.clone();
        }
        if !self.slo_multiples.is_empty() {
            c.slo_multiples = self.slo_multiples.clone();
        }
        if let Some(r) = self.repeats {
            c.repeats = r;
        }
        c.validate()?;
        Ok(c)
    }
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match cmd {
        Command::Gen(common) => {
            let c = common.resolve()?;
            for path in experiment::cmd_gen(&c)? {
                writeln!(out, "{}", path.display())?;
            }
        }
        Command::Run(common) => {
            let c = common.resolve()?;
            let rows = experiment::cmd_run(&c)?;
            let path = c.out_dir.join("run.csv");
            experiment::write_csv(&path, &rows)?;
            for r in rows.iter().filter(|r| r.kind == "aggregate") {
                writeln!(
                    out,
                    "{:<16} slo {:>4}x  finish {:.4} (std {:.4})",
                    r.policy,
                    r.slo_multiple,
                    r.finish_rate,
                    r.finish_rate_std.unwrap_or(0.0)
                )?;
            }
            writeln!(out, "{}", path.display())?;
        }
        Command::SweepB(common) => {
            let c = common.resolve()?;
            let (rows, spread) = experiment::cmd_sweep_b(&c)?;
            let path = c.out_dir.join("sweep_b.csv");
            experiment::write_csv(&path, &rows)?;
            let spread_path = c.out_dir.join("sweep_b_spread.csv");
            experiment::write_csv(&spread_path, &spread)?;
            for s in &spread {
                writeln!(out, "slo {:>4}x  spread {:.4}", s.slo_multiple, s.spread)?;
            }
            writeln!(out, "{}\n{}", path.display(), spread_path.display())?;
        }
        Command::BenchQueue { common, sizes } => {
            let c = common.resolve()?;
            let sizes = if sizes.is_empty() {
                c.bench_sizes.clone()
            } else {
                sizes
            };
            let rows = experiment::cmd_bench_queue(&c, &sizes)?;
            let path = c.out_dir.join("bench_queue.csv");
            experiment::write_csv(&path, &rows)?;
            for r in &rows {
                writeln!(
                    out,
                    "n {:>6}  insert {:>10.0} ns  query {:>8.0} ns",
                    r.n, r.insert_mean_ns, r.query_mean_ns
                )?;
            }
            writeln!(out, "{}", path.display())?;
        }
        Command::Overhead(common) => {
            let c = common.resolve()?;
            let rows = experiment::cmd_overhead(&c)?;
            let path = c.out_dir.join("overhead.csv");
            experiment::write_csv(&path, &rows)?;
            writeln!(out, "{}", path.display())?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_)) => 1,
        Some(Error::Invariant(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORLOJ_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command).context("orloj failed") {
        Ok(()) => ExitCode::SUCCESS,
        // output piped into a reader that stopped early
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
