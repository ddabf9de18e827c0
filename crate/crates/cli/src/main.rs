use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlt_cli::commands::{self, CommonArgs};
use mlt_cli::{CliError, CliResult};

/// Most-likely-trajectory dynamics of monitored bosonic chains.
#[derive(Parser)]
#[command(name = "mlt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Free chain: negativity scaling over sizes and the σ_pp decay profile.
    FreeBench(Flags),
    /// Sine-Gordon chain: most-likely trajectory against a QSD ensemble.
    SgDynamics(Flags),
    /// Analytic Sine-Gordon steady state and its correlation profiles.
    SgSteady(Flags),
    /// (γ/J, α) scan of the steady mass and negativity coefficient.
    PhaseDiagram(Flags),
    /// Perturbative vs self-consistent critical α against γ/J.
    CriticalLine(Flags),
    /// Negativity scaling of the Sine-Gordon steady state.
    NegativityScaling(Flags),
    /// Free chain: ensemble cosine decoherence against the most-likely trajectory.
    QsdCompare(Flags),
    /// Truncated-Fock validation of the Gaussian moment equations.
    Oracle(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML file with parameters; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for stochastic runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default out/<subcommand>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// KEY=VALUE parameter override, dotted keys for nested tables; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Flags {
    fn common(self) -> CommonArgs {
        CommonArgs { config: self.config, seed: self.seed, out: self.out, threads: self.threads, overrides: self.overrides }
    }
}

fn dispatch(cmd: Cmd) -> CliResult<PathBuf> {
    use commands::*;
    let (flags, go): (Flags, fn(&CommonArgs) -> CliResult<PathBuf>) = match cmd {
        Cmd::FreeBench(f) => (f, run::<free_bench::FreeBench>),
        Cmd::SgDynamics(f) => (f, run::<sg_dynamics::SgDynamics>),
        Cmd::SgSteady(f) => (f, run::<sg_steady::SgSteady>),
        Cmd::PhaseDiagram(f) => (f, run::<phase_diagram::PhaseDiagram>),
        Cmd::CriticalLine(f) => (f, run::<critical_line::CriticalLine>),
        Cmd::NegativityScaling(f) => (f, run::<negativity_scaling::NegativityScaling>),
        Cmd::QsdCompare(f) => (f, run::<qsd_compare::QsdCompare>),
        Cmd::Oracle(f) => (f, run::<oracle::Oracle>),
    };
    if let Some(n) = flags.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    go(&flags.common())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
