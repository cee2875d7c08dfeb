use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlch_core::harness::{run_experiment, Experiment, HarnessError, OutDir, RunConfig};
use nlch_core::mesh::build_disk_mesh;

/// Numerical experiments for the nonlocal Cahn-Hilliard equation with
/// nonlocal dynamic boundary conditions on the unit disk.
///
/// Exit codes: 0 all checks passed, 1 a property check failed,
/// 2 configuration or assumption error, 3 solver or IO failure.
#[derive(Parser)]
#[command(name = "nlch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; missing keys take the subcommand's defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run even if the kernel/potential assumptions fail.
    #[arg(long, global = true)]
    unsafe_skip_validation: bool,
    /// Also write the mesh as `mesh.txt` into the output directory.
    #[arg(long, global = true)]
    dump_mesh: bool,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Single trajectory: mass, energy and separation diagnostics.
    Simulate,
    /// Exponential fit of the energy decay for two equal-mass initial data.
    Dissipative,
    /// Convergence to the L = 0 problem as the kinetic coefficient vanishes.
    LLimit,
    /// Continuous dependence and time regularity in the dual norm.
    ContDep,
    /// Long-time convergence to a steady state.
    Equilibrium,
    /// Yosida-regularized runs against the singular scheme.
    YosidaSweep,
    /// Assumption gate, kernel constants, elliptic solver and trace checks.
    Validate,
    /// Steady-state solve with averaging, separation and gradient checks.
    Steady,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Experiment::Simulate,
            Command::Dissipative => Experiment::Dissipative,
            Command::LLimit => Experiment::LLimit,
            Command::ContDep => Experiment::ContDep,
            Command::Equilibrium => Experiment::Equilibrium,
            Command::YosidaSweep => Experiment::YosidaSweep,
            Command::Validate => Experiment::Validate,
            Command::Steady => Experiment::Steady,
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, HarnessError> {
    let experiment = Experiment::from(cli.command);
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path, Some(experiment))?,
        None => RunConfig::defaults(experiment),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.common.out {
        cfg.out_dir = out.display().to_string();
    }
    cfg.check_ranges()?;
    if cli.common.print_config {
        print!("{}", cfg.emit());
        return Ok(0);
    }
    let out = OutDir::create(&cfg.out_dir)?;
    if cli.common.dump_mesh {
        out.write("mesh.txt", &build_disk_mesh(cfg.mesh_level).dump())?;
    }
    let report = run_experiment(&cfg, cli.common.unsafe_skip_validation, Some(&out))?;
    print!("{}", report.render());
    if !report.gate_failures.is_empty() && !cli.common.unsafe_skip_validation {
        return Err(HarnessError::Validation(report.gate_failures));
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("nlch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
