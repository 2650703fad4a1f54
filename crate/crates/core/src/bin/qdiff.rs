use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qdiffusion::experiment::{exit_code, run, Command, ExperimentConfig, EXIT_CONFIG, EXIT_OTHER, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "qdiff", version, about = "Dephased quantum transport in 1D chains")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// σ²(t) series with analytic overlays
    Spread(Common),
    /// D/D₀ against τ_W/τ_φ, with the reference curve
    Universal(Common),
    /// Steady-state current by master equation, transfer time and heuristic
    Current(Common),
    /// Forward-backward echo and purity decay
    Purity(Common),
    /// Kubo diffusion coefficient over a dephasing sweep
    Greenkubo(Common),
    /// Writes one Hamiltonian realization as (row, col, value) CSV
    DumpHamiltonian {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config
    config: PathBuf,
    /// Override a config key, e.g. `--set dynamics.n_traj=500`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`)
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Master seed (overrides `master_seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Also write gnuplot scripts
    #[arg(long)]
    gnuplot: bool,
    /// Worker threads; defaults to the available cores
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Spread(c) => (Command::Spread, c),
        Sub::Universal(c) => (Command::Universal, c),
        Sub::Current(c) => (Command::Current, c),
        Sub::Purity(c) => (Command::Purity, c),
        Sub::Greenkubo(c) => (Command::GreenKubo, c),
        Sub::DumpHamiltonian { common, realization } => (Command::DumpHamiltonian { realization }, common),
    };
    if let Some(w) = common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("qdiff: cannot start {w} workers: {e}");
            return ExitCode::from(EXIT_OTHER as u8);
        }
    }
    let mut overrides = common.overrides.clone();
    if let Some(dir) = &common.out {
        overrides.push(format!("output.dir={:?}", dir.display().to_string()));
    }
    if let Some(seed) = common.seed {
        overrides.push(format!("master_seed={seed}"));
    }
    if common.gnuplot {
        overrides.push("output.gnuplot=true".into());
    }
    let cfg = match ExperimentConfig::load(&common.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qdiff: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let outcome = run(command, &cfg);
    match &outcome {
        Ok(report) => {
            eprintln!(
                "qdiff {}: {} outputs in {}",
                command.name(),
                report.manifest.outputs.len(),
                cfg.output.dir.display()
            );
            if report.failed > 0 {
                eprintln!(
                    "qdiff: {} of {} points failed; see {}",
                    report.failed,
                    report.points,
                    cfg.output.dir.join("failures.log").display()
                );
            }
        }
        Err(e) => eprintln!("qdiff: {e}"),
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
