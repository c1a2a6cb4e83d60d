use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latinv_cli::commands::{self, Context, Outcome};
use latinv_cli::config::RunConfig;
use latinv_cli::CliError;

#[derive(Parser)]
#[command(name = "latinv", version, about = "Fixed-energy inverse scattering on the square lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON, or TOML by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Directory for cached Green tables.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    tol: Overrides,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    unitarity_tol: Option<f64>,
    #[arg(long, global = true)]
    symmetry_tol: Option<f64>,
    #[arg(long, global = true)]
    factorization_tol: Option<f64>,
    #[arg(long, global = true)]
    synth_tol: Option<f64>,
    #[arg(long, global = true)]
    consistency_tol: Option<f64>,
    #[arg(long, global = true)]
    green_defect_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering amplitude and S-matrix of the configured potential.
    Forward,
    /// Interior Dirichlet-to-Neumann map.
    Dnmap,
    /// Recover the potential from a D-N map file.
    InvertDn {
        #[arg(long)]
        input: PathBuf,
    },
    /// Recover the potential from an amplitude file written by `forward`.
    InvertSmatrix {
        #[arg(long)]
        input: PathBuf,
    },
    /// Tabulate the free resolvent kernel.
    Green,
    /// Sample the energy surface and its curvatures.
    Surface,
    /// Run the invariant suite.
    Selftest,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(&path)?;
    let t = &mut config.tolerances;
    let o = &cli.tol;
    for (slot, v) in [
        (&mut t.unitarity, o.unitarity_tol),
        (&mut t.symmetry, o.symmetry_tol),
        (&mut t.factorization, o.factorization_tol),
        (&mut t.synth, o.synth_tol),
        (&mut t.consistency, o.consistency_tol),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if o.green_defect_tol.is_some() {
        t.green_defect = o.green_defect_tol;
    }
    let ctx = Context {
        config,
        out: cli.out,
        cache: cli.cache,
    };
    match cli.command {
        Command::Forward => commands::forward(&ctx),
        Command::Dnmap => commands::dnmap(&ctx),
        Command::InvertDn { input } => commands::invert_dn(&ctx, &input),
        Command::InvertSmatrix { input } => commands::invert_smatrix(&ctx, &input),
        Command::Green => commands::green(&ctx),
        Command::Surface => commands::surface(&ctx),
        Command::Selftest => commands::selftest(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            for g in &outcome.gates {
                println!("{} {} = {:.3e} (tolerance {:.1e})", if g.passed { "PASS" } else { "FAIL" }, g.name, g.value, g.tolerance);
            }
            if let Some(c) = outcome.cache {
                eprintln!("green cache: {}", c.as_str());
            }
            let failed = outcome.failed();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                let e = CliError::GateFailed(failed);
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
