use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cho_core::harness::{self, RunConfig};
use cho_core::Error;

#[derive(Parser)]
#[command(name = "cho", version, about = "Cahn-Hilliard-Oono simulation and optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve: diagnostics.csv and snapshots.cho.
    Simulate(Common),
    /// Projected-gradient optimal control: history.csv, control.cho, summary.json.
    Optimize(Common),
    /// Run registry checks: verify.csv.
    Verify(Common),
    /// Galerkin oracle against the spectral solver: oracle.csv.
    OracleCompare(Common),
    /// List the built-in presets and verification checks.
    List,
}

#[derive(Args)]
struct Common {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (see `cho list`).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    override_compatibility: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => {
                let text = harness::preset(name)
                    .ok_or_else(|| Error::Validation(format!("unknown preset `{name}`; see `cho list`")))?;
                RunConfig::from_toml_str(text)?
            }
            (None, None) => unreachable!("clap requires one of --config and --preset"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.override_compatibility |= self.override_compatibility;
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.map(RunConfig::output_dir))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Validation(_) | Error::Incompatible(_) => 2,
        _ => 1,
    }
}

fn execute(command: &Command, common: &Common) -> Result<bool, Error> {
    let cfg = common.load()?;
    let out = common.out_dir(Some(&cfg));
    match command {
        Command::Simulate(_) => {
            let traj = harness::run_simulate(&cfg, &out)?;
            let last = traj.diagnostics.last().expect("initial diagnostics");
            println!(
                "simulated {} steps; final mean {:.6e}, energy {:.6e}; output in {}",
                traj.phi.len() - 1,
                last.mean,
                last.energy,
                out.display()
            );
            Ok(true)
        }
        Command::Optimize(_) => {
            let result = harness::run_optimize(&cfg, &out)?;
            let last = result.history.last().expect("initial iterate");
            println!(
                "{} after {} iterations; J = {:.6e}, stationarity = {:.3e}; output in {}",
                result.status.as_str(),
                last.iter,
                result.evaluation.j,
                last.stationarity,
                out.display()
            );
            Ok(true)
        }
        Command::Verify(_) => {
            let rows = harness::run_verify(&cfg, &out)?;
            for r in &rows {
                println!(
                    "{:<5} {:<40} value={:.3e} threshold={:.3e}  {}",
                    if r.outcome.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.outcome.value,
                    r.outcome.threshold,
                    r.outcome.detail
                );
            }
            let failed = rows.iter().filter(|r| !r.outcome.pass).count();
            println!("{} of {} checks passed", rows.len() - failed, rows.len());
            Ok(failed == 0)
        }
        Command::OracleCompare(_) => {
            let report = harness::run_oracle_compare(&cfg, &out)?;
            println!(
                "max relative error: phi {:.3e}, mu {:.3e}; output in {}",
                report.max_phi_error,
                report.max_mu_error,
                out.display()
            );
            Ok(true)
        }
        Command::List => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::List => {
            println!("presets:");
            for (name, _) in harness::PRESETS {
                println!("  {name}");
            }
            println!("checks:");
            for c in harness::REGISTRY {
                println!("  {:<40} {}", c.name, c.summary);
            }
            return ExitCode::SUCCESS;
        }
        Command::Simulate(c) | Command::Optimize(c) | Command::Verify(c) | Command::OracleCompare(c) => c,
    };
    match execute(&cli.command, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            let out = common.out_dir(None);
            if let Err(e) = harness::write_failure(&out, &err) {
                eprintln!("could not write failure record: {e}");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
