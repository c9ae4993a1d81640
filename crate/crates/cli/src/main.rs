use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dysonchain_cli::{load_scenario, run, shipped, verify_all, RunOptions, RunReport, Scenario, VerifyOptions, SHIPPED};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "dysonchain", version, about = "Dyson-map chains on a truncated Fock space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the Fock truncation of every scenario.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Override the time step of every scenario.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Artifacts go to `<out-dir>/<scenario>/`.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Skip writing artifacts.
    #[arg(long, global = true)]
    no_output: bool,
    /// Run independent scenarios on N workers.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files (or shipped scenario names).
    Run { scenarios: Vec<String> },
    /// Run the acceptance suite and print one line per criterion.
    Verify,
    /// List the shipped scenarios.
    ListScenarios,
}

fn resolve(arg: &str) -> anyhow::Result<Scenario> {
    let path = PathBuf::from(arg);
    if path.exists() {
        Ok(load_scenario(&path)?)
    } else {
        shipped(arg).with_context(|| format!("`{arg}` is neither a file nor a shipped scenario"))
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    let out_dir = (!cli.no_output).then(|| cli.out_dir.clone());
    match &cli.command {
        Command::ListScenarios => {
            for (name, src) in SHIPPED {
                let sc = Scenario::from_toml(src, name)?;
                let checks: Vec<String> = sc.checks.iter().map(|c| c.to_string()).collect();
                println!("{name:<22} {}", checks.join(", "));
            }
            Ok(true)
        }
        Command::Run { scenarios } => {
            if scenarios.is_empty() {
                anyhow::bail!("no scenario given");
            }
            let mut list = scenarios.iter().map(|s| resolve(s)).collect::<anyhow::Result<Vec<_>>>()?;
            for sc in &mut list {
                if let Some(d) = cli.dim {
                    sc.fock.dim = d;
                }
                if let Some(s) = cli.step {
                    sc.grid.step = s;
                }
                sc.validate()?;
            }
            let opts = RunOptions { out_dir };
            let go = |sc: &Scenario| run(sc, &opts);
            let reports: Vec<Result<RunReport, _>> = if cli.parallel > 1 {
                rayon::ThreadPoolBuilder::new().num_threads(cli.parallel).build()?.install(|| list.par_iter().map(go).collect())
            } else {
                list.iter().map(go).collect()
            };
            let mut ok = true;
            for r in reports {
                let r = r?;
                print!("{}", r.table());
                ok &= r.passed();
            }
            Ok(ok)
        }
        Command::Verify => {
            if cli.dim.is_some() || cli.step.is_some() {
                anyhow::bail!("--dim and --step do not apply to `verify`; its resolutions are fixed");
            }
            let v = verify_all(&VerifyOptions { out_dir, parallel: cli.parallel })?;
            print!("{}", v.table());
            Ok(v.passed())
        }
    }
}
