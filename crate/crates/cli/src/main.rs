use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qlayer_cli::catalog::{catalog_rows, render};
use qlayer_cli::pipeline::run_scenario;
use qlayer_cli::scenario::Scenario;
use qlayer_cli::verify::verify;

const GRANTED: u8 = 0;
const ERROR: u8 = 1;
const DENIED: u8 = 3;

#[derive(Parser)]
#[command(name = "qlayer", version, about = "Bound states of thin layers over complete hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its JSON report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for CSV curve dumps.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, env = "QLAYER_THREADS")]
        threads: Option<usize>,
    },
    /// List the catalog surfaces.
    Catalog,
    /// Reproduce a closed-form example: lemma51, example41, example-s1xr2, hartman or corollary15.
    Verify { id: String },
}

fn run(scenario: PathBuf, out: PathBuf, csv: Option<PathBuf>, threads: Option<usize>) -> Result<u8, String> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let scenario = Scenario::from_path(&scenario).map_err(|e| format!("{}: {e}", scenario.display()))?;
    let report = run_scenario(&scenario).map_err(|e| e.to_string())?;
    std::fs::write(&out, report.to_json()).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    if let Some(dir) = csv {
        report.write_csv(&dir).map_err(|e| format!("cannot write CSV to {}: {e}", dir.display()))?;
    }
    let c = &report.certificate;
    println!("certificate {}", if c.granted { "granted" } else { "denied" });
    for f in &c.findings {
        println!("  {f}");
    }
    Ok(if c.granted { GRANTED } else { DENIED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, csv, threads } => run(scenario, out, csv, threads),
        Command::Catalog => {
            print!("{}", render(&catalog_rows()));
            Ok(GRANTED)
        }
        Command::Verify { id } => verify(&id).map_err(|e| e.to_string()).map(|r| {
            print!("{}", r.lines());
            if r.passed { GRANTED } else { DENIED }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ERROR)
        }
    }
}
