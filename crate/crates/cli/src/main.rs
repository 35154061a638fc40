// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use embodied_cli::{load_validated_bundle, run, GridFormat, Overrides};

/// Probabilistic embodied-carbon scenarios.
#[derive(Parser)]
#[command(name = "embodied", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write summary.json, run.json and grids.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Grid points for fitted and exported densities.
        #[arg(long)]
        grid: Option<usize>,
        /// Output directory (default: scenario `out`, else ./out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra quantiles; 0.5 and 0.95 are always reported.
        #[arg(long, value_delimiter = ',')]
        quantiles: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = GridFormat::Csv)]
        format: GridFormat,
        /// Worker threads. Outputs do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Load and validate a dataset bundle.
    Validate { bundle: PathBuf },
    /// List the technology nodes in a bundle.
    ListNodes { bundle: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            samples,
            grid,
            out,
            quantiles,
            format,
            threads,
        } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            let overrides = Overrides {
                seed,
                samples,
                grid,
                out,
                quantiles,
                format,
            };
            run(&scenario, &overrides).map(|a| {
                println!("wrote {} files to {}", a.files.len(), a.out_dir.display());
            })
        }
        Command::Validate { bundle } => load_validated_bundle(&bundle).map(|b| {
            println!(
                "ok: bundle {} with {} nodes, {} regions, {} utilization sets",
                b.version,
                b.nodes.len(),
                b.ci_histories.len(),
                b.utilization_sets.len()
            );
        }),
        Command::ListNodes { bundle } => load_validated_bundle(&bundle).map(|b| {
            println!("node\tmass_production\tepa_base_kwh_cm2\tregions");
            for (name, n) in &b.nodes {
                let regions: Vec<String> = n
                    .capacity_shares
                    .iter()
                    .map(|(r, s)| format!("{r}:{s}"))
                    .collect();
                println!(
                    "{name}\t{}\t{}\t{}",
                    n.mass_production_year,
                    n.epa_base,
                    regions.join(",")
                );
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
