use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use droplet_core::error::Error;
use droplet_core::experiments::run::{output_dir, run_scenario, RunResults};
use droplet_core::experiments::scenario::{Scenario, ScenarioKind};

/// Source reconstruction from single-point traces after droplet injection.
#[derive(Parser)]
#[command(name = "droplet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report and data files.
    Run {
        config: PathBuf,
        /// Output directory (overrides the scenario and DROPLET_OUTPUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
    /// List scenario kinds and the scenario files in a directory.
    ListScenarios {
        #[arg(long, default_value = "configs")]
        dir: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Validate { config } => validate(&config),
        Command::ListScenarios { dir } => list(&dir),
    }
}

fn load(config: &Path) -> Result<Scenario, Error> {
    Scenario::load(config)
}

fn validate(config: &Path) -> ExitCode {
    let scenario = match load(config) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    match scenario.validate() {
        Ok(warnings) => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            println!("{}: ok ({})", config.display(), scenario.kind.as_str());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn run(config: &Path, out: Option<PathBuf>) -> ExitCode {
    let scenario = match load(config) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let dir = out.unwrap_or_else(|| output_dir(&scenario));
    let output = match run_scenario(&scenario, &dir) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    for w in &output.report.warnings {
        eprintln!("warning: {w}");
    }
    print_summary(&output.report.results);
    println!(
        "wrote {} files to {} in {:.1} s",
        output.report.outputs.len() + 1,
        output.dir.display(),
        output.timing.total
    );
    ExitCode::SUCCESS
}

fn print_summary(results: &RunResults) {
    match results {
        RunResults::EigensystemTable(r) => {
            println!("eigensystem residuals on {} points (N_r = {}, N_s = {})", r.points, r.n_r, r.n_s);
            for e in &r.residuals {
                println!("  l={} m={} j={}  err={:.3e}", e.l, e.m, e.j, e.err);
            }
        }
        RunResults::SpectralSums(r) => {
            for row in &r.rows {
                println!(
                    "  N={:3}  mass/4πa={:.6}  weighted={:.6} (gap {:.3}%)",
                    row.n,
                    row.mass_fraction,
                    row.weighted,
                    100.0 * row.weighted_relative_gap
                );
            }
        }
        RunResults::ForwardComparison(r) => {
            for run in &r.runs {
                println!(
                    "  a={:e}  arrival={:.4}  causal={}  max|W_LSE|={:.4e}",
                    run.radius, run.arrival_time, run.causality.passed, run.max_abs_lse
                );
                for c in &run.comparisons {
                    println!(
                        "    N={:2}  max|W_LSE - W_N|={:.4e}  relative={:.4e}",
                        c.n, c.max_error, c.relative_error
                    );
                }
            }
            for p in &r.pairs {
                println!(
                    "  a {:e} -> {:e}, N={}: error slope {:.3}, amplitude ratio {:.3}",
                    p.a_large, p.a_small, p.n, p.error_slope, p.amplitude_ratio
                );
            }
        }
        RunResults::SourceRecovery(r) => {
            println!(
                "  eps={} (n_t={}), lattice {:?}, derivative lattice {:?}",
                r.mollifier.epsilon, r.mollifier.n_t, r.lattice.dims, r.shrunk_lattice.dims
            );
            println!(
                "  noiseless: V {:.4}%  V_tt {:.4}%  J {:.4}%",
                r.noiseless.v, r.noiseless.v_tt, r.noiseless.source
            );
            for s in &r.seeds {
                println!(
                    "  seed {}: V {:.4}%  V_tt {:.4}%  J {:.4}%",
                    s.seed, s.errors.v, s.errors.v_tt, s.errors.source
                );
            }
            println!("  mean: V {:.4}%  V_tt {:.4}%  J {:.4}%", r.mean.v, r.mean.v_tt, r.mean.source);
        }
        RunResults::TruncationSweep(r) => {
            for row in &r.rows {
                println!("  N={:3}  error={:.4}%", row.n, row.error);
            }
            println!(
                "  best N = {}, predicted N = {} (delta = {:e})",
                r.best_n, r.prediction.n, r.delta
            );
        }
    }
}

fn list(dir: &Path) -> ExitCode {
    println!("scenario kinds:");
    for kind in ScenarioKind::ALL {
        println!("  {:20} {}", kind.as_str(), kind.summary());
    }
    let Ok(entries) = std::fs::read_dir(dir) else {
        println!("no scenario directory at {}", dir.display());
        return ExitCode::SUCCESS;
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    println!("scenarios in {}:", dir.display());
    for path in files {
        match Scenario::load(&path) {
            Ok(s) => println!(
                "  {:32} {:20} {}",
                path.display(),
                s.kind.as_str(),
                s.description.as_deref().unwrap_or("")
            ),
            Err(e) => println!("  {:32} unreadable: {e}", path.display()),
        }
    }
    ExitCode::SUCCESS
}
