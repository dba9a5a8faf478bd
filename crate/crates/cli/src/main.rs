//! `otm`: run simulations, audit snapshots and compare them in Wasserstein distance.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otm_core::config::parse_config;
use otm_core::io::read_snapshot;
use otm_core::oracle::{wasserstein2, DiscreteMeasure};
use otm_core::solver::run;
use otm_core::MaterialPointSet;

/// Output directory override; the `--out` flag takes precedence.
const OUTPUT_ENV: &str = "OTM_OUTPUT_DIR";

const USAGE_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "otm", version, about = "Optimal-transport meshfree advection-diffusion solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides OTM_OUTPUT_DIR and `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the invariants of a snapshot file.
    Check {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Squared 2-Wasserstein cost between the particle measures of two snapshots.
    Wdist {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Stratified subsample size used when a snapshot has more particles.
        #[arg(long, default_value_t = 500)]
        subsample: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(USAGE_ERROR);
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Check { snapshot } => cmd_check(&snapshot),
        Command::Wdist { a, b, subsample } => cmd_wdist(&a, &b, subsample),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: USAGE_ERROR,
        message: message.into(),
    }
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure {
        code: RUNTIME_ERROR,
        message: message.into(),
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let dir = out
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| config.output_dir.clone());
    eprintln!("running {} into {}", path.display(), dir.display());
    match run(&config, Some(&dir)) {
        Ok(history) => {
            if let Some(last) = history.rows.last() {
                println!(
                    "step {} t={:?} mass={:?} mean_density={:?} volume={:?} max_radius={:?} rebuilds={}",
                    last.step, last.time, last.mass, last.mean_density, last.volume, last.max_radius, last.rebuilds
                );
            }
            Ok(())
        }
        Err(failure) => Err(runtime(format!(
            "{failure} (partial history in {})",
            dir.join("history.csv").display()
        ))),
    }
}

/// Everything wrong with a snapshot's material points, one line each.
fn audit(mps: &MaterialPointSet) -> Vec<String> {
    let mut issues = Vec::new();
    for p in 0..mps.len() {
        let x = mps.positions()[p];
        let (m, v, rho) = (mps.masses()[p], mps.volumes()[p], mps.densities()[p]);
        if !x.iter().all(|c| c.is_finite()) {
            issues.push(format!("material point {p}: non-finite position {:?}", [x.x, x.y, x.z]));
        }
        if !(m > 0.0 && m.is_finite()) {
            issues.push(format!("material point {p}: nonpositive mass {m:e}"));
        }
        if !(v > 0.0 && v.is_finite()) {
            issues.push(format!("material point {p}: nonpositive volume {v:e}"));
        } else if m > 0.0 && ((rho * v - m) / m).abs() > 1e-12 {
            issues.push(format!(
                "material point {p}: density {rho:e} times volume {v:e} differs from mass {m:e}"
            ));
        }
    }
    issues
}

fn cmd_check(path: &Path) -> Result<(), Failure> {
    let (nodes, mps, time) = read_snapshot(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    eprintln!("notice: partition of unity depends on the shape functions and cannot be checked from a snapshot; skipped");
    let mut issues = audit(&mps);
    if let Some(a) = nodes.positions.iter().position(|x| !x.iter().all(|c| c.is_finite())) {
        issues.push(format!("node {a}: non-finite position"));
    }
    if mps.is_empty() {
        issues.push("snapshot has no material points".into());
    }
    if issues.is_empty() {
        println!(
            "ok: t={time:?}, {} nodes, {} material points, mass={:?}, volume={:?}",
            nodes.len(),
            mps.len(),
            mps.total_mass(),
            mps.total_volume()
        );
        return Ok(());
    }
    for issue in issues.iter().take(20) {
        eprintln!("{issue}");
    }
    if issues.len() > 20 {
        eprintln!("... and {} more", issues.len() - 20);
    }
    Err(runtime(format!("{}: {} invariant violation(s)", path.display(), issues.len())))
}

fn load_measure(path: &Path, subsample: usize) -> Result<DiscreteMeasure, Failure> {
    let (_, mps, _) = read_snapshot(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let measure = DiscreteMeasure::from_particles(&mps).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    if measure.len() > subsample {
        eprintln!(
            "{}: subsampling {} particles to {subsample}",
            path.display(),
            measure.len()
        );
        return Ok(measure.subsample(subsample));
    }
    Ok(measure)
}

fn cmd_wdist(a: &Path, b: &Path, subsample: usize) -> Result<(), Failure> {
    if subsample == 0 {
        return Err(usage("--subsample must be at least 1"));
    }
    let ma = load_measure(a, subsample)?;
    let mb = load_measure(b, subsample)?;
    let (w2, _) = wasserstein2(&ma, &mb).map_err(|e| runtime(e.to_string()))?;
    println!("{w2:?}");
    Ok(())
}
