//! Command-line front end (`hexqg forward|invert|check|plot`).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::dataset::{run_forward, Dataset};
use crate::error::{Error, Result};
use crate::inverse::oracle::{DNOracle, LiveOracle};
use crate::inverse::plan::plan_support;
use crate::inverse::reconstruct::{reconstruct_partial, ReconstructConfig};
use crate::report::{build_report, emit_plots, emit_report, load_report, Format, Report};
use crate::scenario::{load_scenario, Scenario};
use crate::vertex::{generate_grid, GridSpec};

#[derive(Debug, Parser)]
#[command(name = "hexqg", version, about = "Forward and inverse spectral problems on the hexagonal quantum graph")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Margin on cos√λ around the exceptional values.
    #[arg(long)]
    pub tol_t: Option<f64>,
    /// Margin in λ around edge Dirichlet eigenvalues.
    #[arg(long)]
    pub tol_edge: Option<f64>,
    /// Condition-number threshold for interior eigenvalues.
    #[arg(long)]
    pub tol_cond: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the D-N dataset of a scenario.
    Forward {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// λ grid `a:b:n` replacing the scenario's.
        #[arg(long)]
        lambda_grid: Option<GridSpec>,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct the support potentials from a dataset, or live from a scenario.
    Invert {
        input: PathBuf,
        /// Treat the input as a scenario and solve forward problems on demand.
        #[arg(long)]
        live: bool,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated report formats (json is always written).
        #[arg(long, default_value = "json,csv,svg", value_delimiter = ',')]
        formats: Vec<String>,
        /// Residual tolerance of the descent systems.
        #[arg(long)]
        tol_descent: Option<f64>,
        /// Root tolerance in √λ for live refinement.
        #[arg(long)]
        tol_root: Option<f64>,
        /// Largest eigenvalue misfit accepted by the potential fit.
        #[arg(long)]
        tol_mismatch: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a scenario and lint its λ grid and support.
    Check {
        scenario: PathBuf,
        #[arg(long)]
        lambda_grid: Option<GridSpec>,
        #[command(flatten)]
        common: Common,
    },
    /// Render SVG plots of a report (`report.json` or its directory).
    Plot {
        report: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn apply_common(sc: &mut Scenario, c: &Common) -> Result<()> {
    if let Some(s) = c.seed {
        sc.seed = s;
    }
    if let Some(t) = c.tol_t {
        sc.lambda_policy.tol_t = t;
    }
    if let Some(t) = c.tol_edge {
        sc.lambda_policy.tol_edge = t;
    }
    if let Some(t) = c.tol_cond {
        sc.lambda_policy.cond_max = t;
    }
    sc.validate()
}

fn init_threads(c: &Common) -> Result<()> {
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be >= 1".into()));
        }
        // a second call in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Run a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Forward {
            scenario,
            output,
            lambda_grid,
            common,
        } => {
            init_threads(&common)?;
            let mut sc = load_scenario(&scenario)?;
            apply_common(&mut sc, &common)?;
            let tol = sc.lambda_policy.tolerances();
            let ds = run_forward(&sc, lambda_grid, Some(tol))?;
            ds.save(&output)?;
            println!(
                "wrote {} records ({} skipped) to {}",
                ds.records.len(),
                ds.header.skipped.len(),
                output.display()
            );
            Ok(0)
        }
        Command::Invert {
            input,
            live,
            output,
            formats,
            tol_descent,
            tol_root,
            tol_mismatch,
            common,
        } => {
            init_threads(&common)?;
            let formats = formats.iter().map(|f| f.parse()).collect::<Result<Vec<Format>>>()?;
            let (mut sc, dataset) = if live {
                (load_scenario(&input)?, None)
            } else {
                let ds = Dataset::load(&input)?;
                (ds.header.scenario.clone(), Some(ds))
            };
            if dataset.is_some() && (common.seed.is_some() || common.tol_t.is_some() || common.tol_edge.is_some()) {
                return Err(Error::Validation(
                    "--seed/--tol-t/--tol-edge would change the scenario a dataset was generated from".into(),
                ));
            }
            apply_common(&mut sc, &common)?;
            if let Some(inv) = sc.inverse.as_mut() {
                if let Some(t) = tol_descent {
                    inv.tolerances.descent = t;
                }
                if let Some(t) = tol_root {
                    inv.tolerances.root = t;
                }
                if let Some(t) = tol_mismatch {
                    inv.tolerances.mismatch = t;
                }
            }
            sc.validate()?;
            let cfg: ReconstructConfig = sc
                .reconstruct_config()?
                .ok_or_else(|| Error::Validation("scenario has no inverse section".into()))?;
            let (oracle, mode): (Box<dyn DNOracle>, &str) = match &dataset {
                Some(ds) => (Box::new(ds.oracle()?), "dataset"),
                None => (
                    Box::new(LiveOracle::new(sc.domain.n as usize, sc.potential_map()?)),
                    "live",
                ),
            };
            let outcome = reconstruct_partial(oracle.as_ref(), &cfg)?;
            let report = build_report(&sc, &outcome, mode)?;
            let files = emit_report(&report, &output, &formats)?;
            print_summary(&report);
            for f in files {
                info!("wrote {}", f.display());
            }
            match outcome.error {
                Some(e) => {
                    eprintln!("error: {e}");
                    Ok(e.exit_code())
                }
                None => Ok(0),
            }
        }
        Command::Check {
            scenario,
            lambda_grid,
            common,
        } => {
            init_threads(&common)?;
            let mut sc = load_scenario(&scenario)?;
            apply_common(&mut sc, &common)?;
            check(&sc, lambda_grid)
        }
        Command::Plot { report, output } => {
            let path = if report.is_dir() { report.join("report.json") } else { report };
            let r = load_report(&path)?;
            let dir = output.unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
            for f in emit_plots(&r, &dir)? {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
    }
}

fn print_summary(r: &Report) {
    println!("scenario {} ({} mode), {} edge(s) recovered", &r.scenario_hash[..12], r.mode, r.edges.len());
    for e in &r.edges {
        let err = e.max_error.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into());
        println!("  {}  stage {}  modes {:?}  max error {err}", e.edge, e.stage, e.recovered);
    }
    for n in &r.diagnostics.notes {
        println!("note: {n}");
    }
}

fn check(sc: &Scenario, grid: Option<GridSpec>) -> Result<i32> {
    let domain = sc.domain()?;
    let pm = sc.potential_map()?;
    println!(
        "domain N = {} at {}: {} interior vertices, {} boundary vertices, {} edges",
        sc.domain.n,
        domain.frame(),
        domain.interior().len(),
        domain.boundary().len(),
        domain.edges().len()
    );
    println!("perturbed edges: {}", pm.perturbed().len());
    let grid = match grid {
        Some(g) => g,
        None => sc.lambda_policy.grid()?,
    };
    let rep = generate_grid(&grid, &pm, &domain, &sc.lambda_policy.tolerances())?;
    println!("lambda grid: {} admissible, {} rejected", rep.accepted.len(), rep.rejected.len());
    for (l, why) in &rep.rejected {
        println!("  skip {l}: {why}");
    }
    for w in sc.warnings()? {
        println!("warning: {w}");
    }
    if let Some(cfg) = sc.reconstruct_config()? {
        let support = cfg.support.resolve(&domain)?;
        let plan = plan_support(cfg.n, cfg.base, &support)?;
        println!(
            "support: {} edge(s), resolvable in {} stage(s) using {} placement(s)",
            support.len(),
            plan.stages.len(),
            plan.frames().len()
        );
    }
    if rep.accepted.is_empty() {
        return Err(Error::EmptyDataset);
    }
    println!("ok");
    Ok(0)
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}
