use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use liftinv_cli::commands::{self, Overrides, Violations};
use liftinv_cli::output::{emit, ResultFile, Stopwatch};
use liftinv_cli::problem::ProblemFile;
use liftinv_cli::Exit;

/// Maximal admissible invariant sets of switching linear systems under
/// polynomial constraints.
#[derive(Parser, Debug)]
#[command(name = "liftinv", version, about)]
struct Cli {
    /// Debug logging; keeps Gram matrices in SOS certificates.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Where to write the command's output (stdout if omitted).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the maximal admissible invariant set and write a result file.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        opts: SolveArgs,
    },
    /// Report JSR bounds, constraint normalization and lifted invariance.
    Check {
        problem: PathBuf,
        #[arg(long)]
        jsr_depth: Option<usize>,
    },
    /// Sample a result on a grid: CSV, plus an SVG in the plane.
    Grid {
        result: PathBuf,
        #[arg(long, default_value_t = 201)]
        grid_res: usize,
        /// `lo1,hi1,lo2,hi2[,lo3,hi3]`; defaults to the problem's state box.
        #[arg(long, allow_hyphen_values = true)]
        bounds: Option<String>,
        /// SVG path; defaults to the output path with extension `svg`.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Check a result against exhaustive switching simulations on a grid.
    Verify {
        result: PathBuf,
        /// Problem file to check the result against.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        grid_res: usize,
        /// Simulation horizon; defaults to iterations + 2.
        #[arg(long)]
        horizon: Option<usize>,
        /// Boundary band skipped by the oracle.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Print the lifted coordinates, constraint rows, matrices and box.
    Lift {
        problem: PathBuf,
        #[arg(long)]
        algorithm: Option<u8>,
        #[arg(long)]
        delta: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    algorithm: Option<u8>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Largest SOS multiplier degree.
    #[arg(long)]
    sos_degree: Option<u32>,
    /// Origin margin of the box (algorithm 3).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    jsr_depth: Option<usize>,
    /// Skip the SOS post-processing of the description.
    #[arg(long)]
    no_sos_reduce: bool,
    #[arg(long)]
    skip_stability_gate: bool,
}

impl From<SolveArgs> for Overrides {
    fn from(a: SolveArgs) -> Self {
        Overrides {
            algorithm: a.algorithm,
            max_iter: a.max_iter,
            sos_degree: a.sos_degree,
            delta: a.delta,
            jsr_depth: a.jsr_depth,
            no_sos_reduce: a.no_sos_reduce,
            skip_stability_gate: a.skip_stability_gate,
        }
    }
}

/// Only one LP and one SDP backend are built in; the variables exist so
/// scripts can pin them.
fn check_backends() -> anyhow::Result<()> {
    for (var, only) in [("LIFTINV_LP_SOLVER", "minilp"), ("LIFTINV_SDP_SOLVER", "clarabel")] {
        if let Ok(v) = std::env::var(var) {
            if !v.is_empty() && !v.eq_ignore_ascii_case(only) {
                bail!(liftinv::Error::InvalidInput(format!("{var}={v}: only {only} is available")));
            }
        }
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    check_backends()?;
    let out = cli.output.as_deref();
    match cli.command {
        Command::Solve { problem, opts } => {
            let mut sw = Stopwatch::default();
            let mut pf = ProblemFile::load(&problem)?;
            Overrides::from(opts).apply(&mut pf);
            sw.lap("parse");
            let rf = commands::solve(pf, cli.verbose, sw)?;
            emit(out, &json(&rf)?)?;
            eprintln!("{}", commands::summary(&rf));
        }
        Command::Check { problem, jsr_depth } => {
            let mut pf = ProblemFile::load(&problem)?;
            Overrides {
                jsr_depth,
                ..Default::default()
            }
            .apply(&mut pf);
            let report = commands::check(&pf)?;
            emit(out, &json(&report)?)?;
            if let Some(b) = &report.jsr {
                eprintln!("JSR in [{:.6}, {:.6}] (depth {})", b.lower, b.upper, b.depth);
            }
            eprintln!("lifted constraint set: {:?}", report.invariance);
            if !report.stable {
                bail!(liftinv::Error::NotStable {
                    upper: report.jsr.as_ref().map_or(f64::NAN, |b| b.upper),
                    depth: pf.options.jsr_depth,
                });
            }
        }
        Command::Grid {
            result,
            grid_res,
            bounds,
            svg,
        } => {
            let rf = ResultFile::load(&result)?;
            let bounds = bounds.map(|b| commands::parse_bounds(&b, rf.result.n)).transpose()?;
            let g = commands::grid(&rf, grid_res, bounds)?;
            emit(out, &g.csv)?;
            let svg_path = svg.or_else(|| out.map(|p| p.with_extension("svg")));
            if let (Some(text), Some(path)) = (&g.svg, &svg_path) {
                emit(Some(path), text)?;
            }
            eprintln!("{} grid points, {} members", g.rows, g.members);
        }
        Command::Verify {
            result,
            problem,
            grid_res,
            horizon,
            margin,
        } => {
            let rf = ResultFile::load(&result)?;
            if let Some(p) = problem {
                commands::ensure_matching(&rf, &ProblemFile::load(&p)?)?;
            }
            let report = commands::verify(&rf, grid_res, horizon, margin)?;
            emit(out, &json(&report)?)?;
            let s = &report.simulation;
            eprintln!(
                "{} members checked, {} non-members checked, {} skipped, {} components",
                s.inside_checked, s.outside_checked, s.boundary_skipped, s.components
            );
            let v = s.violations();
            if v > 0 {
                for x in s.inside_violations.iter().take(10) {
                    eprintln!("member leaves the constraint set: {x:?}");
                }
                for x in s.outside_violations.iter().take(10) {
                    eprintln!("non-member never leaves within the horizon: {x:?}");
                }
                bail!(Violations(v));
            }
        }
        Command::Lift {
            problem,
            algorithm,
            delta,
        } => {
            let mut pf = ProblemFile::load(&problem)?;
            Overrides {
                algorithm,
                delta,
                ..Default::default()
            }
            .apply(&mut pf);
            emit(out, &json(&commands::lift(&pf)?)?)?;
        }
    }
    Ok(())
}

fn report_error(err: &anyhow::Error) {
    eprintln!("error: {err:#}");
    if let Some(liftinv::Error::NonConvergence { trace, .. }) = err.chain().find_map(|c| c.downcast_ref()) {
        for r in trace {
            eprintln!(
                "  Z_{}: {} rows ({} before reduction), {} LPs",
                r.index, r.rows, r.rows_before_reduction, r.lp_solves
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::from(Exit::Ok.code() as u8),
        Err(e) => {
            report_error(&e);
            ExitCode::from(Exit::classify(&e).code() as u8)
        }
    }
}

