//! Command-line front end: moment summaries, graph generation, exact
//! connectivity checks, threshold sweeps, and bound verification.
//!
//! Exit codes: 0 success, 1 a check failed (graph not k-connected, hard
//! bound violation, or a refused sweep precondition), 2 usage/config/IO
//! problems. `KCONN_THREADS` caps the worker pool.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kconn::connectivity::{analyze, ConnectivityReport};
use kconn::dist::{moments, JointDistribution, DEFAULT_TAIL_TOL};
use kconn::graph::{export_edge_list, generate, import_edge_list};
use kconn::harness::{
    fmt_float, rows_to_csv, rows_to_json, run_sweep, verify_bounds, BoundsReport, SweepConfig,
    VerifyConfig,
};
use kconn::Error;

#[derive(Parser)]
#[command(
    name = "kconn",
    version,
    about = "k-connectivity experiments on unions of random Bernoulli layer graphs"
)]
struct Cli {
    /// Emit reports as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the moment summary of a distribution at graph size n.
    Moments {
        /// Path to a distribution JSON file.
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        n: u64,
        /// Highest eta exponent to report (eta_2..eta_k).
        #[arg(long)]
        k: u32,
    },
    /// Sample a union graph and write its edge list.
    Generate {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        n: u64,
        /// Number of layers.
        #[arg(long)]
        m: u64,
        #[arg(long)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read an edge list and decide vertex and edge k-connectivity.
    Check {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: u32,
    },
    /// Run a threshold sweep from a JSON config and write CSV (or JSON).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare closed-form bounds against Monte Carlo across a grid.
    VerifyBounds {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Die quietly on a closed pipe (`kconn ... | head`) like any other CLI
/// instead of panicking; Rust ignores SIGPIPE by default.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::PreconditionFailed(_) => 1,
                _ => 2,
            })
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let raw = match std::env::var("KCONN_THREADS") {
        Ok(v) => v,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(format!("KCONN_THREADS: {e}")),
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| format!("KCONN_THREADS = {raw:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool: {e}"))
}

fn run(cli: Cli) -> kconn::Result<ExitCode> {
    match cli.command {
        Command::Moments { dist, n, k } => {
            let d = JointDistribution::from_path(&dist)?;
            let tq = moments(&d, n, k.max(2), DEFAULT_TAIL_TOL)?;
            println!("{}", serde_json::to_string_pretty(&tq.to_json())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate {
            dist,
            n,
            m,
            seed,
            out,
        } => {
            let d = JointDistribution::from_path(&dist)?;
            if n < 1 || n > u32::MAX as u64 {
                return Err(Error::Domain(format!("n = {n} outside [1, 2^32 - 1]")));
            }
            let g = generate(&d, n as usize, m, seed, DEFAULT_TAIL_TOL)?;
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    export_edge_list(&g, &mut w)?;
                    w.flush()?;
                }
                None => {
                    let stdout = io::stdout();
                    let mut w = BufWriter::new(stdout.lock());
                    export_edge_list(&g, &mut w)?;
                    w.flush()?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { graph, k } => {
            let mut reader = BufReader::new(File::open(graph)?);
            let g = import_edge_list(&mut reader)?;
            let report = analyze(&g, k);
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            } else {
                print_check_text(&report);
            }
            Ok(if report.vertex_connected_k && report.edge_connected_k {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Sweep { config, out } => {
            let config = SweepConfig::from_path(&config)?;
            let rows = run_sweep(&config)?;
            let text = if cli.json {
                serde_json::to_string_pretty(&rows_to_json(&rows))? + "\n"
            } else {
                rows_to_csv(&rows)
            };
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyBounds { config } => {
            let config = VerifyConfig::from_path(&config)?;
            let report = verify_bounds(&config)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            } else {
                print_bounds_text(&report);
            }
            Ok(if report.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn pass_fail(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

fn print_check_text(report: &ConnectivityReport) {
    println!("n          = {}", report.n);
    println!("k          = {}", report.k);
    println!("min degree = {}", report.min_degree);
    println!(
        "vertex {}-connected: {}",
        report.k,
        yes_no(report.vertex_connected_k)
    );
    if let Some(cut) = &report.vertex_cut {
        let ids: Vec<String> = cut.iter().map(|v| (v + 1).to_string()).collect();
        println!("  separating set: {{{}}}", ids.join(", "));
    }
    println!(
        "edge {}-connected:   {}",
        report.k,
        yes_no(report.edge_connected_k)
    );
    if let Some(cut) = &report.edge_cut {
        let ids: Vec<String> = cut
            .iter()
            .map(|&(u, v)| format!("{}-{}", u + 1, v + 1))
            .collect();
        println!("  disconnecting edges: {{{}}}", ids.join(", "));
    }
    if let Some(w) = &report.bk_witness {
        let removed: Vec<String> = w.removed.iter().map(|v| (v + 1).to_string()).collect();
        println!(
            "  small-component witness: remove {{{}}} -> component of size {}",
            removed.join(", "),
            w.component.len()
        );
    }
}

fn print_bounds_text(report: &BoundsReport) {
    println!("moment inequalities:");
    for c in &report.moment_checks.checks {
        println!(
            "  [{}] {}: {} vs {}",
            pass_fail(c.pass),
            c.name,
            fmt_float(c.lhs),
            fmt_float(c.rhs)
        );
    }
    let fact_failures = report.fact_checks.iter().filter(|c| !c.pass).count();
    println!(
        "h envelope grid: {} checks, {} failed",
        report.fact_checks.len(),
        fact_failures
    );
    for c in report.fact_checks.iter().filter(|c| !c.pass) {
        println!(
            "  [FAIL] {}: {} vs {}",
            c.name,
            fmt_float(c.lhs),
            fmt_float(c.rhs)
        );
    }
    println!("block-separation cells (estimate vs min(sr1, sr2) + 3 SE):");
    for c in &report.cells {
        println!(
            "  [{}] s={} r={} x={} q={}: mean={} se={} bound={} margin={}",
            pass_fail(c.pass),
            c.s,
            c.r,
            c.x,
            fmt_float(c.q),
            fmt_float(c.mean),
            fmt_float(c.std_error),
            fmt_float(c.bound),
            fmt_float(c.margin)
        );
    }
    println!("distribution-averaged cells (advisory first-order bound):");
    for c in &report.hat_cells {
        println!(
            "  [{}] s={} r={}: mean={} se={} bound={} margin={}",
            if c.within { "ok" } else { "over" },
            c.s,
            c.r,
            fmt_float(c.mean),
            fmt_float(c.std_error),
            fmt_float(c.bound),
            fmt_float(c.margin)
        );
    }
    println!("all pass: {}", report.all_pass);
}
