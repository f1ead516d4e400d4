//! Batch driver: load a scenario, run its checks, emit human-readable and
//! machine-readable reports.
//!
//! Exit codes: 0 when every check matches its declared expectation, 1 on a
//! mismatch, 2 on usage or parse errors.

// negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod catalog;
mod expr;
mod report;
mod runner;
mod scenario;

use clap::{Parser, Subcommand};
use scenario::Scenario;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "codim",
    about = "Numerical reduction checks for submanifolds of symmetric ambient spaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled scenario by name).
    Run {
        /// Path to a scenario file, or the name of a bundled scenario.
        scenario: String,
        /// Write the machine-readable report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the random elements of the checks.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Multiplies every check tolerance (also honors CODIM_TOL_SCALE).
        #[arg(long)]
        tol_scale: Option<f64>,
        /// Print the machine-readable report to stdout instead of the
        /// human-readable rendering.
        #[arg(long)]
        json: bool,
    },
    /// List built-in spaces, immersions, bundles and scenarios.
    Catalog {
        /// Machine-readable listing.
        #[arg(long)]
        json: bool,
        /// Only list entries whose name contains this substring.
        #[arg(long, default_value = "")]
        filter: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            tol_scale,
            json,
        } => run(&scenario, out, seed, tol_scale, json),
        Command::Catalog { json, filter } => {
            print_catalog(json, &filter);
            0
        }
    };
    std::process::exit(code);
}

fn resolve_tol_scale(flag: Option<f64>) -> Result<f64, String> {
    if let Some(x) = flag {
        if !(x > 0.0) {
            return Err("--tol-scale must be positive".into());
        }
        return Ok(x);
    }
    match std::env::var("CODIM_TOL_SCALE") {
        Ok(text) => text
            .parse::<f64>()
            .ok()
            .filter(|x| *x > 0.0)
            .ok_or_else(|| format!("CODIM_TOL_SCALE value `{text}` is not a positive number")),
        Err(_) => Ok(1.0),
    }
}

fn load_scenario_text(name_or_path: &str) -> Result<String, String> {
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        return std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()));
    }
    if let Some(text) = catalog::bundled_scenario(name_or_path) {
        return Ok(text.to_string());
    }
    let names: Vec<&str> = catalog::SCENARIOS.iter().map(|(n, _, _)| *n).collect();
    Err(format!(
        "`{name_or_path}` is neither a file nor a bundled scenario; bundled scenarios: {}",
        names.join(", ")
    ))
}

fn run(
    scenario_arg: &str,
    out: Option<PathBuf>,
    seed: u64,
    tol_scale_flag: Option<f64>,
    json: bool,
) -> i32 {
    fn usage_error(msg: &str) -> i32 {
        eprintln!("error: {msg}");
        2
    }
    let tol_scale = match resolve_tol_scale(tol_scale_flag) {
        Ok(x) => x,
        Err(e) => return usage_error(&e),
    };
    let text = match load_scenario_text(scenario_arg) {
        Ok(t) => t,
        Err(e) => return usage_error(&e),
    };
    let scenario = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => return usage_error(&e),
    };
    let geometry = match catalog::build_geometry(&scenario) {
        Ok(g) => g,
        Err(e) => return usage_error(&e),
    };
    let outcome = match runner::run_scenario(&scenario, &geometry, seed, tol_scale) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let machine = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    if json {
        write_stdout(&machine);
        write_stdout("\n");
    } else {
        write_stdout(&report::render_human(
            &outcome.report,
            &outcome.full_reports,
        ));
    }
    if let Some(path) = out {
        if let Err(e) = std::fs::write(&path, machine) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return 2;
        }
    }
    if outcome.report.verdict == "ok" {
        0
    } else {
        1
    }
}

/// Prints without panicking when the reader closes the pipe early.
fn write_stdout(text: &str) {
    use std::io::Write;
    if std::io::stdout().write_all(text.as_bytes()).is_err() {
        std::process::exit(0);
    }
}

fn print_catalog(json: bool, filter: &str) {
    let keep = |name: &str| filter.is_empty() || name.contains(filter);
    if json {
        let value = serde_json::json!({
            "spaces": catalog::SPACE_KINDS.iter()
                .filter(|(n, _)| keep(n))
                .map(|(n, d)| serde_json::json!({"name": n, "description": d}))
                .collect::<Vec<_>>(),
            "immersions": catalog::IMMERSIONS.iter()
                .filter(|(n, _)| keep(n))
                .map(|(n, d)| serde_json::json!({"name": n, "description": d}))
                .collect::<Vec<_>>(),
            "bundles": catalog::BUNDLES.iter()
                .filter(|(n, _)| keep(n))
                .map(|(n, d)| serde_json::json!({"name": n, "description": d}))
                .collect::<Vec<_>>(),
            "scenarios": catalog::SCENARIOS.iter()
                .filter(|(n, _, _)| keep(n))
                .map(|(n, d, _)| serde_json::json!({"name": n, "description": d}))
                .collect::<Vec<_>>(),
            "checks": scenario::CHECK_KINDS.iter()
                .filter(|(n, _, _)| keep(n))
                .map(|(n, tol, d)| serde_json::json!({"name": n, "default_tol": tol, "description": d}))
                .collect::<Vec<_>>(),
        });
        write_stdout(&serde_json::to_string_pretty(&value).unwrap());
        write_stdout("\n");
        return;
    }
    let mut out = String::new();
    out.push_str("spaces:\n");
    for (n, d) in catalog::SPACE_KINDS.iter().filter(|(n, _)| keep(n)) {
        out.push_str(&format!("  {n:<26} {d}\n"));
    }
    out.push_str("immersions:\n");
    for (n, d) in catalog::IMMERSIONS.iter().filter(|(n, _)| keep(n)) {
        out.push_str(&format!("  {n:<26} {d}\n"));
    }
    out.push_str("bundles:\n");
    for (n, d) in catalog::BUNDLES.iter().filter(|(n, _)| keep(n)) {
        out.push_str(&format!("  {n:<26} {d}\n"));
    }
    out.push_str("scenarios:\n");
    for (n, d, _) in catalog::SCENARIOS.iter().filter(|(n, _, _)| keep(n)) {
        out.push_str(&format!("  {n:<26} {d}\n"));
    }
    out.push_str("checks:\n");
    for (n, tol, d) in scenario::CHECK_KINDS.iter().filter(|(n, _, _)| keep(n)) {
        out.push_str(&format!("  {n:<26} default tol {tol:>8.1e}  {d}\n"));
    }
    write_stdout(&out);
}
