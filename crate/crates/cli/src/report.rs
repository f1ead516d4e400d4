//! Machine-readable run reports with a stable schema, plus the
//! human-readable rendering.

use crate::scenario::Scenario;
use codim_core::reduction::{CheckReport, Verdict};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub checks: Vec<CheckEntry>,
    /// `ok` when every check matched its expectation, else `mismatch`.
    pub verdict: String,
    pub seed: u64,
    pub runtime_ms: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub expected: String,
    pub location: String,
}

/// Whether a check outcome matches its declared expectation. Inconclusive
/// outcomes match neither expectation.
pub fn matches_expectation(verdict: Verdict, expected: &str) -> bool {
    match expected {
        "pass" => verdict == Verdict::Pass,
        "fail" => verdict == Verdict::Fail,
        _ => false,
    }
}

pub fn assemble(
    scenario: &Scenario,
    reports: &[(CheckReport, String)],
    seed: u64,
    runtime_ms: u64,
) -> RunReport {
    let all_matched = reports
        .iter()
        .all(|(rep, expected)| matches_expectation(rep.verdict, expected));
    RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.clone(),
        checks: reports
            .iter()
            .map(|(rep, expected)| CheckEntry {
                name: rep.name.clone(),
                residual: rep.residual,
                tol: rep.tolerance,
                pass: rep.pass,
                expected: expected.clone(),
                location: rep.location.clone(),
            })
            .collect(),
        verdict: if all_matched { "ok" } else { "mismatch" }.to_string(),
        seed,
        runtime_ms,
    }
}

pub fn render_human(report: &RunReport, full_reports: &[(CheckReport, String)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scenario {} (seed {})\n",
        report.scenario.name, report.seed
    ));
    if !report.scenario.description.is_empty() {
        out.push_str(&format!("  {}\n", report.scenario.description));
    }
    for (rep, expected) in full_reports {
        let matched = matches_expectation(rep.verdict, expected);
        out.push_str(&format!(
            "check {:<26} residual {:>12.3e}  tol {:>8.1e}  {:<12} expected {:<4}  {}\n",
            rep.name,
            rep.residual,
            rep.tolerance,
            rep.verdict.to_string(),
            expected,
            if matched { "ok" } else { "MISMATCH" }
        ));
        for note in &rep.notes {
            out.push_str(&format!("      note: {note}\n"));
        }
        if !rep.location.is_empty() {
            out.push_str(&format!("      worst at {}\n", rep.location));
        }
    }
    let matched = report
        .checks
        .iter()
        .zip(full_reports)
        .filter(|(_, (rep, expected))| matches_expectation(rep.verdict, expected))
        .count();
    out.push_str(&format!(
        "verdict: {} ({}/{} checks as expected)  runtime {} ms\n",
        report.verdict.to_uppercase(),
        matched,
        report.checks.len(),
        report.runtime_ms
    ));
    out
}
