use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::RunError;
use crate::io::{self, AGGREGATE_CSV, TRIALS_CSV};
use crate::sweep::{CellSummary, SavingRow, SweepResult};

/// Files `report` needs in the results directory.
pub const REQUIRED: [&str; 2] = [TRIALS_CSV, AGGREGATE_CSV];

pub fn missing_files(dir: &Path) -> Vec<PathBuf> {
    REQUIRED.iter().map(|n| dir.join(n)).filter(|p| !p.is_file()).collect()
}

/// Rebuilds the sweep from `trials.csv`, checks it against `aggregate.csv`
/// and rewrites the derived tables.
pub fn load_and_refresh(dir: &Path) -> Result<SweepResult, RunError> {
    let missing = missing_files(dir);
    if !missing.is_empty() {
        return Err(RunError::Missing(missing));
    }
    let trials = io::read_trials_csv(&dir.join(TRIALS_CSV))?;
    if trials.is_empty() {
        return Err(RunError::format(dir.join(TRIALS_CSV), "no trials"));
    }
    let sweep = SweepResult::from_trials(trials);
    let stored = io::read_aggregate_csv(&dir.join(AGGREGATE_CSV))?;
    check_consistent(&dir.join(AGGREGATE_CSV), &stored, &sweep.cells)?;
    io::write_derived(dir, &sweep)?;
    Ok(sweep)
}

fn check_consistent(path: &Path, stored: &[CellSummary], fresh: &[CellSummary]) -> Result<(), RunError> {
    if stored.len() != fresh.len() {
        return Err(RunError::format(
            path,
            format!("{} cells, but trials.csv gives {}", stored.len(), fresh.len()),
        ));
    }
    for (a, b) in stored.iter().zip(fresh) {
        let same_key = a.sources == b.sources && a.sensors == b.sensors && a.sigma_deg == b.sigma_deg;
        let same_value = a.improvement.to_bits() == b.improvement.to_bits()
            || (a.improvement.is_nan() && b.improvement.is_nan());
        if !(same_key && same_value) {
            return Err(RunError::format(
                path,
                format!(
                    "cell M={} R={} sigma={} disagrees with trials.csv",
                    a.sources, a.sensors, a.sigma_deg
                ),
            ));
        }
    }
    Ok(())
}

/// Summary table: one row per `(M, R)`, one column group per `σ`.
pub fn format_table(sweep: &SweepResult) -> String {
    let mut sigmas: Vec<f64> = sweep.cells.iter().map(|c| c.sigma_deg).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut rows: Vec<(usize, usize)> = sweep.cells.iter().map(|c| (c.sources, c.sensors)).collect();
    rows.sort();
    rows.dedup();

    let mut out = String::new();
    let _ = write!(out, "{:>3} {:>3}", "M", "R");
    for s in &sigmas {
        let _ = write!(out, " | {:>8} {:>8} {:>8}", format!("dopt@{s}"), "maxent", "impr%");
    }
    out.push('\n');
    for (m, r) in rows {
        let _ = write!(out, "{m:>3} {r:>3}");
        for &s in &sigmas {
            match sweep.cell(m, r, s) {
                Some(c) => {
                    let _ = write!(
                        out,
                        " | {:>8.3} {:>8.3} {:>+8.1}",
                        c.dopt.mean, c.maxent.mean, c.improvement
                    );
                }
                None => {
                    let _ = write!(out, " | {:>8} {:>8} {:>8}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn format_savings(rows: &[SavingRow]) -> String {
    let mut out = String::from("sensor saving (R_f - R_m)\n");
    for r in rows {
        let _ = writeln!(out, "M={:<3} sigma={:<5} saving={}", r.sources, r.sigma_deg, r.saving);
    }
    out
}
