use std::fmt::Write;

use super::report::{ComparisonReport, Stat};

const STD_MISSING: &str = "—";

fn cell(stat: &Stat) -> String {
    let std = stat
        .std
        .map_or_else(|| STD_MISSING.to_string(), |s| format!("{:.2}", s * 100.0));
    format!("{:.2} ± {}", stat.mean * 100.0, std)
}

/// Fixed-width percentage table: one row per mode plus a delta row.
pub fn emit_table(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10}  {:>16}  {:>16}  {:>16}",
        "mode", "accuracy (%)", "f1 (%)", "auc (%)"
    );
    for arm in &report.arms {
        let _ = writeln!(
            out,
            "{:<10}  {:>16}  {:>16}  {:>16}",
            arm.mode.name(),
            cell(&arm.accuracy),
            cell(&arm.f1),
            cell(&arm.auc)
        );
    }
    let d = &report.deltas;
    let _ = writeln!(
        out,
        "{:<10}  {:>16}  {:>16}  {:>16}",
        "delta",
        format!("{:+.2}", d.accuracy * 100.0),
        format!("{:+.2}", d.f1 * 100.0),
        format!("{:+.2}", d.auc * 100.0)
    );
    let seeds: Vec<String> = report.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(out, "seeds: {}", seeds.join(", "));
    out
}
