//! `covsim report`: readable summary of a finished simulation directory.

use std::fmt::Write as _;
use std::path::Path;

use covsim_core::ledger::{decompose, render_table, Millions, Scope};

use crate::error::{CliError, Result};
use crate::simulate::AggregateFile;

pub fn report(dir: &Path) -> Result<String> {
    let path = dir.join("aggregate.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let agg: AggregateFile =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mean = |k: &str| agg.mean.get(k).copied().flatten().unwrap_or(f64::NAN);
    let se = |k: &str| agg.mc_standard_error.get(k).copied().flatten().unwrap_or(f64::NAN);

    let ledger = decompose(
        Scope::National,
        Millions::from_persons(mean("dse_undercount")),
        Millions::from_persons(mean("measured_bias")),
        Millions::from_persons(mean("da_net_undercount")),
    );
    let mut s = String::new();
    let _ = writeln!(
        s,
        "config_sha256={} seed={} replications={}",
        agg.config_sha256, agg.seed, agg.replications
    );
    s.push('\n');
    s.push_str(&render_table(&[ledger]));
    s.push('\n');
    let persons = decompose(
        Scope::National,
        mean("dse_undercount"),
        mean("measured_bias"),
        mean("da_net_undercount"),
    );
    let _ = writeln!(s, "Coverage error (persons)");
    for (label, v) in [
        ("Dual-System Estimate", persons.dse_undercount),
        ("Processing Error", -persons.processing_error),
        ("Corrected Survey Estimate", persons.corrected()),
        ("Doubly Missing People", persons.doubly_missing()),
        ("DA Estimate", persons.da_undercount),
    ] {
        let _ = writeln!(s, "{label:<26} {v:>+16.1}");
    }
    s.push('\n');
    let _ = writeln!(s, "{:<26} {:>16} {:>14}", "mean over replications", "persons", "mc_se");
    for (label, key) in [
        ("true population", "true_total"),
        ("census count", "census_total"),
        ("dual-system estimate", "dse_total"),
        ("measured processing error", "measured_bias"),
        ("doubly missing (est.)", "doubly_missing_estimate"),
        ("doubly missing (true)", "doubly_missing_true_net"),
        ("share loss, adjusted", "adjusted_share_loss"),
        ("share loss, census", "census_share_loss"),
    ] {
        let _ = writeln!(s, "{label:<26} {:>16.4} {:>14.4}", mean(key), se(key));
    }
    Ok(s)
}
