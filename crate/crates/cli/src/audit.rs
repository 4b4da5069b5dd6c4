//! `covsim audit`: coverage-error ledgers from published totals, or
//! dual-system estimates from hand-built cell tables.

use std::fmt::Write as _;
use std::path::Path;

use covsim_core::dse::{estimate_all, read_tables_csv, DseEstimate};
use covsim_core::ledger::{read_audit_csv, render_table, write_ledger_csv, CoverageLedger, Millions};
use covsim_core::Error as CoreError;

use crate::config::sha256_hex;
use crate::error::{CliError, Result};
use crate::provenance::Provenance;

#[derive(Debug, Clone)]
pub enum AuditReport {
    Ledger(Vec<CoverageLedger<Millions>>),
    Cells(Vec<DseEstimate>),
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: AuditReport,
    pub provenance: Provenance,
    pub text: String,
}

pub fn audit(input: &Path, out: Option<&Path>) -> Result<AuditOutcome> {
    let bytes = std::fs::read(input).map_err(|e| CliError::io(input, e))?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Usage(format!("{}: not UTF-8 text", input.display())))?;
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    let Some(header) = header else {
        return Err(CliError::Usage(format!("{}: empty input file", input.display())));
    };
    let provenance = Provenance {
        config_sha256: sha256_hex(text.as_bytes()),
        seed: None,
    };
    let usage = |e: CoreError| match e {
        CoreError::Schema { .. } | CoreError::InvalidInput(_) | CoreError::Csv(_) | CoreError::GeographicScope(_) => {
            CliError::Usage(format!("{}: {e}", input.display()))
        }
        other => CliError::Core(other),
    };

    if header.split(',').any(|c| c.trim() == "c1") {
        let tables = read_tables_csv(text.as_bytes()).map_err(usage)?;
        let estimates = estimate_all(&tables)?;
        if let Some(dir) = out {
            ensure_dir(dir)?;
            provenance.write_csv(&dir.join("estimates.csv"), |w| write_estimates(&estimates, w))?;
        }
        return Ok(AuditOutcome {
            text: render_estimates(&estimates),
            report: AuditReport::Cells(estimates),
            provenance,
        });
    }

    let rows = read_audit_csv(text.as_bytes()).map_err(usage)?;
    let ledgers = rows
        .iter()
        .map(|r| r.ledger())
        .collect::<covsim_core::Result<Vec<_>>>()
        .map_err(usage)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        provenance.write_csv(&dir.join("ledger.csv"), |w| write_ledger_csv(&ledgers, w))?;
    }
    Ok(AuditOutcome {
        text: render_table(&ledgers),
        report: AuditReport::Ledger(ledgers),
        provenance,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn render_estimates(estimates: &[DseEstimate]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:>14} {:>14} {:>14}",
        "stratum", "census", "dse", "net_undercount"
    );
    let (mut census, mut dse) = (0.0, 0.0);
    for e in estimates {
        census += e.census_count;
        dse += e.dse;
        let _ = writeln!(
            s,
            "{:<28} {:>14.1} {:>14.1} {:>14.1}",
            e.stratum.to_string(),
            e.census_count,
            e.dse,
            e.net_undercount
        );
    }
    let _ = writeln!(
        s,
        "{:<28} {:>14.1} {:>14.1} {:>14.1}",
        "total",
        census,
        dse,
        dse - census
    );
    s
}

fn write_estimates(estimates: &[DseEstimate], w: &mut Vec<u8>) -> covsim_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["stratum", "census_count", "dse", "net_undercount", "fourth_cell"])?;
    for e in estimates {
        out.write_record([
            e.stratum.to_string(),
            e.census_count.to_string(),
            e.dse.to_string(),
            e.net_undercount.to_string(),
            e.fourth_cell.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
