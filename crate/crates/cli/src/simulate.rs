//! `covsim simulate`: replications on disk plus a summary and aggregate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use covsim_core::dse::write_tables_csv;
use covsim_core::ledger::Millions;
use covsim_core::pipeline::{aggregate, Aggregate, Experiment, ExperimentConfig, Replication, ReplicationSummary};
use covsim_core::synthmap::{adjustment_factors, write_areas_csv, write_factors_csv};

use crate::config::{load, Loaded};
use crate::error::{CliError, Result};
use crate::provenance::Provenance;

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub replications: Option<u64>,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub out_dir: PathBuf,
    pub provenance: Provenance,
    pub summaries: Vec<ReplicationSummary>,
    pub aggregate: Aggregate,
}

/// Contents of `aggregate.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateFile {
    pub config_sha256: String,
    pub seed: u64,
    pub replications: u64,
    pub mean: BTreeMap<String, Option<f64>>,
    pub mc_standard_error: BTreeMap<String, Option<f64>>,
}

pub fn load_experiment(opts: &SimulateOptions) -> Result<(Experiment, Provenance)> {
    let loaded: Loaded<ExperimentConfig> = load(&opts.config)?;
    let mut config = loaded.value.clone();
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(n) = opts.replications {
        config.replications = n;
    }
    let provenance = Provenance {
        config_sha256: loaded.sha256.clone(),
        seed: Some(config.seed),
    };
    let experiment = Experiment::new(config).map_err(|e| loaded.reject(e))?;
    Ok((experiment, provenance))
}

pub fn simulate(opts: &SimulateOptions) -> Result<SimulateOutcome> {
    let (experiment, provenance) = load_experiment(opts)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| experiment.config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("covsim-out"));
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.parallelism {
        if n == 0 {
            return Err(CliError::Usage("--parallelism must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;

    let n = experiment.config.replications;
    let results: Vec<Result<ReplicationSummary>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|rep| {
                let r = experiment.run_replication(rep)?;
                write_replication(&out_dir.join(format!("rep_{rep:04}")), &r, &provenance)?;
                Ok(r.summary())
            })
            .collect()
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let agg = aggregate(&summaries);

    provenance.write_csv(&out_dir.join("summary.csv"), |w| {
        let mut out = csv::Writer::from_writer(w);
        for s in &summaries {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    })?;
    provenance.write_csv(&out_dir.join("aggregate.csv"), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(ReplicationSummary::FIELDS)?;
        for (label, values) in [("mean", &agg.mean), ("mc_standard_error", &agg.mc_standard_error)] {
            let mut row = vec![label.to_string()];
            row.extend(ReplicationSummary::FIELDS[1..].iter().map(|f| values[*f].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    })?;
    let file = AggregateFile {
        config_sha256: provenance.config_sha256.clone(),
        seed: experiment.config.seed,
        replications: agg.replications,
        mean: finite(&agg.mean),
        mc_standard_error: finite(&agg.mc_standard_error),
    };
    let json = serde_json::to_string_pretty(&file).expect("aggregate serializes");
    let path = out_dir.join("aggregate.json");
    fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;

    Ok(SimulateOutcome {
        out_dir,
        provenance,
        summaries,
        aggregate: agg,
    })
}

fn finite(m: &BTreeMap<String, f64>) -> BTreeMap<String, Option<f64>> {
    m.iter()
        .map(|(k, v)| (k.clone(), v.is_finite().then_some(*v)))
        .collect()
}

fn write_replication(dir: &Path, r: &Replication, p: &Provenance) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    p.write_csv(&dir.join("cells.csv"), |w| write_tables_csv(&r.collapsed.tables, w))?;
    let factors = adjustment_factors(&r.estimates)?;
    p.write_csv(&dir.join("factors.csv"), |w| write_factors_csv(&factors, w))?;
    p.write_csv(&dir.join("areas.csv"), |w| write_areas_csv(&r.areas, w))?;
    p.write_csv(&dir.join("ledger.csv"), |w| write_ledger(r, w))?;
    if let Some(m) = &r.microdata {
        p.write_csv(&dir.join("population.csv"), |w| m.population.write_csv(w))?;
        p.write_csv(&dir.join("census.csv"), |w| m.census.write_csv(w))?;
        p.write_csv(&dir.join("psample.csv"), |w| m.psample.write_csv(w))?;
        p.write_csv(&dir.join("respondents.csv"), |w| m.resolved.write_respondents_csv(w))?;
        p.write_csv(&dir.join("records.csv"), |w| m.resolved.write_records_csv(w))?;
    }
    Ok(())
}

/// National ledger in persons, with the signed-millions display alongside.
fn write_ledger(r: &Replication, w: &mut Vec<u8>) -> covsim_core::Result<()> {
    let l = r.ledger();
    let f = &r.fifth_cell;
    let rows = [
        ("dual_system_estimate", l.dse_undercount),
        ("processing_error", -l.processing_error),
        ("corrected_survey_estimate", l.corrected()),
        ("doubly_missing", l.doubly_missing()),
        ("da_estimate", l.da_undercount),
        ("true_doubly_missing_net", f.true_net.unwrap_or(f64::NAN)),
    ];
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scope", "row", "persons", "display_millions"])?;
    for (key, v) in rows {
        let display = if v.is_finite() {
            Millions::from_persons(v).display_tenths()
        } else {
            String::new()
        };
        out.write_record([l.scope.to_string(), key.to_string(), v.to_string(), display])?;
    }
    out.flush()?;
    Ok(())
}
