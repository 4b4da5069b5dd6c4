//! One replication of the full experiment: population, field operations,
//! estimation, synthetic carry-down and the coverage ledger.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dse::{build_cell_tables, collapse_strata, estimate_all, Collapsed, DseEstimate, DEFAULT_COLLAPSE_ORDER};
use crate::error::{Error, Result};
use crate::fieldsim::{
    draw_psample, evaluation_study, impute_unresolved, perturb, simulate_census, true_match, EnumerationFile,
    ErrorConfig, EvaluationResult, ImputationPolicy, MatchResult, PSample,
};
use crate::ledger::{
    decompose, recover_fifth_cell, true_doubly_missing, CoverageLedger, DaTotals, FifthCellEstimate, Scope,
    TrueDoublyMissing,
};
use crate::popgen::{
    generate_population, AreaKey, Geography, GeographySpec, Population, PopulationConfig, PopulationSpec,
};
use crate::rng::{stream, Stage};
use crate::scheme::{PooledDim, PostStratScheme, SchemeSpec};
use crate::synthmap::{adjustment_factors, area_estimates, expand_factors, geography_loss, AreaEstimate, LossReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollapseConfig {
    /// Strata with fewer matched respondents than this are merged.
    pub min_c1: f64,
    pub order: Vec<PooledDim>,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        CollapseConfig {
            min_c1: 1.0,
            order: DEFAULT_COLLAPSE_ORDER.to_vec(),
        }
    }
}

fn one() -> u64 {
    1
}

fn full() -> f64 {
    1.0
}

/// A complete experiment description, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: u64,
    pub scheme: SchemeSpec,
    pub geography: GeographySpec,
    pub population: PopulationSpec,
    #[serde(default)]
    pub errors: ErrorConfig,
    #[serde(default = "full")]
    pub block_sample_fraction: f64,
    #[serde(default)]
    pub collapse: CollapseConfig,
    #[serde(default)]
    pub imputation: ImputationPolicy,
    /// Standard deviation of independent noise added to each DA cell.
    #[serde(default)]
    pub da_noise_sd: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Also write per-person and per-record files for each replication.
    #[serde(default)]
    pub write_microdata: bool,
}

/// A validated experiment, ready to run replications.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub scheme: PostStratScheme,
    pub population: PopulationConfig,
}

/// Everything one replication produces.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: u64,
    pub true_total: u64,
    pub census_total: f64,
    pub collapsed: Collapsed,
    pub estimates: Vec<DseEstimate>,
    pub evaluation: EvaluationResult,
    pub areas: Vec<AreaEstimate>,
    pub loss: LossReport,
    pub da: DaTotals,
    pub true_doubly_missing: TrueDoublyMissing,
    pub fifth_cell: FifthCellEstimate,
    pub microdata: Option<Microdata>,
}

#[derive(Debug, Clone)]
pub struct Microdata {
    pub population: Population,
    pub census: EnumerationFile,
    pub psample: PSample,
    pub resolved: MatchResult,
}

/// One row of the per-replication summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub replication: u64,
    pub true_total: f64,
    pub census_total: f64,
    pub dse_total: f64,
    pub dse_undercount: f64,
    pub measured_bias: f64,
    pub measured_bias_se: f64,
    pub corrected_undercount: f64,
    pub da_total: f64,
    pub da_net_undercount: f64,
    pub doubly_missing_estimate: f64,
    pub doubly_missing_true_net: f64,
    pub doubly_missing_true_raw: f64,
    pub adjusted_share_loss: f64,
    pub census_share_loss: f64,
    pub worst_region: f64,
    pub strata_estimated: f64,
}

impl ReplicationSummary {
    pub const FIELDS: [&'static str; 17] = [
        "replication",
        "true_total",
        "census_total",
        "dse_total",
        "dse_undercount",
        "measured_bias",
        "measured_bias_se",
        "corrected_undercount",
        "da_total",
        "da_net_undercount",
        "doubly_missing_estimate",
        "doubly_missing_true_net",
        "doubly_missing_true_raw",
        "adjusted_share_loss",
        "census_share_loss",
        "worst_region",
        "strata_estimated",
    ];

    /// Numeric fields in [`Self::FIELDS`] order, replication number excluded.
    pub fn values(&self) -> [f64; 16] {
        [
            self.true_total,
            self.census_total,
            self.dse_total,
            self.dse_undercount,
            self.measured_bias,
            self.measured_bias_se,
            self.corrected_undercount,
            self.da_total,
            self.da_net_undercount,
            self.doubly_missing_estimate,
            self.doubly_missing_true_net,
            self.doubly_missing_true_raw,
            self.adjusted_share_loss,
            self.census_share_loss,
            self.worst_region,
            self.strata_estimated,
        ]
    }
}

impl Replication {
    pub fn dse_total(&self) -> f64 {
        self.estimates.iter().map(|e| e.dse).sum()
    }

    /// National ledger in persons.
    pub fn ledger(&self) -> CoverageLedger<f64> {
        decompose(
            Scope::National,
            self.fifth_cell.dse_undercount,
            self.fifth_cell.measured_bias,
            self.fifth_cell.da_net_undercount,
        )
    }

    pub fn summary(&self) -> ReplicationSummary {
        let f = &self.fifth_cell;
        ReplicationSummary {
            replication: self.index,
            true_total: self.true_total as f64,
            census_total: self.census_total,
            dse_total: self.dse_total(),
            dse_undercount: f.dse_undercount,
            measured_bias: f.measured_bias,
            measured_bias_se: self.evaluation.total_standard_error,
            corrected_undercount: f.corrected,
            da_total: self.da.total(),
            da_net_undercount: f.da_net_undercount,
            doubly_missing_estimate: f.estimated_doubly_missing,
            doubly_missing_true_net: f.true_net.unwrap_or(f64::NAN),
            doubly_missing_true_raw: f.true_raw.map_or(f64::NAN, |v| v as f64),
            adjusted_share_loss: self.loss.adjusted_share_loss,
            census_share_loss: self.loss.census_share_loss,
            worst_region: self.loss.worst_region().map_or(f64::NAN, f64::from),
            strata_estimated: self.estimates.len() as f64,
        }
    }
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        if config.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if !(config.block_sample_fraction > 0.0 && config.block_sample_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "block_sample_fraction must lie in (0, 1], got {}",
                config.block_sample_fraction
            )));
        }
        if !(config.collapse.min_c1 > 0.0) {
            return Err(Error::InvalidConfig("collapse.min_c1 must be positive".into()));
        }
        if let Some(sd) = config.da_noise_sd {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::InvalidConfig(format!("da_noise_sd must be >= 0, got {sd}")));
            }
        }
        let scheme = config.scheme.build()?;
        let geography = Arc::new(config.geography.build()?);
        check_geography(&scheme, &geography)?;
        let population = config.population.build(&scheme, geography)?;
        Ok(Experiment {
            config,
            scheme,
            population,
        })
    }

    pub fn run_replication(&self, index: u64) -> Result<Replication> {
        self.run_replication_with(index, self.config.write_microdata)
    }

    pub fn run_replication_with(&self, index: u64, keep_microdata: bool) -> Result<Replication> {
        let cfg = &self.config;
        let rng = |stage| stream(cfg.seed, index, stage);

        let pop = generate_population(&self.population, &mut rng(Stage::Population))?;
        let census = simulate_census(&pop, &cfg.errors, &mut rng(Stage::Census));
        let psample = draw_psample(&pop, cfg.block_sample_fraction, &mut rng(Stage::PSample))?;
        let truth = true_match(&census, &psample);
        let perturbed = perturb(&truth, &cfg.errors, &mut rng(Stage::Matching));
        let resolved = impute_unresolved(&perturbed, cfg.imputation, &mut rng(Stage::Imputation))?;

        let tables = build_cell_tables(&resolved, &self.scheme)?;
        let collapsed = collapse_strata(&tables, cfg.collapse.min_c1, &cfg.collapse.order)?;
        let estimates = estimate_all(&collapsed.tables)?;
        let evaluation = evaluation_study(
            &truth,
            &resolved,
            &self.scheme,
            Some(&collapsed.mapping),
            &cfg.errors,
            &mut rng(Stage::Evaluation),
        )?;

        let factors = expand_factors(&adjustment_factors(&estimates)?, &collapsed.mapping)?;
        let mut truth_by_area: BTreeMap<AreaKey, u64> = BTreeMap::new();
        for p in &pop.persons {
            *truth_by_area.entry(p.geo.area_key()).or_insert(0) += 1;
        }
        let cells = census.cells();
        let areas = area_estimates(&factors, &cells, &self.scheme, Some(&truth_by_area))?;
        let loss = geography_loss(&areas)?;

        let da = DaTotals::from_truth(&pop, cfg.da_noise_sd, &mut rng(Stage::Demographic))?;
        let true_dm = true_doubly_missing(&pop, &census, &self.scheme, Some(&collapsed.mapping))?;
        let census_total = census.len() as f64;
        let dse_total: f64 = estimates.iter().map(|e| e.dse).sum();
        let fifth_cell = recover_fifth_cell(
            Scope::National,
            dse_total,
            census_total,
            evaluation.total_bias,
            &da,
            Some(&true_dm),
        )?;

        Ok(Replication {
            index,
            true_total: pop.len() as u64,
            census_total,
            collapsed,
            estimates,
            evaluation,
            areas,
            loss,
            da,
            true_doubly_missing: true_dm,
            fifth_cell,
            microdata: keep_microdata.then_some(Microdata {
                population: pop,
                census,
                psample,
                resolved,
            }),
        })
    }
}

fn check_geography(scheme: &PostStratScheme, geography: &Geography) -> Result<()> {
    let dims = scheme.dims();
    for a in geography.areas() {
        if a.key.region >= dims.regions || a.key.place_type >= dims.place_types {
            return Err(Error::InvalidConfig(format!(
                "area {} lies outside the scheme's {} regions and {} place types",
                a.key, dims.regions, dims.place_types
            )));
        }
    }
    Ok(())
}

/// Mean and Monte Carlo standard error of each summary column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub replications: u64,
    pub mean: BTreeMap<String, f64>,
    pub mc_standard_error: BTreeMap<String, f64>,
}

pub fn aggregate(rows: &[ReplicationSummary]) -> Aggregate {
    let n = rows.len() as f64;
    let mut mean = BTreeMap::new();
    let mut se = BTreeMap::new();
    for (j, name) in ReplicationSummary::FIELDS[1..].iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r.values()[j]).collect();
        let m = xs.iter().sum::<f64>() / n;
        let s = if rows.len() > 1 {
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        mean.insert(name.to_string(), m);
        se.insert(name.to_string(), s);
    }
    Aggregate {
        replications: rows.len() as u64,
        mean,
        mc_standard_error: se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
                "seed": 17,
                "scheme": {"kind": "full_cross", "age_sex_classes": 2, "race_groups": 1,
                           "regions": 2, "place_types": 1, "tenure_levels": 1},
                "geography": {"kind": "grid", "regions": 2, "place_types": 1,
                              "areas_per_cell": 3, "blocks_per_area": 4},
                "population": {
                    "counts": {"per_stratum_area": 200},
                    "capture": {"p_census": 0.9, "p_survey": 0.85}
                }
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn error_free_pipeline_counts_match_capture_flags() {
        let exp = Experiment::new(config()).unwrap();
        let rep = exp.run_replication_with(0, true).unwrap();
        let pop = &rep.microdata.as_ref().unwrap().population;
        for e in &rep.estimates {
            let members: Vec<_> = pop.persons.iter().filter(|p| p.stratum == e.stratum).collect();
            let both = members.iter().filter(|p| p.census && p.survey).count() as f64;
            let census_only = members.iter().filter(|p| p.census && !p.survey).count() as f64;
            let survey_only = members.iter().filter(|p| !p.census && p.survey).count() as f64;
            assert_eq!((e.table.c1, e.table.c2, e.table.c3), (both, census_only, survey_only));
            assert_eq!(e.census_count, both + census_only);
        }
        assert_eq!(rep.evaluation.total_bias, 0.0);
        assert_eq!(rep.true_total, 2 * 2 * 3 * 200);
        let l = rep.ledger();
        assert!((l.doubly_missing() - rep.fifth_cell.estimated_doubly_missing).abs() < 1e-9);
    }

    #[test]
    fn replications_are_reproducible_and_distinct() {
        let exp = Experiment::new(config()).unwrap();
        let a = exp.run_replication(3).unwrap().summary();
        let b = exp.run_replication(3).unwrap().summary();
        let c = exp.run_replication(4).unwrap().summary();
        assert_eq!(a, b);
        assert_ne!(a.dse_total, c.dse_total);
    }

    #[test]
    fn gross_flows_reconcile_with_net() {
        let mut cfg = config();
        cfg.errors = ErrorConfig::illustrative();
        let rep = Experiment::new(cfg).unwrap().run_replication(0).unwrap();
        for e in &rep.estimates {
            let g = e.gross_flows();
            assert!((g.gross_omissions - g.erroneous_enumerations - e.net_undercount).abs() < 1e-6);
            assert!(g.erroneous_enumerations >= 0.0);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = config();
        c.replications = 0;
        assert!(matches!(Experiment::new(c), Err(Error::InvalidConfig(_))));
        let mut c = config();
        c.block_sample_fraction = 0.0;
        assert!(Experiment::new(c).is_err());
        let mut c = config();
        c.geography = GeographySpec::Grid {
            regions: 3,
            place_types: 1,
            areas_per_cell: 1,
            blocks_per_area: 1,
        };
        assert!(Experiment::new(c).is_err());
    }

    #[test]
    fn aggregate_means_and_errors() {
        let exp = Experiment::new(config()).unwrap();
        let rows: Vec<_> = (0..5).map(|i| exp.run_replication(i).unwrap().summary()).collect();
        let agg = aggregate(&rows);
        assert_eq!(agg.replications, 5);
        let mean = rows.iter().map(|r| r.dse_total).sum::<f64>() / 5.0;
        assert!((agg.mean["dse_total"] - mean).abs() < 1e-9);
        assert_eq!(agg.mc_standard_error["true_total"], 0.0);
    }
}
