//! `covsim plan`: coverage-survey size and allocation.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use covsim_core::planner::{allocate, scale_sample, AllocationPolicy, PlanningModel, SamplePlan};
use covsim_core::scheme::SchemeSpec;

use crate::config::{load, Loaded};
use crate::error::{CliError, Result};
use crate::provenance::Provenance;

fn default_policy() -> AllocationPolicy {
    AllocationPolicy::PrecisionWeighted
}

/// Input of the planner. The base sample is taken to support every
/// post-stratum of `scheme`; the plan only has to support its demographic
/// groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub scheme: SchemeSpec,
    pub base_housing_units: u64,
    #[serde(default)]
    pub model: PlanningModel,
    #[serde(default)]
    pub target_cv: Option<f64>,
    /// Per-group targets keyed `as<a>-r<r>`, overriding `target_cv`.
    #[serde(default)]
    pub group_targets: BTreeMap<String, f64>,
    #[serde(default = "default_policy")]
    pub policy: AllocationPolicy,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub recommended: u64,
    pub groups_needed: u64,
    pub strata_supported: u64,
    /// Smallest sample meeting every group's target under equal-CV allocation.
    pub minimum_for_target: Option<u64>,
    pub plan: SamplePlan,
    pub model: PlanningModel,
    pub provenance: Provenance,
    pub text: String,
}

pub fn plan(config: &Path, out: Option<&Path>) -> Result<PlanOutcome> {
    let loaded: Loaded<PlanConfig> = load(config)?;
    let cfg = &loaded.value;
    let scheme = cfg.scheme.build().map_err(|e| loaded.reject(e))?;
    cfg.model.validate().map_err(|e| loaded.reject(e))?;
    for (name, t) in cfg
        .target_cv
        .iter()
        .map(|t| ("target_cv", t))
        .chain(cfg.group_targets.values().map(|t| ("group_targets", t)))
    {
        if !(*t > 0.0 && t.is_finite()) {
            return Err(loaded.reject(covsim_core::Error::InvalidConfig(format!(
                "{name} must be positive, got {t}"
            ))));
        }
    }
    let rollup = scheme.demographic_rollup();
    let needed = rollup.len() as u64;
    let supported = scheme.len() as u64;
    let recommended = scale_sample(cfg.base_housing_units, needed, supported).map_err(|e| loaded.reject(e))?;
    let plan = allocate(
        &rollup,
        recommended,
        &cfg.model,
        cfg.target_cv,
        &cfg.group_targets,
        cfg.policy,
    )?;

    let minimum_for_target = plan
        .groups
        .iter()
        .map(|g| g.target_cv.map(|t| cfg.model.min_sample(t, cfg.model.rate(g.group))))
        .sum::<Option<u64>>();

    let provenance = Provenance {
        config_sha256: loaded.sha256.clone(),
        seed: None,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        provenance.write_csv(&dir.join("plan.csv"), |w| plan.write_csv(&cfg.model, w))?;
    }

    let mut text = String::new();
    let _ = writeln!(
        text,
        "base sample {} housing units supports {} post-strata; {} demographic groups needed",
        cfg.base_housing_units, supported, needed
    );
    let _ = writeln!(text, "recommended sample: {recommended} housing units");
    if let Some(m) = minimum_for_target {
        let _ = writeln!(text, "minimum sample meeting CV targets: {m} housing units");
    }
    text.push_str(&plan.summary());

    Ok(PlanOutcome {
        recommended,
        groups_needed: needed,
        strata_supported: supported,
        minimum_for_target,
        plan,
        model: cfg.model.clone(),
        provenance,
        text,
    })
}
