//! Coverage-survey sample sizing and allocation.
//!
//! Precision is predicted with a binomial model for the undercount rate `r`
//! in a group of `n` housing units, inflated by a design effect for block
//! clustering: `CV = sqrt(deff · (1 - r) / (r · n · persons_per_hu))`. This is
//! a planning approximation, not a variance estimator.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::popgen::{DemographicGroup, PostStratumKey};
use crate::scheme::PostStratScheme;

/// `base · needed / supported`, rounded to the nearest hundred (halves up).
pub fn scale_sample(base: u64, needed: u64, supported: u64) -> Result<u64> {
    if needed == 0 || supported == 0 {
        return Err(Error::InvalidInput("group counts must be positive".into()));
    }
    if needed > supported {
        return Err(Error::ScaleUp { needed, supported });
    }
    let num = base as u128 * needed as u128;
    let den = supported as u128 * 100;
    Ok(((num + den / 2) / den * 100) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanningModel {
    pub undercount_rate: f64,
    /// Per-group rates, keyed `as<a>-r<r>`; others use `undercount_rate`.
    pub group_rates: BTreeMap<String, f64>,
    pub design_effect: f64,
    pub persons_per_hu: f64,
}

impl Default for PlanningModel {
    fn default() -> Self {
        PlanningModel {
            undercount_rate: 0.02,
            group_rates: BTreeMap::new(),
            design_effect: 2.0,
            persons_per_hu: 2.6,
        }
    }
}

impl PlanningModel {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in std::iter::once(("undercount_rate".to_string(), self.undercount_rate))
            .chain(self.group_rates.iter().map(|(k, v)| (format!("group_rates.{k}"), *v)))
        {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {r}")));
            }
        }
        if !(self.design_effect >= 1.0 && self.design_effect.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "design_effect must be >= 1, got {}",
                self.design_effect
            )));
        }
        if !(self.persons_per_hu > 0.0 && self.persons_per_hu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "persons_per_hu must be > 0, got {}",
                self.persons_per_hu
            )));
        }
        Ok(())
    }

    pub fn rate(&self, group: DemographicGroup) -> f64 {
        self.group_rates
            .get(&group.to_string())
            .copied()
            .unwrap_or(self.undercount_rate)
    }

    pub fn cv(&self, housing_units: f64, rate: f64) -> f64 {
        predict_cv(housing_units, rate, self.design_effect, self.persons_per_hu)
    }

    /// Smallest whole number of housing units reaching `target_cv`.
    pub fn min_sample(&self, target_cv: f64, rate: f64) -> u64 {
        let n = self.design_effect * (1.0 - rate) / (rate * self.persons_per_hu * target_cv * target_cv);
        // Guard against n landing a hair above an integer through rounding.
        let rounded = n.round();
        if (n - rounded).abs() < 1e-9 * n.max(1.0) {
            rounded as u64
        } else {
            n.ceil() as u64
        }
    }
}

/// Predicted CV for `housing_units`; infinite when nothing is allocated.
pub fn predict_cv(housing_units: f64, rate: f64, design_effect: f64, persons_per_hu: f64) -> f64 {
    if housing_units <= 0.0 {
        return f64::INFINITY;
    }
    (design_effect * (1.0 - rate) / (rate * housing_units * persons_per_hu)).sqrt()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationPolicy {
    #[default]
    Proportional,
    /// Equalize predicted CVs across demographic groups, then split each
    /// group's sample over its strata by population share.
    PrecisionWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratumAllocation {
    pub stratum: PostStratumKey,
    pub housing_units: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupPlan {
    pub group: DemographicGroup,
    pub housing_units: u64,
    pub cv: f64,
    pub target_cv: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePlan {
    pub total_housing_units: u64,
    pub policy: AllocationPolicy,
    pub strata: Vec<StratumAllocation>,
    pub groups: Vec<GroupPlan>,
}

impl SamplePlan {
    pub fn is_feasible(&self) -> bool {
        self.groups.iter().all(|g| g.feasible)
    }

    pub fn stratum_cvs(&self, model: &PlanningModel) -> Vec<(PostStratumKey, f64)> {
        self.strata
            .iter()
            .map(|s| (s.stratum, model.cv(s.housing_units as f64, model.rate(s.stratum.group))))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, model: &PlanningModel, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(
            PostStratumKey::CSV_COLUMNS
                .iter()
                .chain(["housing_units", "predicted_cv"].iter()),
        )?;
        for (s, (_, cv)) in self.strata.iter().zip(self.stratum_cvs(model)) {
            let mut row: Vec<String> = s.stratum.csv_fields().into();
            row.push(s.housing_units.to_string());
            row.push(cv.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "housing units: {}", self.total_housing_units);
        let _ = writeln!(
            s,
            "strata: {}, demographic groups: {}",
            self.strata.len(),
            self.groups.len()
        );
        let _ = writeln!(
            s,
            "{:<10} {:>10} {:>10} {:>10}  status",
            "group", "units", "cv", "target"
        );
        for g in &self.groups {
            let target = g.target_cv.map_or_else(|| "-".to_string(), |t| format!("{t:.4}"));
            let _ = writeln!(
                s,
                "{:<10} {:>10} {:>10.4} {:>10}  {}",
                g.group.to_string(),
                g.housing_units,
                g.cv,
                target,
                if g.feasible { "ok" } else { "INFEASIBLE" }
            );
        }
        s
    }
}

/// Integer allocation of `total` in proportion to `weights` by largest
/// remainders; ties go to the earlier entry.
pub fn largest_remainder(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Allocates `total` housing units over the scheme's strata.
///
/// `target_cv` applies to every group unless `group_targets` (keyed
/// `as<a>-r<r>`) overrides it. Unreachable targets mark the group infeasible
/// rather than failing.
pub fn allocate(
    scheme: &PostStratScheme,
    total: u64,
    model: &PlanningModel,
    target_cv: Option<f64>,
    group_targets: &BTreeMap<String, f64>,
    policy: AllocationPolicy,
) -> Result<SamplePlan> {
    if total == 0 {
        return Err(Error::InvalidInput("total sample must be positive".into()));
    }
    model.validate()?;
    let strata: Vec<(PostStratumKey, f64)> = scheme.strata().iter().map(|s| (s.key, s.share)).collect();

    let units: Vec<u64> = match policy {
        AllocationPolicy::Proportional => largest_remainder(total, &strata.iter().map(|s| s.1).collect::<Vec<_>>()),
        AllocationPolicy::PrecisionWeighted => {
            // Equal CV across groups: n_g ∝ (1 - r_g) / r_g.
            let mut group_share: BTreeMap<DemographicGroup, f64> = BTreeMap::new();
            for (k, share) in &strata {
                *group_share.entry(k.group).or_insert(0.0) += share;
            }
            let groups: Vec<DemographicGroup> = group_share.keys().copied().collect();
            let weights: Vec<f64> = groups
                .iter()
                .map(|g| {
                    let r = model.rate(*g);
                    (1.0 - r) / r
                })
                .collect();
            let per_group: BTreeMap<DemographicGroup, u64> =
                groups.iter().copied().zip(largest_remainder(total, &weights)).collect();
            let mut units = vec![0u64; strata.len()];
            for g in &groups {
                let idx: Vec<usize> = (0..strata.len()).filter(|&i| strata[i].0.group == *g).collect();
                let mut w: Vec<f64> = idx.iter().map(|&i| strata[i].1).collect();
                if w.iter().sum::<f64>() <= 0.0 {
                    w = vec![1.0; idx.len()];
                }
                for (&i, n) in idx.iter().zip(largest_remainder(per_group[g], &w)) {
                    units[i] = n;
                }
            }
            units
        }
    };

    let mut by_group: BTreeMap<DemographicGroup, u64> = BTreeMap::new();
    for ((k, _), n) in strata.iter().zip(&units) {
        *by_group.entry(k.group).or_insert(0) += n;
    }
    let groups = by_group
        .into_iter()
        .map(|(group, n)| {
            let cv = model.cv(n as f64, model.rate(group));
            let target = group_targets.get(&group.to_string()).copied().or(target_cv);
            GroupPlan {
                group,
                housing_units: n,
                cv,
                target_cv: target,
                feasible: target.is_none_or(|t| cv <= t),
            }
        })
        .collect();
    Ok(SamplePlan {
        total_housing_units: total,
        policy,
        strata: strata
            .iter()
            .zip(units)
            .map(|((stratum, _), housing_units)| StratumAllocation {
                stratum: *stratum,
                housing_units,
            })
            .collect(),
        groups,
    })
}
