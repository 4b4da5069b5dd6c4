use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use super::matching::{resolve_stratum, EnumStatus, MatchResult, MatchStatus};
use super::ErrorConfig;
use crate::dse::{dual_system_estimate, ratio_weight, table_from_counts};
use crate::error::{Error, Result};
use crate::popgen::PostStratumKey;
use crate::scheme::PostStratScheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratumBias {
    pub stratum: PostStratumKey,
    /// DSE on the production statuses minus DSE on the corrected statuses.
    pub measured_bias: f64,
    pub standard_error: f64,
    pub cases_reviewed: u64,
    pub status_errors_found: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationResult {
    pub strata: Vec<StratumBias>,
    pub total_bias: f64,
    pub total_standard_error: f64,
    pub cases_reviewed: u64,
}

impl EvaluationResult {
    pub fn by_stratum(&self) -> BTreeMap<PostStratumKey, f64> {
        self.strata.iter().map(|s| (s.stratum, s.measured_bias)).collect()
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    matched: f64,
    respondents: f64,
    correct: f64,
    sampled_records: f64,
    census: f64,
    d_matched: f64,
    d_correct: f64,
    ss_matched: f64,
    ss_correct: f64,
    reviewed: u64,
    found: u64,
}

/// Re-adjudicates a Poisson subsample of cases and extrapolates the status
/// corrections it finds to a per-stratum DSE correction.
///
/// Each case (respondents, then records) draws two uniforms: inclusion at
/// `eval_subsample_fraction`, then recovery of the true status at
/// `eval_accuracy`; an unrecovered case keeps its production status.
/// Corrections are weighted by the inverse inclusion probability. Strata are
/// those of `scheme`, passed through `mapping` when tables were collapsed.
/// The standard error linearizes the DSE in the matched and
/// correct-enumeration totals.
pub fn evaluation_study<R: Rng + ?Sized>(
    truth: &MatchResult,
    resolved: &MatchResult,
    scheme: &PostStratScheme,
    mapping: Option<&BTreeMap<PostStratumKey, PostStratumKey>>,
    err: &ErrorConfig,
    rng: &mut R,
) -> Result<EvaluationResult> {
    if truth.respondents.len() != resolved.respondents.len()
        || truth.records.len() != resolved.records.len()
        || truth
            .respondents
            .iter()
            .zip(&resolved.respondents)
            .any(|(a, b)| a.person != b.person)
        || truth
            .records
            .iter()
            .zip(&resolved.records)
            .any(|(a, b)| a.record != b.record)
    {
        return Err(Error::CaseMismatch(
            "truth and production results cover different cases".into(),
        ));
    }
    if truth.has_unresolved() || resolved.has_unresolved() {
        return Err(Error::InvalidInput(
            "evaluation needs resolved statuses; impute first".into(),
        ));
    }
    let f = err.eval_subsample_fraction.get();
    let accuracy = err.eval_accuracy.get();
    let target = |stratum: &PostStratumKey, c: &crate::popgen::GeographyKey| -> Result<PostStratumKey> {
        let k = resolve_stratum(scheme, stratum, &c.area_key())?;
        match mapping {
            Some(m) => m.get(&k).copied().ok_or(Error::UnknownStratum(k)),
            None => Ok(k),
        }
    };

    let mut acc: BTreeMap<PostStratumKey, Acc> = BTreeMap::new();
    let mut reviewed = 0u64;
    let mut review = |rng: &mut R, a: &mut Acc, truth_hit: bool, prod_hit: bool| -> Option<f64> {
        let (u_sub, u_acc): (f64, f64) = (rng.random(), rng.random());
        if u_sub >= f {
            return None;
        }
        reviewed += 1;
        a.reviewed += 1;
        let observed = if u_acc < accuracy { truth_hit } else { prod_hit };
        if observed != prod_hit {
            a.found += 1;
        }
        Some((observed as i32 - prod_hit as i32) as f64 / f)
    };

    for (t, p) in truth.respondents.iter().zip(&resolved.respondents) {
        let a = acc.entry(target(&p.stratum, &p.geo)?).or_default();
        let prod_hit = p.status == MatchStatus::Matched;
        a.respondents += 1.0;
        a.matched += prod_hit as u8 as f64;
        if let Some(z) = review(rng, a, t.status == MatchStatus::Matched, prod_hit) {
            a.d_matched += z;
            a.ss_matched += z * z;
        }
    }
    for (t, p) in truth.records.iter().zip(&resolved.records) {
        let a = acc.entry(target(&p.stratum, &p.geo)?).or_default();
        let prod_hit = p.status == EnumStatus::CorrectEnumeration;
        a.correct += prod_hit as u8 as f64;
        a.sampled_records += 1.0;
        if let Some(z) = review(rng, a, t.status == EnumStatus::CorrectEnumeration, prod_hit) {
            a.d_correct += z;
            a.ss_correct += z * z;
        }
    }
    if reviewed == 0 {
        return Err(Error::EmptySubsample);
    }
    for ((stratum, area), n) in &resolved.census_cells {
        let k = resolve_stratum(scheme, stratum, area)?;
        let k = match mapping {
            Some(m) => m.get(&k).copied().ok_or(Error::UnknownStratum(k))?,
            None => k,
        };
        acc.entry(k).or_default().census += *n as f64;
    }

    let mut strata = Vec::with_capacity(acc.len());
    for (stratum, a) in acc {
        let w = ratio_weight(a.census, a.sampled_records, resolved.weight);
        let production = table_from_counts(a.matched, a.respondents, a.correct, w);
        let corrected = table_from_counts(a.matched + a.d_matched, a.respondents, a.correct + a.d_correct, w);
        let bias = if a.found == 0 {
            0.0
        } else {
            dual_system_estimate(stratum, &production, 0.0)?.dse - dual_system_estimate(stratum, &corrected, 0.0)?.dse
        };
        let (m, ce, p) = (corrected.c1, corrected.c1 + corrected.c2, a.respondents);
        let se = if m > 0.0 {
            let g_m = -w * ce * p / (m * m);
            let g_ce = w * p / m;
            ((g_m * g_m * a.ss_matched + g_ce * g_ce * a.ss_correct) * (1.0 - f)).sqrt()
        } else {
            0.0
        };
        strata.push(StratumBias {
            stratum,
            measured_bias: bias,
            standard_error: se,
            cases_reviewed: a.reviewed,
            status_errors_found: a.found,
        });
    }
    Ok(EvaluationResult {
        total_bias: strata.iter().map(|s| s.measured_bias).sum(),
        total_standard_error: strata.iter().map(|s| s.standard_error.powi(2)).sum::<f64>().sqrt(),
        cases_reviewed: reviewed,
        strata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::{build_cell_tables, estimate_all};
    use crate::fieldsim::{draw_psample, impute_unresolved, perturb, simulate_census, true_match, ImputationPolicy};
    use crate::popgen::{generate_population, CaptureModel, CaptureParams, Geography, PopulationConfig};
    use crate::prob::Probability;
    use crate::rng::seeded;
    use std::sync::Arc;

    fn setup(err: &ErrorConfig, seed: u64) -> (PostStratScheme, MatchResult, MatchResult) {
        let scheme = PostStratScheme::demographic(2, 2, 1, 1).unwrap();
        let geo = Arc::new(Geography::grid(1, 1, 4, 10).unwrap());
        let cfg = PopulationConfig::uniform(
            &scheme,
            geo,
            500,
            CaptureModel::uniform(CaptureParams::new(0.92, 0.88, 1.0).unwrap()),
            Probability::new(0.1).unwrap(),
        );
        let pop = generate_population(&cfg, &mut seeded(seed)).unwrap();
        let census = simulate_census(&pop, err, &mut seeded(seed + 1));
        let ps = draw_psample(&pop, 1.0, &mut seeded(seed + 2)).unwrap();
        let truth = true_match(&census, &ps);
        let resolved = impute_unresolved(
            &perturb(&truth, err, &mut seeded(seed + 3)),
            ImputationPolicy::default(),
            &mut seeded(seed + 4),
        )
        .unwrap();
        (scheme, truth, resolved)
    }

    fn dse_by_stratum(mr: &MatchResult, scheme: &PostStratScheme) -> BTreeMap<PostStratumKey, f64> {
        estimate_all(&build_cell_tables(mr, scheme).unwrap())
            .unwrap()
            .into_iter()
            .map(|e| (e.stratum, e.dse))
            .collect()
    }

    #[test]
    fn perfect_review_recovers_effect_exactly() {
        let err = ErrorConfig {
            eval_subsample_fraction: Probability::ONE,
            eval_accuracy: Probability::ONE,
            ..ErrorConfig::illustrative()
        };
        let (scheme, truth, resolved) = setup(&err, 10);
        let r = evaluation_study(&truth, &resolved, &scheme, None, &err, &mut seeded(5)).unwrap();
        let d_true = dse_by_stratum(&truth, &scheme);
        let d_prod = dse_by_stratum(&resolved, &scheme);
        for s in &r.strata {
            assert_eq!(s.measured_bias, d_prod[&s.stratum] - d_true[&s.stratum]);
            assert_eq!(s.standard_error, 0.0);
        }
        assert!(r.strata.iter().any(|s| s.measured_bias != 0.0));
    }

    #[test]
    fn no_errors_means_no_bias() {
        let err = ErrorConfig {
            eval_subsample_fraction: Probability::new(0.3).unwrap(),
            ..ErrorConfig::none()
        };
        let (scheme, truth, resolved) = setup(&err, 20);
        let r = evaluation_study(&truth, &resolved, &scheme, None, &err, &mut seeded(1)).unwrap();
        assert_eq!(r.total_bias, 0.0);
        assert!(r.cases_reviewed > 0);
    }

    #[test]
    fn empty_subsample_is_an_error() {
        let err = ErrorConfig {
            eval_subsample_fraction: Probability::ZERO,
            ..ErrorConfig::none()
        };
        let (scheme, truth, resolved) = setup(&err, 30);
        assert!(matches!(
            evaluation_study(&truth, &resolved, &scheme, None, &err, &mut seeded(1)),
            Err(Error::EmptySubsample)
        ));
    }

    #[test]
    fn mismatched_cases_rejected() {
        let err = ErrorConfig::none();
        let (scheme, truth, mut resolved) = setup(&err, 40);
        resolved.respondents.pop();
        assert!(matches!(
            evaluation_study(&truth, &resolved, &scheme, None, &err, &mut seeded(1)),
            Err(Error::CaseMismatch(_))
        ));
    }

    #[test]
    fn half_accuracy_finds_about_half() {
        let base = ErrorConfig {
            eval_subsample_fraction: Probability::ONE,
            eval_accuracy: Probability::ONE,
            ..ErrorConfig::illustrative()
        };
        let (scheme, truth, resolved) = setup(&base, 50);
        let full = evaluation_study(&truth, &resolved, &scheme, None, &base, &mut seeded(1))
            .unwrap()
            .total_bias;
        let half = ErrorConfig {
            eval_accuracy: Probability::new(0.5).unwrap(),
            ..base
        };
        let reps = 300;
        let draws: Vec<f64> = (0..reps)
            .map(|s| {
                evaluation_study(&truth, &resolved, &scheme, None, &half, &mut seeded(100 + s))
                    .unwrap()
                    .total_bias
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        // The DSE is nearly linear in the corrections at this size; allow the
        // Monte Carlo error plus 2% curvature.
        let tol = 4.0 * sd / (reps as f64).sqrt() + 0.02 * full.abs();
        assert!((mean - 0.5 * full).abs() < tol, "mean {mean}, full {full}");
    }
}
