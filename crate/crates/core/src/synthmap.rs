//! Synthetic estimation: stratum coverage factors applied to small areas.

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use crate::dse::DseEstimate;
use crate::error::{Error, Result};
use crate::fieldsim::EnumerationFile;
use crate::popgen::{AreaKey, PostStratumKey};
use crate::scheme::PostStratScheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjustmentFactor {
    pub stratum: PostStratumKey,
    pub factor: f64,
}

/// `dse / census_count` per estimated stratum.
pub fn adjustment_factors(estimates: &[DseEstimate]) -> Result<Vec<AdjustmentFactor>> {
    estimates
        .iter()
        .map(|e| {
            if e.census_count <= 0.0 {
                return Err(Error::ZeroCensusCount(e.stratum));
            }
            Ok(AdjustmentFactor {
                stratum: e.stratum,
                factor: e.dse / e.census_count,
            })
        })
        .collect()
}

/// Factor for every original scheme stratum, looked up through a collapse
/// mapping (original -> estimated stratum).
pub fn expand_factors(
    factors: &[AdjustmentFactor],
    mapping: &BTreeMap<PostStratumKey, PostStratumKey>,
) -> Result<BTreeMap<PostStratumKey, f64>> {
    let by_key: BTreeMap<PostStratumKey, f64> = factors.iter().map(|f| (f.stratum, f.factor)).collect();
    mapping
        .iter()
        .map(|(orig, est)| by_key.get(est).map(|f| (*orig, *f)).ok_or(Error::MissingFactor(*est)))
        .collect()
}

/// Sums `factor(stratum) × census` into each unit `K`.
pub fn carry_down<K, I>(factors: &BTreeMap<PostStratumKey, f64>, census: I) -> Result<BTreeMap<K, f64>>
where
    K: Ord,
    I: IntoIterator<Item = (K, PostStratumKey, f64)>,
{
    let mut out = BTreeMap::new();
    for (unit, stratum, count) in census {
        let f = factors.get(&stratum).ok_or(Error::MissingFactor(stratum))?;
        *out.entry(unit).or_insert(0.0) += f * count;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaEstimate {
    pub area: AreaKey,
    pub adjusted_count: f64,
    pub census_count: f64,
    /// Known only in simulation.
    pub true_count: Option<f64>,
}

/// Area-level synthetic estimates from census counts per (recorded stratum,
/// area). Each record's stratum is resolved under `scheme`, and factors are
/// keyed by scheme stratum (see [`expand_factors`]). Areas present in `truth`
/// but without census records get zero counts.
pub fn area_estimates(
    factors: &BTreeMap<PostStratumKey, f64>,
    census_cells: &BTreeMap<(PostStratumKey, AreaKey), u64>,
    scheme: &PostStratScheme,
    truth: Option<&BTreeMap<AreaKey, u64>>,
) -> Result<Vec<AreaEstimate>> {
    let mut rows = Vec::with_capacity(census_cells.len());
    let mut census: BTreeMap<AreaKey, f64> = BTreeMap::new();
    for ((stratum, area), n) in census_cells {
        let key = crate::fieldsim::resolve_stratum(scheme, stratum, area)?;
        rows.push((*area, key, *n as f64));
        *census.entry(*area).or_insert(0.0) += *n as f64;
    }
    let adjusted = carry_down(factors, rows)?;
    let mut areas: BTreeSet<AreaKey> = census.keys().copied().collect();
    if let Some(t) = truth {
        areas.extend(t.keys().copied());
    }
    Ok(areas
        .into_iter()
        .map(|area| AreaEstimate {
            area,
            adjusted_count: adjusted.get(&area).copied().unwrap_or(0.0),
            census_count: census.get(&area).copied().unwrap_or(0.0),
            true_count: truth.map(|t| t.get(&area).copied().unwrap_or(0) as f64),
        })
        .collect())
}

/// Block-level synthetic counts. Demonstration only: coverage factors carry
/// no information about block-level coverage, and these numbers should not
/// be read as estimates.
pub fn block_estimates_demo(
    factors: &BTreeMap<PostStratumKey, f64>,
    census: &EnumerationFile,
    scheme: &PostStratScheme,
) -> Result<BTreeMap<u32, f64>> {
    let rows = census
        .records
        .iter()
        .map(|r| crate::fieldsim::resolve_stratum(scheme, &r.stratum, &r.geo.area_key()).map(|k| (r.geo.block, k, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    carry_down(factors, rows)
}

pub fn write_factors_csv<W: Write>(factors: &[AdjustmentFactor], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PostStratumKey::CSV_COLUMNS.iter().chain(["factor"].iter()))?;
    for f in factors {
        let mut row: Vec<String> = f.stratum.csv_fields().into();
        row.push(f.factor.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_areas_csv<W: Write>(areas: &[AreaEstimate], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "region",
        "place_type",
        "area",
        "census_count",
        "adjusted_count",
        "true_count",
    ])?;
    for a in areas {
        out.write_record([
            a.area.region.to_string(),
            a.area.place_type.to_string(),
            a.area.area.to_string(),
            a.census_count.to_string(),
            a.adjusted_count.to_string(),
            a.true_count.map_or_else(String::new, |t| t.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaLoss {
    pub area: AreaKey,
    /// adjusted - true, in persons.
    pub signed_error: f64,
    pub adjusted_share_error: f64,
    pub census_share_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionLoss {
    pub region: u8,
    /// Signed share error of the whole region after adjustment.
    pub adjusted_share_error: f64,
    pub census_share_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub areas: Vec<AreaLoss>,
    pub regions: Vec<RegionLoss>,
    /// Sum over areas of |adjusted share - true share|.
    pub adjusted_share_loss: f64,
    pub census_share_loss: f64,
    pub improved: bool,
    pub worst_area: AreaKey,
    pub worst_area_error: f64,
}

impl LossReport {
    /// Region whose adjusted share is furthest from its true share.
    pub fn worst_region(&self) -> Option<u8> {
        self.regions
            .iter()
            .max_by(|a, b| a.adjusted_share_error.abs().total_cmp(&b.adjusted_share_error.abs()))
            .map(|r| r.region)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "share loss, adjusted: {:.6}", self.adjusted_share_loss);
        let _ = writeln!(s, "share loss, census:   {:.6}", self.census_share_loss);
        let _ = writeln!(
            s,
            "adjustment {} shares",
            if self.improved { "improved" } else { "did not improve" }
        );
        let _ = writeln!(
            s,
            "worst area: {} ({:+.1} persons)",
            self.worst_area, self.worst_area_error
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<8} {:>16} {:>16}", "region", "adj share err", "census share err");
        for r in &self.regions {
            let _ = writeln!(
                s,
                "{:<8} {:>16.6} {:>16.6}",
                r.region, r.adjusted_share_error, r.census_share_error
            );
        }
        s
    }
}

/// Compares adjusted and raw census shares against true shares.
pub fn geography_loss(estimates: &[AreaEstimate]) -> Result<LossReport> {
    let truth: Vec<f64> = estimates
        .iter()
        .map(|e| e.true_count.ok_or(Error::MissingTruth))
        .collect::<Result<_>>()?;
    let total_true: f64 = truth.iter().sum();
    let total_adj: f64 = estimates.iter().map(|e| e.adjusted_count).sum();
    let total_census: f64 = estimates.iter().map(|e| e.census_count).sum();
    if total_true <= 0.0 || total_adj <= 0.0 || total_census <= 0.0 {
        return Err(Error::InvalidInput(
            "shares need positive true, adjusted and census totals".into(),
        ));
    }

    let mut areas = Vec::with_capacity(estimates.len());
    let mut regions: BTreeMap<u8, (f64, f64)> = BTreeMap::new();
    for (e, t) in estimates.iter().zip(&truth) {
        let share_true = t / total_true;
        let loss = AreaLoss {
            area: e.area,
            signed_error: e.adjusted_count - t,
            adjusted_share_error: e.adjusted_count / total_adj - share_true,
            census_share_error: e.census_count / total_census - share_true,
        };
        let r = regions.entry(e.area.region).or_default();
        r.0 += loss.adjusted_share_error;
        r.1 += loss.census_share_error;
        areas.push(loss);
    }
    let adjusted_share_loss = areas.iter().map(|a| a.adjusted_share_error.abs()).sum();
    let census_share_loss = areas.iter().map(|a| a.census_share_error.abs()).sum();
    let worst = areas
        .iter()
        .max_by(|a, b| a.signed_error.abs().total_cmp(&b.signed_error.abs()))
        .ok_or_else(|| Error::InvalidInput("no areas".into()))?;
    Ok(LossReport {
        worst_area: worst.area,
        worst_area_error: worst.signed_error,
        regions: regions
            .into_iter()
            .map(|(region, (a, c))| RegionLoss {
                region,
                adjusted_share_error: a,
                census_share_error: c,
            })
            .collect(),
        improved: adjusted_share_loss < census_share_loss,
        adjusted_share_loss,
        census_share_loss,
        areas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::{dual_system_estimate, CellTable};
    use crate::popgen::DemographicGroup;
    use crate::rng::seeded;
    use rand::Rng;

    fn key(i: u8) -> PostStratumKey {
        PostStratumKey::demographic(DemographicGroup::new(i, 0))
    }

    fn area(i: u32) -> AreaKey {
        AreaKey {
            region: (i % 2) as u8,
            place_type: 0,
            area: i,
        }
    }

    #[test]
    fn factor_arithmetic() {
        let e = dual_system_estimate(key(0), &CellTable::new(90.0, 10.0, 5.0, 1.0).unwrap(), 100.0).unwrap();
        let f = adjustment_factors(&[e]).unwrap();
        assert!((f[0].factor - 9500.0 / 9000.0).abs() < 1e-15);
        assert!((f[0].factor - 1.0556).abs() < 5e-5);
        let same = dual_system_estimate(key(0), &CellTable::new(100.0, 0.0, 0.0, 1.0).unwrap(), 100.0).unwrap();
        assert_eq!(adjustment_factors(&[same]).unwrap()[0].factor, 1.0);
        let zero = dual_system_estimate(key(1), &CellTable::new(1.0, 0.0, 0.0, 1.0).unwrap(), 0.0).unwrap();
        assert!(matches!(adjustment_factors(&[zero]), Err(Error::ZeroCensusCount(_))));
    }

    #[test]
    fn collapsed_factor_reaches_members() {
        let merged = key(9);
        let factors = vec![AdjustmentFactor {
            stratum: merged,
            factor: 1.2,
        }];
        let mapping = BTreeMap::from([(key(0), merged), (key(1), merged)]);
        let f = expand_factors(&factors, &mapping).unwrap();
        assert_eq!(f[&key(0)], 1.2);
        assert_eq!(f[&key(1)], 1.2);
        let broken = BTreeMap::from([(key(0), key(5))]);
        assert!(matches!(
            expand_factors(&factors, &broken),
            Err(Error::MissingFactor(_))
        ));
    }

    #[test]
    fn proportional_carry_down() {
        let factors = BTreeMap::from([(key(0), 1.1)]);
        let out = carry_down(&factors, [(0u32, key(0), 60.0), (1, key(0), 40.0)]).unwrap();
        assert!((out[&0] - 66.0).abs() < 1e-12);
        assert!((out[&1] - 44.0).abs() < 1e-12);
        let ones = BTreeMap::from([(key(0), 1.0)]);
        assert_eq!(carry_down(&ones, [(3u32, key(0), 17.0)]).unwrap()[&3], 17.0);
        assert!(matches!(
            carry_down(&ones, [(3u32, key(1), 1.0)]),
            Err(Error::MissingFactor(_))
        ));
    }

    #[test]
    fn random_toy_is_additive() {
        let mut rng = seeded(12);
        for _ in 0..200 {
            let mut estimates = Vec::new();
            let mut rows = Vec::new();
            for s in 0..5u8 {
                let counts: Vec<f64> = (0..4).map(|_| rng.random_range(1..500) as f64).collect();
                let census: f64 = counts.iter().sum();
                let t = CellTable::new(
                    rng.random_range(1..400) as f64,
                    rng.random_range(0..50) as f64,
                    rng.random_range(0..50) as f64,
                    1.0,
                )
                .unwrap();
                estimates.push(dual_system_estimate(key(s), &t, census).unwrap());
                for (a, c) in counts.into_iter().enumerate() {
                    rows.push((a as u32, s, c));
                }
            }
            let factors: BTreeMap<_, _> = adjustment_factors(&estimates)
                .unwrap()
                .into_iter()
                .map(|f| (f.stratum, f.factor))
                .collect();
            // Per-stratum sums over areas equal each stratum's DSE.
            for e in &estimates {
                let s = e.stratum.group.age_sex;
                let by_area = carry_down(
                    &factors,
                    rows.iter().filter(|r| r.1 == s).map(|&(a, s, c)| (a, key(s), c)),
                )
                .unwrap();
                let sum: f64 = by_area.values().sum();
                assert!((sum - e.dse).abs() <= 1e-9 * e.dse);
            }
        }
    }

    #[test]
    fn loss_is_zero_for_perfect_estimates() {
        let est: Vec<AreaEstimate> = (0..4)
            .map(|i| AreaEstimate {
                area: area(i),
                adjusted_count: 100.0 + i as f64,
                census_count: 95.0,
                true_count: Some(100.0 + i as f64),
            })
            .collect();
        let r = geography_loss(&est).unwrap();
        assert_eq!(r.adjusted_share_loss, 0.0);
        assert!(r.census_share_loss > 0.0);
        assert!(r.improved);
        assert!(r.to_text().contains("improved"));
    }

    #[test]
    fn loss_needs_truth() {
        let est = [AreaEstimate {
            area: area(0),
            adjusted_count: 1.0,
            census_count: 1.0,
            true_count: None,
        }];
        assert!(matches!(geography_loss(&est), Err(Error::MissingTruth)));
    }

    #[test]
    fn regional_shortfall_shows_in_that_region() {
        // Region 1 areas are short by 10%; region 0 is exact.
        let est: Vec<AreaEstimate> = (0..6)
            .map(|i| AreaEstimate {
                area: area(i),
                adjusted_count: if i % 2 == 1 { 90.0 } else { 100.0 },
                census_count: 90.0,
                true_count: Some(100.0),
            })
            .collect();
        let r = geography_loss(&est).unwrap();
        assert!(r.adjusted_share_loss > 0.0);
        assert_eq!(r.worst_region(), Some(1));
        let reg1 = r.regions.iter().find(|x| x.region == 1).unwrap();
        assert!(reg1.adjusted_share_error < 0.0);
        let sum: f64 = r.regions.iter().map(|x| x.adjusted_share_error).sum();
        assert!(sum.abs() < 1e-12);
    }
}
