//! Capture tables and the dual-system estimator.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::popgen::{PostStratumKey, Tenure};
use crate::scheme::{PooledDim, PostStratScheme};

/// Observed cells of the 2x2 capture table. Counts are unweighted; `weight`
/// expands the sampled blocks to the full population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellTable {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub weight: f64,
}

impl CellTable {
    pub fn new(c1: f64, c2: f64, c3: f64, weight: f64) -> Result<Self> {
        let t = CellTable { c1, c2, c3, weight };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be a finite count >= 0, got {v}"
                )));
            }
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidInput(format!("weight must be > 0, got {}", self.weight)));
        }
        Ok(())
    }

    pub fn zero(weight: f64) -> Self {
        CellTable {
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            weight,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        CellTable {
            c1: self.c1 * k,
            c2: self.c2 * k,
            c3: self.c3 * k,
            weight: self.weight,
        }
    }
}

/// A capture table with its stratum and full census count (all records,
/// erroneous ones included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumTable {
    pub stratum: PostStratumKey,
    pub table: CellTable,
    pub census_count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DseEstimate {
    pub stratum: PostStratumKey,
    pub table: CellTable,
    pub dse: f64,
    pub census_count: f64,
    pub net_undercount: f64,
    pub fourth_cell: f64,
    /// Persons missed by both systems beyond independence are never observed.
    pub fifth_cell_unobserved: bool,
}

impl DseEstimate {
    /// Splits net undercount into gross omissions and erroneous enumerations:
    /// `dse - census = (c3 + c2·c3/c1)·w - (census - (c1 + c2)·w)`.
    pub fn gross_flows(&self) -> GrossFlows {
        let w = self.table.weight;
        GrossFlows {
            gross_omissions: self.table.c3 * w + self.fourth_cell,
            erroneous_enumerations: self.census_count - (self.table.c1 + self.table.c2) * w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrossFlows {
    pub gross_omissions: f64,
    pub erroneous_enumerations: f64,
}

fn degenerate(t: &CellTable, stratum: Option<&PostStratumKey>) -> Error {
    Error::DegenerateTable {
        stratum: stratum.map_or_else(|| "<table>".to_string(), |s| s.to_string()),
        c1: t.c1,
    }
}

/// Unweighted fourth cell `c2·c3/c1`.
pub fn fourth_cell(t: &CellTable) -> Result<f64> {
    if t.c1 <= 0.0 {
        return Err(degenerate(t, None));
    }
    Ok(t.c2 * t.c3 / t.c1)
}

pub fn dual_system_estimate(stratum: PostStratumKey, t: &CellTable, census_count: f64) -> Result<DseEstimate> {
    if t.c1 <= 0.0 {
        return Err(degenerate(t, Some(&stratum)));
    }
    let dse = (t.c1 + t.c2) * (t.c1 + t.c3) / t.c1 * t.weight;
    Ok(DseEstimate {
        stratum,
        table: *t,
        dse,
        census_count,
        net_undercount: dse - census_count,
        fourth_cell: t.c2 * t.c3 / t.c1 * t.weight,
        fifth_cell_unobserved: true,
    })
}

pub fn estimate_all(tables: &[StratumTable]) -> Result<Vec<DseEstimate>> {
    tables
        .iter()
        .map(|s| dual_system_estimate(s.stratum, &s.table, s.census_count))
        .collect()
}

/// Raw per-stratum tallies of a resolved match result.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub matched: u64,
    pub respondents: u64,
    pub correct_enumerations: u64,
    /// Census records in the sampled blocks, whatever their status.
    pub sampled_records: u64,
    pub census_count: u64,
}

impl Tally {
    /// `c2 = CE - M`, floored at zero: false matches can push M above CE.
    pub fn to_table(&self, weight: f64) -> CellTable {
        table_from_counts(
            self.matched as f64,
            self.respondents as f64,
            self.correct_enumerations as f64,
            weight,
        )
    }
}

/// Expansion weight of a stratum: its census count over the census records
/// falling in sampled blocks, so that the estimate takes the form
/// `census · (CE / E) · (P / M)`. `fallback` is used when no census record
/// was sampled.
pub fn ratio_weight(census_count: f64, sampled_records: f64, fallback: f64) -> f64 {
    if sampled_records > 0.0 && census_count > 0.0 {
        census_count / sampled_records
    } else {
        fallback
    }
}

pub(crate) fn table_from_counts(matched: f64, respondents: f64, correct: f64, weight: f64) -> CellTable {
    CellTable {
        c1: matched,
        c2: (correct - matched).max(0.0),
        c3: respondents - matched,
        weight,
    }
}

/// Builds one table per scheme stratum; strata without cases get zero tables.
pub fn build_cell_tables(mr: &crate::fieldsim::MatchResult, scheme: &PostStratScheme) -> Result<Vec<StratumTable>> {
    let tallies = mr.tally(scheme)?;
    Ok(scheme
        .keys()
        .map(|stratum| {
            let t = tallies.get(&stratum).copied().unwrap_or_default();
            StratumTable {
                stratum,
                table: t.to_table(ratio_weight(t.census_count as f64, t.sampled_records as f64, mr.weight)),
                census_count: t.census_count as f64,
            }
        })
        .collect())
}

/// Geographic dimensions that strata may be pooled over, coarsest last.
pub const DEFAULT_COLLAPSE_ORDER: [PooledDim; 3] = [PooledDim::Tenure, PooledDim::PlaceType, PooledDim::Region];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeStep {
    pub dim: PooledDim,
    pub into: PostStratumKey,
    pub from: Vec<PostStratumKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collapsed {
    pub tables: Vec<StratumTable>,
    /// Original stratum to the stratum it ended up in.
    pub mapping: BTreeMap<PostStratumKey, PostStratumKey>,
    pub steps: Vec<MergeStep>,
}

impl Collapsed {
    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }
}

fn pooled(key: PostStratumKey, dim: PooledDim) -> PostStratumKey {
    let mut k = key;
    match dim {
        PooledDim::Region => k.region = None,
        PooledDim::PlaceType => k.place_type = None,
        PooledDim::Tenure => k.tenure = None,
    }
    k
}

fn covers_dim<T: PartialEq>(outer: Option<T>, inner: Option<T>) -> bool {
    match (outer, inner) {
        (None, _) => true,
        (Some(a), Some(b)) => a == b,
        (Some(_), None) => false,
    }
}

fn contains(outer: &PostStratumKey, inner: &PostStratumKey) -> bool {
    outer.group == inner.group
        && covers_dim(outer.region, inner.region)
        && covers_dim(outer.place_type, inner.place_type)
        && covers_dim::<Tenure>(outer.tenure, inner.tenure)
}

fn overlaps(a: &PostStratumKey, b: &PostStratumKey) -> bool {
    fn meet<T: PartialEq>(x: Option<T>, y: Option<T>) -> bool {
        match (x, y) {
            (Some(x), Some(y)) => x == y,
            _ => true,
        }
    }
    a.group == b.group && meet(a.region, b.region) && meet(a.place_type, b.place_type) && meet(a.tenure, b.tenure)
}

/// Sums cells and census counts. The pooled weight is total census over
/// total sampled census records, recovered from each part as `census / weight`.
fn pool(stratum: PostStratumKey, parts: &[StratumTable]) -> StratumTable {
    let census: f64 = parts.iter().map(|t| t.census_count).sum();
    let sampled: f64 = parts
        .iter()
        .filter(|t| t.census_count > 0.0)
        .map(|t| t.census_count / t.table.weight)
        .sum();
    let fallback = parts.first().map_or(1.0, |t| t.table.weight);
    let mut table = CellTable::zero(ratio_weight(census, sampled, fallback));
    for t in parts {
        table.c1 += t.table.c1;
        table.c2 += t.table.c2;
        table.c3 += t.table.c3;
    }
    StratumTable {
        stratum,
        table,
        census_count: census,
    }
}

/// Merges strata whose `c1` falls below `min_c1`, pooling along each
/// dimension of `order` in turn. A deficient stratum is merged with every
/// stratum sharing its other coordinates; the merged cells are sums.
pub fn collapse_strata(tables: &[StratumTable], min_c1: f64, order: &[PooledDim]) -> Result<Collapsed> {
    let mut seen = BTreeSet::new();
    for t in tables {
        t.table.validate()?;
        if !seen.insert(t.stratum) {
            return Err(Error::InvalidInput(format!("stratum {} appears twice", t.stratum)));
        }
    }

    let mut current: BTreeMap<PostStratumKey, StratumTable> = tables.iter().map(|t| (t.stratum, *t)).collect();
    let mut mapping: BTreeMap<PostStratumKey, PostStratumKey> = tables.iter().map(|t| (t.stratum, t.stratum)).collect();
    let mut steps = Vec::new();

    for &dim in order {
        let deficient: Vec<PostStratumKey> = current
            .values()
            .filter(|t| t.table.c1 < min_c1)
            .map(|t| t.stratum)
            .collect();
        for key in deficient {
            // Already absorbed by an earlier merge in this pass.
            if !current.contains_key(&key) {
                continue;
            }
            let target = pooled(key, dim);
            if target == key {
                continue;
            }
            let members: Vec<PostStratumKey> = current.keys().filter(|k| contains(&target, k)).copied().collect();
            if current.keys().any(|k| overlaps(&target, k) && !contains(&target, k)) {
                continue;
            }
            let parts: Vec<StratumTable> = members
                .iter()
                .map(|m| current.remove(m).expect("member present"))
                .collect();
            let merged = pool(target, &parts);
            for v in mapping.values_mut() {
                if members.contains(v) {
                    *v = target;
                }
            }
            current.insert(target, merged);
            steps.push(MergeStep {
                dim,
                into: target,
                from: members,
            });
        }
    }

    if let Some(bad) = current.values().find(|t| t.table.c1 < min_c1) {
        return Err(Error::Uncollapsible {
            stratum: bad.stratum,
            c1: bad.table.c1,
            min_c1,
        });
    }
    Ok(Collapsed {
        tables: current.into_values().collect(),
        mapping,
        steps,
    })
}

/// Re-tallies `tables` under an existing collapse mapping, summing cells.
pub fn apply_mapping(
    tables: &[StratumTable],
    mapping: &BTreeMap<PostStratumKey, PostStratumKey>,
) -> Result<Vec<StratumTable>> {
    let mut groups: BTreeMap<PostStratumKey, Vec<StratumTable>> = BTreeMap::new();
    for t in tables {
        let target = *mapping.get(&t.stratum).ok_or(Error::UnknownStratum(t.stratum))?;
        groups.entry(target).or_default().push(*t);
    }
    Ok(groups.iter().map(|(k, parts)| pool(*k, parts)).collect())
}

const TABLE_COLUMNS: [&str; 5] = ["c1", "c2", "c3", "weight", "census_count"];

pub fn write_tables_csv<W: Write>(tables: &[StratumTable], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PostStratumKey::CSV_COLUMNS.iter().chain(TABLE_COLUMNS.iter()))?;
    for t in tables {
        let mut row: Vec<String> = t.stratum.csv_fields().into();
        row.extend([t.table.c1, t.table.c2, t.table.c3, t.table.weight, t.census_count].map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads cell tables; lines starting with `#` are ignored.
pub fn read_tables_csv<R: Read>(r: R) -> Result<Vec<StratumTable>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(name, "missing column"))
    };
    let key_cols = PostStratumKey::CSV_COLUMNS.map(col);
    let key_cols: Vec<usize> = key_cols.into_iter().collect::<Result<_>>()?;
    let num_cols: Vec<usize> = TABLE_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let stratum = PostStratumKey::from_csv_fields([
            get(key_cols[0]),
            get(key_cols[1]),
            get(key_cols[2]),
            get(key_cols[3]),
            get(key_cols[4]),
        ])?;
        let mut nums = [0.0; 5];
        for (slot, (&i, name)) in nums.iter_mut().zip(num_cols.iter().zip(TABLE_COLUMNS)) {
            *slot = get(i)
                .parse()
                .map_err(|_| Error::schema(name, format!("expected a number, got `{}`", get(i))))?;
        }
        let table = CellTable::new(nums[0], nums[1], nums[2], nums[3])?;
        if !(nums[4] >= 0.0) {
            return Err(Error::schema("census_count", "must be >= 0"));
        }
        out.push(StratumTable {
            stratum,
            table,
            census_count: nums[4],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::popgen::DemographicGroup;
    use proptest::prelude::*;

    fn key(age_sex: u8, region: Option<u8>, place: Option<u8>, tenure: Option<Tenure>) -> PostStratumKey {
        PostStratumKey::new(DemographicGroup::new(age_sex, 0), region, place, tenure)
    }

    fn st(k: PostStratumKey, c1: f64, c2: f64, c3: f64) -> StratumTable {
        StratumTable {
            stratum: k,
            table: CellTable::new(c1, c2, c3, 1.0).unwrap(),
            census_count: c1 + c2,
        }
    }

    #[test]
    fn worked_example() {
        let t = CellTable::new(90.0, 10.0, 5.0, 1.0).unwrap();
        assert!((fourth_cell(&t).unwrap() - 0.5555555555555556).abs() < 1e-12);
        let e = dual_system_estimate(key(0, None, None, None), &t, 100.0).unwrap();
        assert!((e.dse - 9500.0 / 90.0).abs() < 1e-12);
        assert!((e.dse - 105.5556).abs() < 5e-5);
        assert!((e.net_undercount - (e.dse - 100.0)).abs() == 0.0);
        assert!(e.fifth_cell_unobserved);
    }

    #[test]
    fn trivial_tables() {
        assert_eq!(fourth_cell(&CellTable::new(7.0, 0.0, 3.0, 1.0).unwrap()).unwrap(), 0.0);
        assert_eq!(
            fourth_cell(&CellTable::new(100.0, 100.0, 100.0, 1.0).unwrap()).unwrap(),
            100.0
        );
        let e = dual_system_estimate(
            key(0, None, None, None),
            &CellTable::new(42.0, 0.0, 0.0, 1.0).unwrap(),
            42.0,
        )
        .unwrap();
        assert_eq!(e.dse, 42.0);
    }

    #[test]
    fn degenerate_table_errors() {
        let t = CellTable::new(0.0, 5.0, 5.0, 1.0).unwrap();
        assert!(matches!(fourth_cell(&t), Err(Error::DegenerateTable { .. })));
        let err = dual_system_estimate(key(1, Some(2), None, None), &t, 5.0).unwrap_err();
        assert!(err.to_string().contains("degenerate table"), "{err}");
    }

    #[test]
    fn gross_flows_reconcile() {
        let t = CellTable::new(80.0, 12.0, 9.0, 2.5).unwrap();
        let e = dual_system_estimate(key(0, None, None, None), &t, 240.0).unwrap();
        let g = e.gross_flows();
        assert!((g.gross_omissions - g.erroneous_enumerations - e.net_undercount).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn dse_decomposes_into_cells(c1 in 1u32..100_000, c2 in 0u32..50_000, c3 in 0u32..50_000, w in 1.0f64..20.0) {
            let t = CellTable::new(c1 as f64, c2 as f64, c3 as f64, w).unwrap();
            let e = dual_system_estimate(key(0, None, None, None), &t, 0.0).unwrap();
            let sum = (t.c1 + t.c2 + t.c3) * w + e.fourth_cell;
            prop_assert!((e.dse - sum).abs() <= 1e-9 * e.dse);
        }

        #[test]
        fn dse_is_homogeneous(c1 in 1u32..10_000, c2 in 0u32..5_000, c3 in 0u32..5_000, k in 0.01f64..100.0) {
            let t = CellTable::new(c1 as f64, c2 as f64, c3 as f64, 1.0).unwrap();
            let a = dual_system_estimate(key(0, None, None, None), &t, 0.0).unwrap().dse;
            let b = dual_system_estimate(key(0, None, None, None), &t.scaled(k), 0.0).unwrap().dse;
            prop_assert!((b - k * a).abs() <= 1e-9 * k * a);
        }

        #[test]
        fn collapsing_preserves_totals(cells in proptest::collection::vec((0u32..20, 0u32..20, 0u32..20), 16), min_c1 in 0u32..40) {
            let mut tables = Vec::new();
            let mut i = 0;
            for region in 0..2u8 {
                for place in 0..4u8 {
                    for tenure in Tenure::ALL {
                        let (c1, c2, c3) = cells[i];
                        i += 1;
                        tables.push(st(key(0, Some(region), Some(place), Some(tenure)), c1 as f64, c2 as f64, c3 as f64));
                    }
                }
            }
            let sum = |ts: &[StratumTable]| ts.iter().fold((0.0, 0.0, 0.0, 0.0), |a, t| (a.0 + t.table.c1, a.1 + t.table.c2, a.2 + t.table.c3, a.3 + t.census_count));
            match collapse_strata(&tables, min_c1 as f64, &DEFAULT_COLLAPSE_ORDER) {
                Ok(c) => {
                    prop_assert_eq!(sum(&c.tables), sum(&tables));
                    prop_assert!(c.tables.iter().all(|t| t.table.c1 >= min_c1 as f64));
                    prop_assert_eq!(apply_mapping(&tables, &c.mapping).unwrap(), c.tables.clone());
                    for (orig, dest) in &c.mapping {
                        prop_assert!(contains(dest, orig));
                    }
                }
                Err(Error::Uncollapsible { .. }) => prop_assert!(sum(&tables).0 < min_c1 as f64),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }

    #[test]
    fn collapse_is_identity_above_threshold() {
        let tables = vec![
            st(key(0, Some(0), None, None), 10.0, 1.0, 1.0),
            st(key(0, Some(1), None, None), 12.0, 1.0, 1.0),
        ];
        let c = collapse_strata(&tables, 5.0, &DEFAULT_COLLAPSE_ORDER).unwrap();
        assert!(c.is_identity());
        assert_eq!(c.tables, tables);
    }

    #[test]
    fn forced_merge_sums_cells() {
        let tables = vec![
            st(key(0, None, None, Some(Tenure::Renter)), 0.0, 5.0, 5.0),
            st(key(0, None, None, Some(Tenure::Owner)), 100.0, 5.0, 5.0),
        ];
        let c = collapse_strata(&tables, 1.0, &DEFAULT_COLLAPSE_ORDER).unwrap();
        assert_eq!(c.tables.len(), 1);
        let t = c.tables[0].table;
        assert_eq!((t.c1, t.c2, t.c3), (100.0, 10.0, 10.0));
        assert_eq!(c.tables[0].stratum, key(0, None, None, None));
    }

    #[test]
    fn pooled_weight_is_census_over_sampled_records() {
        // 300 census records, 100 sampled (w = 3); 200 records, 100 sampled (w = 2)
        let mut a = st(key(0, None, None, Some(Tenure::Renter)), 0.0, 5.0, 5.0);
        a.table.weight = 3.0;
        a.census_count = 300.0;
        let mut b = st(key(0, None, None, Some(Tenure::Owner)), 90.0, 5.0, 5.0);
        b.table.weight = 2.0;
        b.census_count = 200.0;
        let c = collapse_strata(&[a, b], 1.0, &DEFAULT_COLLAPSE_ORDER).unwrap();
        assert_eq!(c.tables[0].table.weight, 2.5);
        assert_eq!(c.tables[0].census_count, 500.0);
        assert_eq!(ratio_weight(0.0, 0.0, 4.0), 4.0);
    }

    #[test]
    fn three_level_hand_trace() {
        // Regions 0-1, place types 0-1, both tenures: 8 strata.
        // (r0,p0,R) is short; pooling tenure gives (r0,p0,*) with c1 = 1 + 2 = 3,
        // still short, so place type is pooled: (r0,*,*) = 3 + (r0,p1,R) + (r0,p1,O).
        // Region 1 is untouched.
        let mut tables = Vec::new();
        let c1 = |r: u8, p: u8, t: Tenure| match (r, p, t) {
            (0, 0, Tenure::Renter) => 1.0,
            (0, 0, Tenure::Owner) => 2.0,
            _ => 10.0,
        };
        for r in 0..2 {
            for p in 0..2 {
                for t in Tenure::ALL {
                    tables.push(st(key(0, Some(r), Some(p), Some(t)), c1(r, p, t), 1.0, 1.0));
                }
            }
        }
        let c = collapse_strata(&tables, 5.0, &DEFAULT_COLLAPSE_ORDER).unwrap();
        let steps: Vec<(PooledDim, PostStratumKey, usize)> =
            c.steps.iter().map(|s| (s.dim, s.into, s.from.len())).collect();
        assert_eq!(
            steps,
            vec![
                (PooledDim::Tenure, key(0, Some(0), Some(0), None), 2),
                (PooledDim::PlaceType, key(0, Some(0), None, None), 3),
            ]
        );
        assert_eq!(c.tables.len(), 5);
        let pooled = c
            .tables
            .iter()
            .find(|t| t.stratum == key(0, Some(0), None, None))
            .unwrap();
        assert_eq!(pooled.table.c1, 23.0);
        assert_eq!(
            c.mapping[&key(0, Some(0), Some(1), Some(Tenure::Owner))],
            key(0, Some(0), None, None)
        );
        assert_eq!(
            c.mapping[&key(0, Some(1), Some(1), Some(Tenure::Owner))],
            key(0, Some(1), Some(1), Some(Tenure::Owner))
        );
    }

    #[test]
    fn uncollapsible_reports_stratum() {
        let tables = vec![
            st(key(0, Some(0), None, None), 1.0, 0.0, 0.0),
            st(key(0, Some(1), None, None), 1.0, 0.0, 0.0),
        ];
        let err = collapse_strata(&tables, 5.0, &DEFAULT_COLLAPSE_ORDER).unwrap_err();
        assert!(matches!(err, Error::Uncollapsible { c1, .. } if c1 == 2.0));
    }

    #[test]
    fn csv_round_trip_and_schema_errors() {
        let tables = vec![
            st(key(0, Some(1), None, Some(Tenure::Owner)), 90.0, 10.0, 5.0),
            st(key(1, None, None, None), 3.5, 0.25, 1.0),
        ];
        let mut buf = Vec::new();
        write_tables_csv(&tables, &mut buf).unwrap();
        let mut with_comment = b"# provenance line\n".to_vec();
        with_comment.extend(&buf);
        assert_eq!(read_tables_csv(with_comment.as_slice()).unwrap(), tables);

        let missing = "age_sex,race,region,place_type,tenure,c1,c2,weight,census_count\n0,0,*,*,*,1,1,1,2\n";
        let err = read_tables_csv(missing.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("`c3`"), "{err}");
        let negative = "age_sex,race,region,place_type,tenure,c1,c2,c3,weight,census_count\n0,0,*,*,*,1,-1,1,1,2\n";
        assert!(read_tables_csv(negative.as_bytes()).is_err());
    }
}
