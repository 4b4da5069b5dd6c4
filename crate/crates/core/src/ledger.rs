//! Coverage-error ledger: DSE, processing error, corrected estimate, doubly
//! missing people and the demographic-analysis benchmark.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fieldsim::{resolve_stratum, EnumerationFile, RecordKind};
use crate::popgen::{DemographicGroup, Population, PostStratumKey};
use crate::prob::Probability;
use crate::scheme::{PostStratScheme, Sex};

/// Exact signed amount in millions, stored in thousandths of a million
/// (i.e. thousands of persons).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Millions(i64);

impl Millions {
    pub const ZERO: Millions = Millions(0);

    pub const fn from_thousandths(v: i64) -> Self {
        Millions(v)
    }

    pub fn thousandths(self) -> i64 {
        self.0
    }

    /// Nearest thousand persons.
    pub fn from_persons(persons: f64) -> Self {
        Millions((persons / 1000.0).round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Signed, one decimal, half away from zero: `+4.7`, `-2.2`, `0.0`.
    pub fn display_tenths(self) -> String {
        let tenths = (self.0.abs() + 50) / 100;
        let sign = match (self.0 < 0, tenths) {
            (_, 0) => "",
            (true, _) => "-",
            (false, _) => "+",
        };
        format!("{sign}{}.{}", tenths / 10, tenths % 10)
    }
}

impl fmt::Display for Millions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{:03}", self.0.abs() / 1000, self.0.abs() % 1000)
    }
}

impl FromStr for Millions {
    type Err = String;

    /// Decimal with at most three fractional digits, optional sign.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        let (neg, body) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || (!frac.is_empty() && !digits(frac)) || frac.len() > 3 {
            return Err(format!("expected a decimal with at most 3 places, got `{s}`"));
        }
        let whole: i64 = int.parse().map_err(|_| format!("`{s}` is out of range"))?;
        let frac_val: i64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<3}").parse().expect("digits")
        };
        let v = whole
            .checked_mul(1000)
            .and_then(|w| w.checked_add(frac_val))
            .ok_or_else(|| format!("`{s}` is out of range"))?;
        Ok(Millions(if neg { -v } else { v }))
    }
}

impl Add for Millions {
    type Output = Millions;
    fn add(self, rhs: Millions) -> Millions {
        Millions(self.0 + rhs.0)
    }
}

impl Sub for Millions {
    type Output = Millions;
    fn sub(self, rhs: Millions) -> Millions {
        Millions(self.0 - rhs.0)
    }
}

impl Neg for Millions {
    type Output = Millions;
    fn neg(self) -> Millions {
        Millions(-self.0)
    }
}

/// What a ledger or DA figure refers to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Scope {
    National,
    Group(DemographicGroup),
    Region(u8),
    Area(u32),
    /// A national-level label such as a census year.
    Named(String),
}

impl Scope {
    pub fn is_geographic(&self) -> bool {
        matches!(self, Scope::Region(_) | Scope::Area(_))
    }

    /// `national`, `as<a>-r<r>`, `region:<n>`, `area:<n>`; anything else is a
    /// national-level name.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        if s.eq_ignore_ascii_case("national") {
            return Scope::National;
        }
        if let Some(n) = s.strip_prefix("region:").and_then(|n| n.parse().ok()) {
            return Scope::Region(n);
        }
        if let Some(n) = s.strip_prefix("area:").and_then(|n| n.parse().ok()) {
            return Scope::Area(n);
        }
        if let Some((a, r)) = s.strip_prefix("as").and_then(|x| x.split_once("-r")) {
            if let (Ok(a), Ok(r)) = (a.parse(), r.parse()) {
                return Scope::Group(DemographicGroup::new(a, r));
            }
        }
        Scope::Named(s.to_string())
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::National => f.write_str("national"),
            Scope::Group(g) => write!(f, "{g}"),
            Scope::Region(r) => write!(f, "region:{r}"),
            Scope::Area(a) => write!(f, "area:{a}"),
            Scope::Named(n) => f.write_str(n),
        }
    }
}

/// The five-row decomposition. `processing_error` is the amount subtracted
/// from the DSE undercount; the two derived rows are never stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageLedger<T> {
    pub scope: Scope,
    pub dse_undercount: T,
    pub processing_error: T,
    pub da_undercount: T,
}

impl<T: Copy + Add<Output = T> + Sub<Output = T>> CoverageLedger<T> {
    pub fn corrected(&self) -> T {
        self.dse_undercount - self.processing_error
    }

    pub fn doubly_missing(&self) -> T {
        self.da_undercount - self.corrected()
    }

    /// Rebuilds a ledger from its derived rows and the processing error.
    pub fn from_derived(scope: Scope, corrected: T, processing_error: T, doubly_missing: T) -> Self {
        CoverageLedger {
            scope,
            dse_undercount: corrected + processing_error,
            processing_error,
            da_undercount: doubly_missing + corrected,
        }
    }
}

pub fn decompose<T>(scope: Scope, dse_undercount: T, processing_error: T, da_undercount: T) -> CoverageLedger<T> {
    CoverageLedger {
        scope,
        dse_undercount,
        processing_error,
        da_undercount,
    }
}

pub fn da_net_undercount<T: Sub<Output = T>>(da_total: T, census_total: T) -> T {
    da_total - census_total
}

/// One row of an audit input file, in millions.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub scope: Scope,
    pub dse_undercount: Millions,
    pub processing_error: Millions,
    pub da_total: Millions,
    pub census_total: Millions,
}

impl AuditRow {
    pub fn ledger(&self) -> Result<CoverageLedger<Millions>> {
        if self.scope.is_geographic() {
            return Err(Error::GeographicScope(self.scope.to_string()));
        }
        Ok(decompose(
            self.scope.clone(),
            self.dse_undercount,
            self.processing_error,
            da_net_undercount(self.da_total, self.census_total),
        ))
    }
}

pub const AUDIT_COLUMNS: [&str; 5] = [
    "scope",
    "dse_undercount",
    "processing_error",
    "da_total",
    "census_total",
];

/// Reads an audit CSV. Lines starting with `#` are ignored.
pub fn read_audit_csv<R: Read>(r: R) -> Result<Vec<AuditRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::InvalidInput("audit file is empty".into()));
    }
    let idx: Vec<usize> = AUDIT_COLUMNS
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| Error::schema(*c, "missing column"))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let num = |i: usize| -> Result<Millions> { field(i).parse().map_err(|e| Error::schema(AUDIT_COLUMNS[i], e)) };
        rows.push(AuditRow {
            scope: Scope::parse(field(0)),
            dse_undercount: num(1)?,
            processing_error: num(2)?,
            da_total: num(3)?,
            census_total: num(4)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("audit file has no data rows".into()));
    }
    Ok(rows)
}

const ROW_LABELS: [&str; 5] = [
    "Dual-System Estimate",
    "Processing Error",
    "Corrected Survey Estimate",
    "Doubly Missing People",
    "DA Estimate",
];

/// Displayed rows; processing error is shown negated.
fn display_rows(l: &CoverageLedger<Millions>) -> [Millions; 5] {
    [
        l.dse_undercount,
        -l.processing_error,
        l.corrected(),
        l.doubly_missing(),
        l.da_undercount,
    ]
}

/// Coverage-error table as text: one column per ledger, rule rows after the
/// processing-error and doubly-missing rows.
pub fn render_table(ledgers: &[CoverageLedger<Millions>]) -> String {
    let label_w = ROW_LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
    let col_w = ledgers
        .iter()
        .map(|l| l.scope.to_string().len())
        .max()
        .unwrap_or(0)
        .max(6);
    let mut s = String::new();
    let _ = writeln!(s, "Coverage error (millions)");
    let _ = write!(s, "{:label_w$}", "");
    for l in ledgers {
        let _ = write!(s, "  {:>col_w$}", l.scope.to_string());
    }
    s.push('\n');
    let cols: Vec<[Millions; 5]> = ledgers.iter().map(display_rows).collect();
    for (i, label) in ROW_LABELS.iter().enumerate() {
        let _ = write!(s, "{label:label_w$}");
        for c in &cols {
            let _ = write!(s, "  {:>col_w$}", c[i].display_tenths());
        }
        s.push('\n');
        if i == 1 || i == 3 {
            let _ = write!(s, "{:label_w$}", "");
            for _ in &cols {
                let _ = write!(s, "  {:>col_w$}", "-".repeat(4));
            }
            s.push('\n');
        }
    }
    s
}

/// Long-format CSV (scope,row,value_millions,display) at full precision.
pub fn write_ledger_csv<W: Write>(ledgers: &[CoverageLedger<Millions>], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scope", "row", "value_millions", "display"])?;
    let keys = [
        "dual_system_estimate",
        "processing_error",
        "corrected_survey_estimate",
        "doubly_missing",
        "da_estimate",
    ];
    for l in ledgers {
        for (key, v) in keys.iter().zip(display_rows(l)) {
            out.write_record([l.scope.to_string(), key.to_string(), v.to_string(), v.display_tenths()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// National totals by demographic group. There are deliberately no
/// geographic fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DaTotals {
    pub cells: BTreeMap<DemographicGroup, f64>,
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SexTotals {
    pub male: f64,
    pub female: f64,
    /// Persons in age-sex classes that do not separate the sexes.
    pub merged: f64,
    /// Set when any class is sex-merged, so sex totals are incomplete.
    pub sex_merged_classes: bool,
}

impl DaTotals {
    /// True totals from the simulated population, each cell optionally
    /// perturbed by independent `Normal(0, sd)` noise.
    pub fn from_truth<R: Rng + ?Sized>(pop: &Population, noise_sd: Option<f64>, rng: &mut R) -> Result<Self> {
        let noise = match noise_sd {
            Some(sd) => Some(
                Normal::new(0.0, sd)
                    .map_err(|_| Error::InvalidConfig(format!("DA noise sd must be >= 0, got {sd}")))?,
            ),
            None => None,
        };
        let cells = pop
            .by_demographic_group()
            .into_iter()
            .map(|(g, n)| (g, n as f64 + noise.map_or(0.0, |d| d.sample(rng))))
            .collect();
        Ok(DaTotals { cells, noise_sd })
    }

    pub fn total(&self) -> f64 {
        self.cells.values().sum()
    }

    pub fn for_scope(&self, scope: &Scope) -> Result<f64> {
        match scope {
            Scope::National | Scope::Named(_) => Ok(self.total()),
            Scope::Group(g) => Ok(self.cells.get(g).copied().unwrap_or(0.0)),
            geo => Err(Error::GeographicScope(geo.to_string())),
        }
    }

    pub fn by_sex(&self, scheme: &PostStratScheme) -> SexTotals {
        let mut t = SexTotals {
            male: 0.0,
            female: 0.0,
            merged: 0.0,
            sex_merged_classes: scheme.has_sex_merged_classes(),
        };
        for (g, v) in &self.cells {
            match scheme.sex_of_class(g.age_sex) {
                Some(Sex::Male) => t.male += v,
                Some(Sex::Female) => t.female += v,
                _ => t.merged += v,
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRate {
    pub label: String,
    pub sex: Sex,
    pub rate: Probability,
    /// Base population, in whatever unit the counts should come out in.
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupDoublyMissing {
    pub counts: Vec<(String, f64)>,
    pub male: f64,
    pub female: f64,
    pub male_excess: f64,
}

pub fn group_doubly_missing(groups: &[GroupRate]) -> GroupDoublyMissing {
    let mut out = GroupDoublyMissing {
        counts: Vec::with_capacity(groups.len()),
        male: 0.0,
        female: 0.0,
        male_excess: 0.0,
    };
    for g in groups {
        let n = g.rate.get() * g.population;
        match g.sex {
            Sex::Male => out.male += n,
            Sex::Female => out.female += n,
            Sex::Merged => {}
        }
        out.counts.push((g.label.clone(), n));
    }
    out.male_excess = out.male - out.female;
    out
}

/// 1990 doubly-missing rates by sex and race (African-American, other
/// races). The base populations in millions are not published alongside the
/// rates; these are chosen to sum to the 1990 DA total of 253.394M.
pub fn rates_1990() -> Vec<GroupRate> {
    let row = |label: &str, sex, rate, population| GroupRate {
        label: label.to_string(),
        sex,
        rate: Probability::new(rate).expect("constant in range"),
        population,
    };
    vec![
        row("african_american_male", Sex::Male, 0.056, 15.4),
        row("african_american_female", Sex::Female, 0.010, 16.3),
        row("other_male", Sex::Male, 0.012, 111.0),
        row("other_female", Sex::Female, 0.006, 110.694),
    ]
}

/// The simulator's count of people missed by both systems, per stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueDoublyMissing {
    /// Per estimation stratum: (net, raw).
    pub by_stratum: BTreeMap<PostStratumKey, (f64, u64)>,
}

impl TrueDoublyMissing {
    pub fn net(&self) -> f64 {
        self.by_stratum.values().map(|v| v.0).sum()
    }

    pub fn raw(&self) -> u64 {
        self.by_stratum.values().map(|v| v.1).sum()
    }

    pub fn for_scope(&self, scope: &Scope) -> Result<(f64, u64)> {
        match scope {
            Scope::National | Scope::Named(_) => Ok((self.net(), self.raw())),
            Scope::Group(g) => Ok(self
                .by_stratum
                .iter()
                .filter(|(k, _)| k.group == *g)
                .fold((0.0, 0), |acc, (_, v)| (acc.0 + v.0, acc.1 + v.1))),
            geo => Err(Error::GeographicScope(geo.to_string())),
        }
    }
}

/// True doubly-missing counts. "In the census" here means having a correctly
/// located census record, which is what the DSE's census side measures; a
/// person whose only record is misplaced counts as a census miss, with the
/// misplaced record an offsetting erroneous enumeration.
///
/// Per stratum, with `a` persons in both systems, `b` census only, `c` survey
/// only and `d` neither, `raw = d` and `net = d - b·c/a`: the population
/// total minus the population-level DSE. Strata are those of `scheme`,
/// passed through `mapping` when estimates were collapsed.
pub fn true_doubly_missing(
    pop: &Population,
    census: &EnumerationFile,
    scheme: &PostStratScheme,
    mapping: Option<&BTreeMap<PostStratumKey, PostStratumKey>>,
) -> Result<TrueDoublyMissing> {
    let mut correct = vec![false; pop.len()];
    for r in &census.records {
        if let (RecordKind::Correct, Some(p)) = (r.kind, r.person) {
            correct[p as usize] = true;
        }
    }
    let mut cells: BTreeMap<PostStratumKey, [u64; 4]> = BTreeMap::new();
    for p in &pop.persons {
        let mut key = resolve_stratum(scheme, &p.stratum, &p.geo.area_key())?;
        if let Some(m) = mapping {
            key = *m.get(&key).ok_or(Error::UnknownStratum(key))?;
        }
        let idx = match (correct[p.id as usize], p.survey) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        cells.entry(key).or_default()[idx] += 1;
    }
    let mut by_stratum = BTreeMap::new();
    for (k, [a, b, c, d]) in cells {
        if a == 0 {
            return Err(Error::DegenerateTable {
                stratum: k.to_string(),
                c1: 0.0,
            });
        }
        by_stratum.insert(k, (d as f64 - (b as f64) * (c as f64) / a as f64, d));
    }
    Ok(TrueDoublyMissing { by_stratum })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FifthCellEstimate {
    pub scope: Scope,
    pub da_net_undercount: f64,
    pub dse_undercount: f64,
    pub measured_bias: f64,
    pub corrected: f64,
    pub estimated_doubly_missing: f64,
    pub true_net: Option<f64>,
    pub true_raw: Option<u64>,
}

/// Doubly missing = DA net undercount - (DSE undercount - measured bias).
/// Only national or demographic scopes are accepted.
pub fn recover_fifth_cell(
    scope: Scope,
    dse_total: f64,
    census_total: f64,
    measured_bias: f64,
    da: &DaTotals,
    truth: Option<&TrueDoublyMissing>,
) -> Result<FifthCellEstimate> {
    let da_total = da.for_scope(&scope)?;
    let ledger = decompose(
        scope.clone(),
        dse_total - census_total,
        measured_bias,
        da_net_undercount(da_total, census_total),
    );
    let truth = truth.map(|t| t.for_scope(&scope)).transpose()?;
    Ok(FifthCellEstimate {
        da_net_undercount: ledger.da_undercount,
        dse_undercount: ledger.dse_undercount,
        measured_bias,
        corrected: ledger.corrected(),
        estimated_doubly_missing: ledger.doubly_missing(),
        true_net: truth.map(|t| t.0),
        true_raw: truth.map(|t| t.1),
        scope,
    })
}
