use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use super::census::{EnumerationFile, RecordKind};
use super::survey::PSample;
use super::ErrorConfig;
use crate::dse::Tally;
use crate::error::{Error, Result};
use crate::popgen::{AreaKey, GeographyKey, PostStratumKey};
use crate::scheme::PostStratScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    Matched,
    Unmatched,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumStatus {
    CorrectEnumeration,
    Erroneous,
    Unresolved,
}

/// A P-sample respondent and its match status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PCase {
    pub person: u32,
    pub stratum: PostStratumKey,
    pub geo: GeographyKey,
    pub mover: bool,
    pub status: MatchStatus,
}

/// An E-sample census record (a record in a sampled block) and its status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ECase {
    pub record: u32,
    pub stratum: PostStratumKey,
    pub geo: GeographyKey,
    pub mover: bool,
    pub status: EnumStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Block-sample expansion weight.
    pub weight: f64,
    pub respondents: Vec<PCase>,
    pub records: Vec<ECase>,
    /// Full census counts per recorded stratum and area.
    pub census_cells: BTreeMap<(PostStratumKey, AreaKey), u64>,
}

/// Stratum of `scheme` a case falls in: its own label when that is a scheme
/// stratum, otherwise the scheme's assignment of its group, area and tenure.
pub(crate) fn resolve_stratum(
    scheme: &PostStratScheme,
    stratum: &PostStratumKey,
    area: &AreaKey,
) -> Result<PostStratumKey> {
    if scheme.contains(stratum) {
        return Ok(*stratum);
    }
    scheme
        .assign(stratum.group, area, stratum.tenure)
        .ok_or(Error::UnknownStratum(*stratum))
}

impl MatchResult {
    pub fn has_unresolved(&self) -> bool {
        self.respondents.iter().any(|c| c.status == MatchStatus::Unresolved)
            || self.records.iter().any(|c| c.status == EnumStatus::Unresolved)
    }

    /// Counts per scheme stratum. Fails on unresolved cases.
    pub fn tally(&self, scheme: &PostStratScheme) -> Result<BTreeMap<PostStratumKey, Tally>> {
        let mut out: BTreeMap<PostStratumKey, Tally> = BTreeMap::new();
        let mut cache: HashMap<(PostStratumKey, AreaKey), PostStratumKey> = HashMap::new();
        let mut resolve = |stratum: &PostStratumKey, area: AreaKey| -> Result<PostStratumKey> {
            if let Some(k) = cache.get(&(*stratum, area)) {
                return Ok(*k);
            }
            let k = resolve_stratum(scheme, stratum, &area)?;
            cache.insert((*stratum, area), k);
            Ok(k)
        };
        for c in &self.respondents {
            let key = resolve(&c.stratum, c.geo.area_key())?;
            let t = out.entry(key).or_default();
            t.respondents += 1;
            match c.status {
                MatchStatus::Matched => t.matched += 1,
                MatchStatus::Unmatched => {}
                MatchStatus::Unresolved => return Err(Error::UnresolvedCases(key)),
            }
        }
        for c in &self.records {
            let key = resolve(&c.stratum, c.geo.area_key())?;
            let t = out.entry(key).or_default();
            t.sampled_records += 1;
            match c.status {
                EnumStatus::CorrectEnumeration => t.correct_enumerations += 1,
                EnumStatus::Erroneous => {}
                EnumStatus::Unresolved => return Err(Error::UnresolvedCases(key)),
            }
        }
        for ((stratum, area), n) in &self.census_cells {
            let key = resolve(stratum, *area)?;
            out.entry(key).or_default().census_count += n;
        }
        Ok(out)
    }

    pub fn write_respondents_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "person_id",
            "age_sex",
            "race",
            "region",
            "place_type",
            "tenure",
            "block",
            "mover",
            "status",
        ])?;
        for c in &self.respondents {
            let s = c.stratum.csv_fields();
            let status = match c.status {
                MatchStatus::Matched => "matched",
                MatchStatus::Unmatched => "unmatched",
                MatchStatus::Unresolved => "unresolved",
            };
            out.write_record([
                c.person.to_string().as_str(),
                &s[0],
                &s[1],
                &s[2],
                &s[3],
                &s[4],
                &c.geo.block.to_string(),
                if c.mover { "1" } else { "0" },
                status,
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "record_id",
            "age_sex",
            "race",
            "region",
            "place_type",
            "tenure",
            "block",
            "status",
        ])?;
        for c in &self.records {
            let s = c.stratum.csv_fields();
            let status = match c.status {
                EnumStatus::CorrectEnumeration => "correct_enumeration",
                EnumStatus::Erroneous => "erroneous",
                EnumStatus::Unresolved => "unresolved",
            };
            out.write_record([
                c.record.to_string().as_str(),
                &s[0],
                &s[1],
                &s[2],
                &s[3],
                &s[4],
                &c.geo.block.to_string(),
                status,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Ground-truth matching by person id: a respondent matches iff the person
/// has a correctly located census record; an E-sample record is a correct
/// enumeration iff its kind is `Correct`.
pub fn true_match(census: &EnumerationFile, ps: &PSample) -> MatchResult {
    let max_person = census
        .records
        .iter()
        .filter_map(|r| r.person)
        .chain(ps.respondents.iter().map(|r| r.person))
        .max()
        .map_or(0, |m| m as usize + 1);
    let mut correct = vec![false; max_person];
    for r in &census.records {
        if let (RecordKind::Correct, Some(p)) = (r.kind, r.person) {
            correct[p as usize] = true;
        }
    }
    let mask = ps.block_mask();
    let respondents = ps
        .respondents
        .iter()
        .map(|r| PCase {
            person: r.person,
            stratum: r.stratum,
            geo: r.geo,
            mover: r.mover,
            status: if correct[r.person as usize] {
                MatchStatus::Matched
            } else {
                MatchStatus::Unmatched
            },
        })
        .collect();
    let records = census
        .records
        .iter()
        .filter(|r| mask[r.geo.block as usize])
        .map(|r| ECase {
            record: r.id,
            stratum: r.stratum,
            geo: r.geo,
            mover: r.mover,
            status: if r.kind == RecordKind::Correct {
                EnumStatus::CorrectEnumeration
            } else {
                EnumStatus::Erroneous
            },
        })
        .collect();
    MatchResult {
        weight: ps.weight(),
        respondents,
        records,
        census_cells: census.cells(),
    }
}

/// Injects matching errors into a ground-truth result. Each case draws two
/// uniforms: one for a status flip, one for masking to unresolved.
pub fn perturb<R: Rng + ?Sized>(truth: &MatchResult, err: &ErrorConfig, rng: &mut R) -> MatchResult {
    let fm = err.false_match_rate.get();
    let ur = err.unresolved_rate.get();
    let respondents = truth
        .respondents
        .iter()
        .map(|c| {
            let (u_flip, u_mask): (f64, f64) = (rng.random(), rng.random());
            let status = match c.status {
                MatchStatus::Matched if u_flip < err.nonmatch_rate(c.mover) => MatchStatus::Unmatched,
                MatchStatus::Unmatched if u_flip < fm => MatchStatus::Matched,
                s => s,
            };
            PCase {
                status: if u_mask < ur { MatchStatus::Unresolved } else { status },
                ..*c
            }
        })
        .collect();
    let records = truth
        .records
        .iter()
        .map(|c| {
            let (u_flip, u_mask): (f64, f64) = (rng.random(), rng.random());
            let status = match c.status {
                EnumStatus::CorrectEnumeration if u_flip < err.nonmatch_rate(c.mover) => EnumStatus::Erroneous,
                EnumStatus::Erroneous if u_flip < fm => EnumStatus::CorrectEnumeration,
                s => s,
            };
            ECase {
                status: if u_mask < ur { EnumStatus::Unresolved } else { status },
                ..*c
            }
        })
        .collect();
    MatchResult {
        weight: truth.weight,
        respondents,
        records,
        census_cells: truth.census_cells.clone(),
    }
}

pub fn match_records<R: Rng + ?Sized>(
    census: &EnumerationFile,
    ps: &PSample,
    err: &ErrorConfig,
    rng: &mut R,
) -> MatchResult {
    perturb(&true_match(census, ps), err, rng)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationPolicy {
    /// Resolve each case at the resolved rate of its own post-stratum,
    /// falling back to the overall resolved rate.
    #[default]
    StratumMatchRate,
}

#[derive(Default, Clone, Copy)]
struct Rate {
    hits: u64,
    resolved: u64,
}

impl Rate {
    fn add(&mut self, hit: bool) {
        self.resolved += 1;
        self.hits += hit as u64;
    }

    fn get(&self) -> Option<f64> {
        (self.resolved > 0).then(|| self.hits as f64 / self.resolved as f64)
    }
}

fn rate_for(by_stratum: &HashMap<PostStratumKey, Rate>, global: Rate, stratum: &PostStratumKey) -> Result<f64> {
    by_stratum
        .get(stratum)
        .and_then(Rate::get)
        .or_else(|| global.get())
        .ok_or(Error::NoResolvedCases)
}

/// Assigns every unresolved case a status drawn at its stratum's resolved
/// rate. Strata are the cases' own labels. One uniform per unresolved case.
pub fn impute_unresolved<R: Rng + ?Sized>(
    mr: &MatchResult,
    policy: ImputationPolicy,
    rng: &mut R,
) -> Result<MatchResult> {
    let ImputationPolicy::StratumMatchRate = policy;
    if !mr.has_unresolved() {
        return Ok(mr.clone());
    }
    let mut p_rates: HashMap<PostStratumKey, Rate> = HashMap::new();
    let mut p_global = Rate::default();
    for c in &mr.respondents {
        if c.status != MatchStatus::Unresolved {
            let hit = c.status == MatchStatus::Matched;
            p_rates.entry(c.stratum).or_default().add(hit);
            p_global.add(hit);
        }
    }
    let mut e_rates: HashMap<PostStratumKey, Rate> = HashMap::new();
    let mut e_global = Rate::default();
    for c in &mr.records {
        if c.status != EnumStatus::Unresolved {
            let hit = c.status == EnumStatus::CorrectEnumeration;
            e_rates.entry(c.stratum).or_default().add(hit);
            e_global.add(hit);
        }
    }

    let mut out = mr.clone();
    for c in out
        .respondents
        .iter_mut()
        .filter(|c| c.status == MatchStatus::Unresolved)
    {
        let rate = rate_for(&p_rates, p_global, &c.stratum)?;
        c.status = if rng.random::<f64>() < rate {
            MatchStatus::Matched
        } else {
            MatchStatus::Unmatched
        };
    }
    for c in out.records.iter_mut().filter(|c| c.status == EnumStatus::Unresolved) {
        let rate = rate_for(&e_rates, e_global, &c.stratum)?;
        c.status = if rng.random::<f64>() < rate {
            EnumStatus::CorrectEnumeration
        } else {
            EnumStatus::Erroneous
        };
    }
    Ok(out)
}
