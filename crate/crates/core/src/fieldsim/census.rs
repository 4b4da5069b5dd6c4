use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use super::ErrorConfig;
use crate::error::Result;
use crate::popgen::{AreaKey, Geography, GeographyKey, Population, PostStratumKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Correct,
    Duplicate,
    Fabrication,
    WrongLocation,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Correct => "correct",
            RecordKind::Duplicate => "duplicate",
            RecordKind::Fabrication => "fabrication",
            RecordKind::WrongLocation => "wrong_location",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CensusRecord {
    pub id: u32,
    /// `None` exactly for fabrications.
    pub person: Option<u32>,
    pub geo: GeographyKey,
    pub stratum: PostStratumKey,
    pub kind: RecordKind,
    pub mover: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnumerationFile {
    pub records: Vec<CensusRecord>,
}

impl EnumerationFile {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_kind(&self, kind: RecordKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    /// Census counts (all records) per recorded stratum and area.
    pub fn cells(&self) -> BTreeMap<(PostStratumKey, AreaKey), u64> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry((r.stratum, r.geo.area_key())).or_insert(0) += 1;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "record_id",
            "person_id",
            "age_sex",
            "race",
            "region",
            "place_type",
            "tenure",
            "geo_region",
            "geo_place_type",
            "area",
            "block",
            "kind",
        ])?;
        for r in &self.records {
            let s = r.stratum.csv_fields();
            out.write_record([
                r.id.to_string().as_str(),
                &r.person.map_or_else(String::new, |p| p.to_string()),
                &s[0],
                &s[1],
                &s[2],
                &s[3],
                &s[4],
                &r.geo.region.to_string(),
                &r.geo.place_type.to_string(),
                &r.geo.area.to_string(),
                &r.geo.block.to_string(),
                r.kind.as_str(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Moves a record to a random block of another area in the same region and
/// place type, or to another block of the same area when the cell has only
/// one area. The stratum label is unchanged.
fn relocate<R: Rng + ?Sized>(
    geo: &GeographyKey,
    geography: &Geography,
    cell_areas: &HashMap<(u8, u8), Vec<u32>>,
    rng: &mut R,
) -> GeographyKey {
    let siblings = &cell_areas[&(geo.region, geo.place_type)];
    if siblings.len() > 1 {
        let mut pick = rng.random_range(0..siblings.len() - 1);
        if siblings[pick] == geo.area {
            pick = siblings.len() - 1;
        }
        let area = geography.area(siblings[pick]).expect("area exists");
        GeographyKey {
            area: area.key.area,
            block: area.first_block + rng.random_range(0..area.blocks),
            ..*geo
        }
    } else {
        let area = geography.area(geo.area).expect("area exists");
        if area.blocks < 2 {
            return *geo;
        }
        let mut offset = rng.random_range(0..area.blocks - 1);
        if area.first_block + offset == geo.block {
            offset = area.blocks - 1;
        }
        GeographyKey {
            block: area.first_block + offset,
            ..*geo
        }
    }
}

/// Enumerates every census-captured person once, at their true block unless
/// a wrong-location error moves the record, then appends duplicates and
/// fabrications. Three uniforms are drawn per captured person.
pub fn simulate_census<R: Rng + ?Sized>(pop: &Population, err: &ErrorConfig, rng: &mut R) -> EnumerationFile {
    let geography = &*pop.geography;
    let mut cell_areas: HashMap<(u8, u8), Vec<u32>> = HashMap::new();
    for a in geography.areas() {
        cell_areas
            .entry((a.key.region, a.key.place_type))
            .or_default()
            .push(a.key.area);
    }
    let (wl, dup, fab) = (
        err.wrong_location_rate.get(),
        err.duplicate_rate.get(),
        err.fabrication_rate.get(),
    );

    let mut records = Vec::new();
    let mut push = |person: Option<u32>, geo, stratum, kind, mover| {
        let id = records.len() as u32;
        records.push(CensusRecord {
            id,
            person,
            geo,
            stratum,
            kind,
            mover,
        });
    };
    for p in pop.persons.iter().filter(|p| p.census) {
        let (u_wl, u_dup, u_fab): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let (geo, kind) = if u_wl < wl {
            (relocate(&p.geo, geography, &cell_areas, rng), RecordKind::WrongLocation)
        } else {
            (p.geo, RecordKind::Correct)
        };
        push(Some(p.id), geo, p.stratum, kind, p.mover);
        if u_dup < dup {
            push(Some(p.id), geo, p.stratum, RecordKind::Duplicate, p.mover);
        }
        if u_fab < fab {
            push(None, p.geo, p.stratum, RecordKind::Fabrication, false);
        }
    }
    EnumerationFile { records }
}
