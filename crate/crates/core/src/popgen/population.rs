use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use super::capture::{CaptureModel, HardToCount, JointCells};
use super::geography::Geography;
use super::keys::{DemographicGroup, GeographyKey, PostStratumKey};
use crate::error::{Error, Result};
use crate::prob::Probability;
use crate::scheme::PostStratScheme;

/// One synthetic person and their true capture outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Person {
    pub id: u32,
    pub stratum: PostStratumKey,
    pub geo: GeographyKey,
    pub census: bool,
    pub survey: bool,
    pub mover: bool,
}

/// Number of persons to generate in one stratum within one area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    #[serde(flatten)]
    pub stratum: PostStratumKey,
    pub area: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountsSpec {
    /// The same count in every (stratum, admissible area) pair.
    PerStratumArea {
        per_stratum_area: u64,
    },
    Cells {
        cells: Vec<CellCount>,
    },
}

/// Config-file form of [`PopulationConfig`]; geography and scheme are
/// supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub counts: CountsSpec,
    pub capture: CaptureModel,
    #[serde(default)]
    pub mover_rate: Probability,
    #[serde(default)]
    pub hard_to_count: Option<HardToCount>,
}

impl PopulationSpec {
    pub fn build(&self, scheme: &PostStratScheme, geography: Arc<Geography>) -> Result<PopulationConfig> {
        let cells = match &self.counts {
            CountsSpec::PerStratumArea { per_stratum_area } => uniform_cells(scheme, &geography, *per_stratum_area),
            CountsSpec::Cells { cells } => cells.clone(),
        };
        let config = PopulationConfig {
            geography,
            cells,
            capture: self.capture.clone(),
            mover_rate: self.mover_rate,
            hard_to_count: self.hard_to_count,
        };
        config.validate(Some(scheme))?;
        Ok(config)
    }
}

fn uniform_cells(scheme: &PostStratScheme, geography: &Geography, count: u64) -> Vec<CellCount> {
    scheme
        .keys()
        .flat_map(|stratum| {
            geography
                .areas()
                .iter()
                .filter(move |a| stratum.admits_area(&a.key))
                .map(move |a| CellCount {
                    stratum,
                    area: a.key.area,
                    count,
                })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PopulationConfig {
    pub geography: Arc<Geography>,
    pub cells: Vec<CellCount>,
    pub capture: CaptureModel,
    pub mover_rate: Probability,
    pub hard_to_count: Option<HardToCount>,
}

impl PopulationConfig {
    pub fn uniform(
        scheme: &PostStratScheme,
        geography: Arc<Geography>,
        per_stratum_area: u64,
        capture: CaptureModel,
        mover_rate: Probability,
    ) -> Self {
        let cells = uniform_cells(scheme, &geography, per_stratum_area);
        PopulationConfig {
            geography,
            cells,
            capture,
            mover_rate,
            hard_to_count: None,
        }
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self, scheme: Option<&PostStratScheme>) -> Result<()> {
        if let Some(h) = &self.hard_to_count {
            h.validate()?;
        }
        if self.total() > u32::MAX as u64 {
            return Err(Error::InvalidConfig("population exceeds 2^32 persons".into()));
        }
        for c in &self.cells {
            let area = self
                .geography
                .area(c.area)
                .ok_or_else(|| Error::InvalidConfig(format!("cell for {} names unknown area {}", c.stratum, c.area)))?;
            if !c.stratum.admits_area(&area.key) {
                return Err(Error::InvalidConfig(format!(
                    "stratum {} cannot occur in area {}",
                    c.stratum, area.key
                )));
            }
            if let Some(s) = scheme {
                if !s.contains(&c.stratum) {
                    return Err(Error::UnknownStratum(c.stratum));
                }
            }
        }
        Ok(())
    }
}

/// The simulated truth.
#[derive(Debug, Clone)]
pub struct Population {
    pub geography: Arc<Geography>,
    pub persons: Vec<Person>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn by_stratum(&self) -> BTreeMap<PostStratumKey, u64> {
        let mut out = BTreeMap::new();
        for p in &self.persons {
            *out.entry(p.stratum).or_insert(0) += 1;
        }
        out
    }

    pub fn by_demographic_group(&self) -> BTreeMap<DemographicGroup, u64> {
        let mut out = BTreeMap::new();
        for p in &self.persons {
            *out.entry(p.stratum.group).or_insert(0) += 1;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "id",
            "age_sex",
            "race",
            "region",
            "place_type",
            "tenure",
            "geo_region",
            "geo_place_type",
            "area",
            "block",
            "census",
            "survey",
            "mover",
        ])?;
        let flag = |b: bool| if b { "1" } else { "0" };
        for p in &self.persons {
            let s = p.stratum.csv_fields();
            out.write_record([
                p.id.to_string().as_str(),
                &s[0],
                &s[1],
                &s[2],
                &s[3],
                &s[4],
                &p.geo.region.to_string(),
                &p.geo.place_type.to_string(),
                &p.geo.area.to_string(),
                &p.geo.block.to_string(),
                flag(p.census),
                flag(p.survey),
                flag(p.mover),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws a population: each person's block uniformly within their area,
/// their (census, survey) pair from the stratum's joint capture cells, and
/// the mover flag independently at `mover_rate`.
pub fn generate_population<R: Rng + ?Sized>(config: &PopulationConfig, rng: &mut R) -> Result<Population> {
    if config.cells.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    config.validate(None)?;

    let mut persons = Vec::with_capacity(config.total() as usize);
    let mover_rate = config.mover_rate.get();
    for cell in &config.cells {
        let area = config.geography.area(cell.area).expect("validated");
        let params = config.capture.params_for(&cell.stratum);
        let easy = params.joint()?;
        let hard: Option<(f64, JointCells)> = match &config.hard_to_count {
            Some(h) => Some((h.fraction.get(), h.harden(params)?.joint()?)),
            None => None,
        };
        for _ in 0..cell.count {
            let block = area.first_block + rng.random_range(0..area.blocks);
            let cells = match hard {
                Some((fraction, ref hard_cells)) if rng.random::<f64>() < fraction => hard_cells,
                _ => &easy,
            };
            let (census, survey) = cells.sample(rng.random());
            let mover = rng.random::<f64>() < mover_rate;
            persons.push(Person {
                id: persons.len() as u32,
                stratum: cell.stratum,
                geo: GeographyKey {
                    region: area.key.region,
                    place_type: area.key.place_type,
                    area: area.key.area,
                    block,
                },
                census,
                survey,
                mover,
            });
        }
    }
    Ok(Population {
        geography: Arc::clone(&config.geography),
        persons,
    })
}

/// Fields a population can be tallied by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    AgeSex,
    Race,
    Region,
    PlaceType,
    Area,
    Block,
    /// Stratum tenure; `None` where the stratum pools tenure.
    Tenure,
    Census,
    Survey,
    Mover,
}

pub type GroupKey = Vec<Option<u32>>;

/// Exact counts of the synthetic truth, grouped by `by`. An empty grouping
/// yields a single entry holding the population size.
pub fn true_totals(pop: &Population, by: &[Field]) -> BTreeMap<GroupKey, u64> {
    let mut out = BTreeMap::new();
    for p in &pop.persons {
        let key: GroupKey = by
            .iter()
            .map(|f| match f {
                Field::AgeSex => Some(p.stratum.group.age_sex as u32),
                Field::Race => Some(p.stratum.group.race as u32),
                Field::Region => Some(p.geo.region as u32),
                Field::PlaceType => Some(p.geo.place_type as u32),
                Field::Area => Some(p.geo.area),
                Field::Block => Some(p.geo.block),
                Field::Tenure => p.stratum.tenure.map(|t| t as u32),
                Field::Census => Some(p.census as u32),
                Field::Survey => Some(p.survey as u32),
                Field::Mover => Some(p.mover as u32),
            })
            .collect();
        *out.entry(key).or_insert(0) += 1;
    }
    if by.is_empty() && out.is_empty() {
        out.insert(Vec::new(), 0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::popgen::CaptureParams;
    use crate::rng::seeded;
    use crate::scheme::{PooledDim, SchemeDims};

    fn small_scheme() -> PostStratScheme {
        let dims = SchemeDims {
            age_sex_classes: 2,
            race_groups: 2,
            regions: 2,
            place_types: 1,
            tenure_levels: 2,
        };
        PostStratScheme::full_cross(dims, &[PooledDim::PlaceType]).unwrap()
    }

    fn config(per_cell: u64, p_c: f64, p_s: f64, theta: f64) -> PopulationConfig {
        let scheme = small_scheme();
        let geo = Arc::new(Geography::grid(2, 1, 3, 5).unwrap());
        PopulationConfig::uniform(
            &scheme,
            geo,
            per_cell,
            CaptureModel::uniform(CaptureParams::new(p_c, p_s, theta).unwrap()),
            Probability::new(0.05).unwrap(),
        )
    }

    #[test]
    fn zero_counts_give_empty_population() {
        let pop = generate_population(&config(0, 0.9, 0.9, 1.0), &mut seeded(1)).unwrap();
        assert!(pop.is_empty());
        assert_eq!(true_totals(&pop, &[]), BTreeMap::from([(vec![], 0)]));
    }

    #[test]
    fn no_cells_is_an_error() {
        let mut c = config(1, 0.9, 0.9, 1.0);
        c.cells.clear();
        assert!(matches!(
            generate_population(&c, &mut seeded(1)),
            Err(Error::EmptyPopulation)
        ));
    }

    #[test]
    fn counts_match_configuration_exactly() {
        let c = config(37, 0.9, 0.9, 1.0);
        let pop = generate_population(&c, &mut seeded(9)).unwrap();
        let mut tally: BTreeMap<(PostStratumKey, u32), u64> = BTreeMap::new();
        for p in &pop.persons {
            *tally.entry((p.stratum, p.geo.area)).or_default() += 1;
            let area = pop.geography.area(p.geo.area).unwrap();
            assert!(area.block_range().contains(&p.geo.block));
        }
        for cell in &c.cells {
            assert_eq!(tally[&(cell.stratum, cell.area)], cell.count);
        }
        let ids: std::collections::HashSet<u32> = pop.persons.iter().map(|p| p.id).collect();
        assert_eq!(ids.len(), pop.len());
    }

    #[test]
    fn same_seed_same_population() {
        let c = config(50, 0.8, 0.7, 3.0);
        let a = generate_population(&c, &mut seeded(42)).unwrap();
        let b = generate_population(&c, &mut seeded(42)).unwrap();
        assert_eq!(a.persons, b.persons);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        let other = generate_population(&c, &mut seeded(43)).unwrap();
        assert_ne!(a.persons, other.persons);
    }

    #[test]
    fn census_rate_within_four_sigma() {
        // 8 strata x 3 areas x 4167 ~ 100k persons.
        let c = config(4167, 0.98, 0.95, 1.0);
        let pop = generate_population(&c, &mut seeded(2024)).unwrap();
        let n = pop.len() as f64;
        assert!(n >= 100_000.0);
        let hits = pop.persons.iter().filter(|p| p.census).count() as f64;
        let se = (0.98 * 0.02 / n).sqrt();
        assert!((hits / n - 0.98).abs() < 4.0 * se, "rate {}", hits / n);
        let movers = pop.persons.iter().filter(|p| p.mover).count() as f64;
        assert!((movers / n - 0.05).abs() < 4.0 * (0.05 * 0.95 / n).sqrt());
    }

    #[test]
    fn partitions_sum_to_total() {
        let pop = generate_population(&config(20, 0.9, 0.8, 2.0), &mut seeded(5)).unwrap();
        let total = true_totals(&pop, &[])[&vec![]];
        assert_eq!(total, pop.len() as u64);
        for by in [
            vec![Field::Region],
            vec![Field::AgeSex, Field::Race],
            vec![Field::Area, Field::Census, Field::Survey],
            vec![Field::Tenure, Field::Mover],
        ] {
            let parts = true_totals(&pop, &by);
            assert_eq!(parts.values().sum::<u64>(), total, "{by:?}");
        }
        assert_eq!(true_totals(&pop, &[Field::AgeSex, Field::Race]).len(), 4);
    }

    #[test]
    fn rejects_inadmissible_cell() {
        let mut c = config(1, 0.9, 0.9, 1.0);
        // A region-0 stratum placed in a region-1 area.
        let stratum = c.cells.iter().find(|x| x.stratum.region == Some(0)).unwrap().stratum;
        let area = c.geography.areas().iter().find(|a| a.key.region == 1).unwrap().key.area;
        c.cells.push(CellCount {
            stratum,
            area,
            count: 1,
        });
        assert!(matches!(
            generate_population(&c, &mut seeded(1)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn hard_to_count_lowers_capture() {
        let mut c = config(2000, 0.95, 0.95, 1.0);
        c.hard_to_count = Some(HardToCount {
            fraction: Probability::new(0.5).unwrap(),
            miss_multiplier: 4.0,
        });
        let pop = generate_population(&c, &mut seeded(3)).unwrap();
        let n = pop.len() as f64;
        let rate = pop.persons.iter().filter(|p| p.census).count() as f64 / n;
        // 0.5 * 0.95 + 0.5 * 0.80 = 0.875
        assert!((rate - 0.875).abs() < 4.0 * (0.875 * 0.125 / n).sqrt(), "{rate}");
    }
}
