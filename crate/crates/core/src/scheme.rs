//! Post-stratification schemes: the cross-classification that assigns every
//! person, after data collection, to exactly one post-stratum.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::popgen::{AreaKey, DemographicGroup, PostStratumKey, Tenure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
    /// An age-sex class that does not separate males and females.
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeDims {
    pub age_sex_classes: u8,
    pub race_groups: u8,
    pub regions: u8,
    pub place_types: u8,
    /// 1 (tenure never used) or 2 (renter/owner).
    pub tenure_levels: u8,
}

impl SchemeDims {
    pub fn demographic_groups(&self) -> usize {
        self.age_sex_classes as usize * self.race_groups as usize
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("age_sex_classes", self.age_sex_classes),
            ("race_groups", self.race_groups),
            ("regions", self.regions),
            ("place_types", self.place_types),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidScheme(format!("{name} must be at least 1")));
        }
        if !(1..=2).contains(&self.tenure_levels) {
            return Err(Error::InvalidScheme(format!(
                "tenure_levels must be 1 or 2, got {}",
                self.tenure_levels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    #[serde(flatten)]
    pub key: PostStratumKey,
    /// Expected share of the total population.
    pub share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PooledDim {
    Region,
    PlaceType,
    Tenure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitStratum {
    #[serde(flatten)]
    pub key: PostStratumKey,
    #[serde(default)]
    pub share: Option<f64>,
}

/// Config-file form of a scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    /// The 448-stratum, 48-group layout of [`PostStratScheme::ace2000`].
    Ace2000,
    /// Every combination of the dimensions, except those listed in `pool`.
    FullCross {
        #[serde(flatten)]
        dims: SchemeDims,
        #[serde(default)]
        pool: Vec<PooledDim>,
        #[serde(default)]
        sex_layout: Option<Vec<Sex>>,
    },
    Explicit {
        #[serde(flatten)]
        dims: SchemeDims,
        strata: Vec<ExplicitStratum>,
        #[serde(default)]
        sex_layout: Option<Vec<Sex>>,
    },
}

impl SchemeSpec {
    pub fn build(&self) -> Result<PostStratScheme> {
        let scheme = match self {
            SchemeSpec::Ace2000 => PostStratScheme::ace2000(),
            SchemeSpec::FullCross { dims, pool, .. } => PostStratScheme::full_cross(*dims, pool)?,
            SchemeSpec::Explicit { dims, strata, .. } => {
                let keys: Vec<PostStratumKey> = strata.iter().map(|s| s.key).collect();
                let shares = match strata.iter().map(|s| s.share).collect::<Option<Vec<f64>>>() {
                    Some(shares) => Some(shares),
                    None if strata.iter().all(|s| s.share.is_none()) => None,
                    None => {
                        return Err(Error::InvalidScheme(
                            "either every stratum or none must carry a share".into(),
                        ))
                    }
                };
                PostStratScheme::explicit(*dims, keys, shares)?
            }
        };
        match self {
            SchemeSpec::FullCross {
                sex_layout: Some(layout),
                ..
            }
            | SchemeSpec::Explicit {
                sex_layout: Some(layout),
                ..
            } => scheme.with_sex_layout(layout.clone()),
            _ => Ok(scheme),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PostStratScheme {
    dims: SchemeDims,
    sex_of_class: Vec<Sex>,
    strata: Vec<StratumSpec>,
    index: HashMap<PostStratumKey, usize>,
}

impl PostStratScheme {
    /// Validates that every (group, region, place type, tenure) cell is
    /// claimed by exactly one stratum.
    pub fn explicit(dims: SchemeDims, keys: Vec<PostStratumKey>, shares: Option<Vec<f64>>) -> Result<Self> {
        dims.validate()?;
        if keys.is_empty() {
            return Err(Error::InvalidScheme("no strata".into()));
        }
        let shares = match shares {
            Some(s) => {
                if s.len() != keys.len() {
                    return Err(Error::InvalidScheme("one share per stratum required".into()));
                }
                if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidScheme("shares must be non-negative".into()));
                }
                let total: f64 = s.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidScheme(format!("shares sum to {total}, not 1")));
                }
                s
            }
            None => vec![1.0 / keys.len() as f64; keys.len()],
        };

        let mut index = HashMap::with_capacity(keys.len());
        for (i, key) in keys.iter().enumerate() {
            let in_bounds = key.group.age_sex < dims.age_sex_classes
                && key.group.race < dims.race_groups
                && key.region.is_none_or(|r| r < dims.regions)
                && key.place_type.is_none_or(|p| p < dims.place_types)
                && (dims.tenure_levels == 2 || key.tenure.is_none());
            if !in_bounds {
                return Err(Error::InvalidScheme(format!(
                    "stratum {key} is outside the scheme dimensions"
                )));
            }
            if index.insert(*key, i).is_some() {
                return Err(Error::InvalidScheme(format!("duplicate stratum {key}")));
            }
        }

        let scheme = PostStratScheme {
            dims,
            sex_of_class: default_sex_layout(dims.age_sex_classes),
            strata: keys
                .into_iter()
                .zip(shares)
                .map(|(key, share)| StratumSpec { key, share })
                .collect(),
            index,
        };
        scheme.check_partition()?;
        Ok(scheme)
    }

    pub fn full_cross(dims: SchemeDims, pool: &[PooledDim]) -> Result<Self> {
        dims.validate()?;
        let pooled = |d| pool.contains(&d);
        let regions: Vec<Option<u8>> = if pooled(PooledDim::Region) {
            vec![None]
        } else {
            (0..dims.regions).map(Some).collect()
        };
        let places: Vec<Option<u8>> = if pooled(PooledDim::PlaceType) {
            vec![None]
        } else {
            (0..dims.place_types).map(Some).collect()
        };
        let tenures: Vec<Option<Tenure>> = if pooled(PooledDim::Tenure) || dims.tenure_levels == 1 {
            vec![None]
        } else {
            Tenure::ALL.iter().copied().map(Some).collect()
        };
        let mut keys = Vec::new();
        for a in 0..dims.age_sex_classes {
            for r in 0..dims.race_groups {
                for &region in &regions {
                    for &place in &places {
                        for &tenure in &tenures {
                            keys.push(PostStratumKey::new(DemographicGroup::new(a, r), region, place, tenure));
                        }
                    }
                }
            }
        }
        PostStratScheme::explicit(dims, keys, None)
    }

    /// One stratum per demographic group, geography pooled.
    pub fn demographic(age_sex_classes: u8, race_groups: u8, regions: u8, place_types: u8) -> Result<Self> {
        PostStratScheme::full_cross(
            SchemeDims {
                age_sex_classes,
                race_groups,
                regions,
                place_types,
                tenure_levels: 2,
            },
            &[PooledDim::Region, PooledDim::PlaceType, PooledDim::Tenure],
        )
    }

    /// A 2000-style layout: 8 age-sex classes x 6 race/ethnicity groups = 48
    /// demographic groups, subdivided to differing degrees by four regions,
    /// eight place types and tenure, for 448 post-strata in all.
    ///
    /// Per age-sex class, race 0 is split by region x place type (32 cells),
    /// races 1 and 2 by region x tenure (8 each), race 3 by region (4) and
    /// races 4 and 5 by tenure (2 each): 56 x 8 = 448. Shares are equal.
    pub fn ace2000() -> Self {
        let dims = SchemeDims {
            age_sex_classes: 8,
            race_groups: 6,
            regions: 4,
            place_types: 8,
            tenure_levels: 2,
        };
        let mut keys = Vec::with_capacity(448);
        for a in 0..8 {
            for r in 0..6 {
                let g = DemographicGroup::new(a, r);
                match r {
                    0 => {
                        for region in 0..4 {
                            for place in 0..8 {
                                keys.push(PostStratumKey::new(g, Some(region), Some(place), None));
                            }
                        }
                    }
                    1 | 2 => {
                        for region in 0..4 {
                            for t in Tenure::ALL {
                                keys.push(PostStratumKey::new(g, Some(region), None, Some(t)));
                            }
                        }
                    }
                    3 => {
                        for region in 0..4 {
                            keys.push(PostStratumKey::new(g, Some(region), None, None));
                        }
                    }
                    _ => {
                        for t in Tenure::ALL {
                            keys.push(PostStratumKey::new(g, None, None, Some(t)));
                        }
                    }
                }
            }
        }
        PostStratScheme::explicit(dims, keys, None).expect("built-in 448-stratum scheme is valid")
    }

    /// One stratum per demographic group, carrying the summed shares.
    pub fn demographic_rollup(&self) -> PostStratScheme {
        let mut shares: std::collections::BTreeMap<DemographicGroup, f64> = Default::default();
        for s in &self.strata {
            *shares.entry(s.key.group).or_insert(0.0) += s.share;
        }
        let keys = shares.keys().map(|g| PostStratumKey::demographic(*g)).collect();
        let mut scheme = PostStratScheme::explicit(self.dims, keys, Some(shares.into_values().collect()))
            .expect("roll-up of a valid scheme is valid");
        scheme.sex_of_class = self.sex_of_class.clone();
        scheme
    }

    pub fn with_sex_layout(mut self, layout: Vec<Sex>) -> Result<Self> {
        if layout.len() != self.dims.age_sex_classes as usize {
            return Err(Error::InvalidScheme(format!(
                "sex layout lists {} classes, scheme has {}",
                layout.len(),
                self.dims.age_sex_classes
            )));
        }
        self.sex_of_class = layout;
        Ok(self)
    }

    fn check_partition(&self) -> Result<()> {
        let tenures: &[Option<Tenure>] = if self.dims.tenure_levels == 2 {
            &[Some(Tenure::Renter), Some(Tenure::Owner)]
        } else {
            &[None]
        };
        for a in 0..self.dims.age_sex_classes {
            for r in 0..self.dims.race_groups {
                let g = DemographicGroup::new(a, r);
                for region in 0..self.dims.regions {
                    for place in 0..self.dims.place_types {
                        for &tenure in tenures {
                            let n = self.candidates(g, region, place, tenure).count();
                            if n != 1 {
                                return Err(Error::InvalidScheme(format!(
                                    "cell {g}/reg{region}/pt{place}/{tenure:?} is claimed by {n} strata"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn candidates(
        &self,
        group: DemographicGroup,
        region: u8,
        place: u8,
        tenure: Option<Tenure>,
    ) -> impl Iterator<Item = PostStratumKey> + '_ {
        // Most specific first; bit set = dimension pooled.
        (0u8..8).filter_map(move |mask| {
            if mask & 4 != 0 && tenure.is_none() {
                return None;
            }
            let key = PostStratumKey::new(
                group,
                (mask & 1 == 0).then_some(region),
                (mask & 2 == 0).then_some(place),
                if mask & 4 == 0 { tenure } else { None },
            );
            self.index.contains_key(&key).then_some(key)
        })
    }

    /// The stratum of a person in `group` living in `area`. `tenure = None`
    /// only matches strata that pool tenure.
    pub fn assign(&self, group: DemographicGroup, area: &AreaKey, tenure: Option<Tenure>) -> Option<PostStratumKey> {
        self.candidates(group, area.region, area.place_type, tenure).next()
    }

    pub fn dims(&self) -> SchemeDims {
        self.dims
    }

    pub fn strata(&self) -> &[StratumSpec] {
        &self.strata
    }

    pub fn keys(&self) -> impl Iterator<Item = PostStratumKey> + '_ {
        self.strata.iter().map(|s| s.key)
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn contains(&self, key: &PostStratumKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn share(&self, key: &PostStratumKey) -> Option<f64> {
        self.index.get(key).map(|&i| self.strata[i].share)
    }

    /// Demographic groups that actually occur among the strata.
    pub fn demographic_groups(&self) -> BTreeSet<DemographicGroup> {
        self.strata.iter().map(|s| s.key.group).collect()
    }

    pub fn sex_of_class(&self, age_sex: u8) -> Option<Sex> {
        self.sex_of_class.get(age_sex as usize).copied()
    }

    /// True when some age-sex class merges males and females, which rules
    /// out clean sex breakdowns.
    pub fn has_sex_merged_classes(&self) -> bool {
        self.sex_of_class.contains(&Sex::Merged)
    }
}

/// Classes alternate male/female within each age band.
fn default_sex_layout(classes: u8) -> Vec<Sex> {
    (0..classes)
        .map(|i| if i % 2 == 0 { Sex::Male } else { Sex::Female })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ace2000_counts() {
        let s = PostStratScheme::ace2000();
        assert_eq!(s.len(), 448);
        assert_eq!(s.demographic_groups().len(), 48);
        assert_eq!(s.dims().demographic_groups(), 48);
        let total: f64 = s.strata().iter().map(|x| x.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(!s.has_sex_merged_classes());
    }

    #[test]
    fn assignment_is_unique() {
        let s = PostStratScheme::ace2000();
        let area = AreaKey {
            region: 2,
            place_type: 5,
            area: 0,
        };
        let g0 = DemographicGroup::new(1, 0);
        assert_eq!(
            s.assign(g0, &area, Some(Tenure::Owner)),
            Some(PostStratumKey::new(g0, Some(2), Some(5), None))
        );
        let g4 = DemographicGroup::new(1, 4);
        assert_eq!(
            s.assign(g4, &area, Some(Tenure::Renter)),
            Some(PostStratumKey::new(g4, None, None, Some(Tenure::Renter)))
        );
        // Tenure-split strata cannot be reached without knowing tenure.
        assert_eq!(s.assign(g4, &area, None), None);
    }

    #[test]
    fn full_cross_and_pooling() {
        let dims = SchemeDims {
            age_sex_classes: 2,
            race_groups: 3,
            regions: 4,
            place_types: 2,
            tenure_levels: 2,
        };
        assert_eq!(PostStratScheme::full_cross(dims, &[]).unwrap().len(), 2 * 3 * 4 * 2 * 2);
        assert_eq!(
            PostStratScheme::full_cross(dims, &[PooledDim::PlaceType])
                .unwrap()
                .len(),
            2 * 3 * 4 * 2
        );
        assert_eq!(PostStratScheme::demographic(8, 6, 4, 8).unwrap().len(), 48);
    }

    #[test]
    fn overlapping_strata_rejected() {
        let dims = SchemeDims {
            age_sex_classes: 1,
            race_groups: 1,
            regions: 2,
            place_types: 1,
            tenure_levels: 1,
        };
        let g = DemographicGroup::new(0, 0);
        let keys = vec![
            PostStratumKey::new(g, None, None, None),
            PostStratumKey::new(g, Some(0), None, None),
        ];
        assert!(matches!(
            PostStratScheme::explicit(dims, keys, None),
            Err(Error::InvalidScheme(_))
        ));
        let gap = vec![PostStratumKey::new(g, Some(0), None, None)];
        assert!(PostStratScheme::explicit(dims, gap, None).is_err());
    }

    #[test]
    fn bad_shares_rejected() {
        let dims = SchemeDims {
            age_sex_classes: 1,
            race_groups: 2,
            regions: 1,
            place_types: 1,
            tenure_levels: 1,
        };
        let keys = vec![
            PostStratumKey::demographic(DemographicGroup::new(0, 0)),
            PostStratumKey::demographic(DemographicGroup::new(0, 1)),
        ];
        assert!(PostStratScheme::explicit(dims, keys.clone(), Some(vec![0.5, 0.6])).is_err());
        let s = PostStratScheme::explicit(dims, keys, Some(vec![0.25, 0.75])).unwrap();
        assert_eq!(
            s.share(&PostStratumKey::demographic(DemographicGroup::new(0, 1))),
            Some(0.75)
        );
    }

    #[test]
    fn sex_merged_layout_is_flagged() {
        let s = PostStratScheme::demographic(3, 1, 1, 1)
            .unwrap()
            .with_sex_layout(vec![Sex::Merged, Sex::Male, Sex::Female])
            .unwrap();
        assert!(s.has_sex_merged_classes());
        assert_eq!(s.sex_of_class(0), Some(Sex::Merged));
    }

    #[test]
    fn spec_parses_from_json() {
        let spec: SchemeSpec = serde_json::from_str(
            r#"{"kind":"full_cross","age_sex_classes":2,"race_groups":2,"regions":4,"place_types":1,"tenure_levels":2}"#,
        )
        .unwrap();
        assert_eq!(spec.build().unwrap().len(), 32);
        let spec: SchemeSpec = serde_json::from_str(r#"{"kind":"ace2000"}"#).unwrap();
        assert_eq!(spec.build().unwrap().len(), 448);
    }
}
