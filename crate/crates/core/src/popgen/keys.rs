use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// An (age-sex class, race/ethnicity) cell of the demographic breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DemographicGroup {
    pub age_sex: u8,
    pub race: u8,
}

impl DemographicGroup {
    pub fn new(age_sex: u8, race: u8) -> Self {
        DemographicGroup { age_sex, race }
    }
}

impl fmt::Display for DemographicGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "as{}-r{}", self.age_sex, self.race)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tenure {
    Renter,
    Owner,
}

impl Tenure {
    pub const ALL: [Tenure; 2] = [Tenure::Renter, Tenure::Owner];

    pub fn as_str(self) -> &'static str {
        match self {
            Tenure::Renter => "renter",
            Tenure::Owner => "owner",
        }
    }
}

impl std::str::FromStr for Tenure {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "renter" => Ok(Tenure::Renter),
            "owner" => Ok(Tenure::Owner),
            other => Err(format!("unknown tenure `{other}`")),
        }
    }
}

/// Post-stratum label. A `None` geographic field means the stratum pools
/// over that dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "FlatKey", into = "FlatKey")]
pub struct PostStratumKey {
    pub group: DemographicGroup,
    pub region: Option<u8>,
    pub place_type: Option<u8>,
    pub tenure: Option<Tenure>,
}

impl PostStratumKey {
    pub fn new(group: DemographicGroup, region: Option<u8>, place_type: Option<u8>, tenure: Option<Tenure>) -> Self {
        PostStratumKey {
            group,
            region,
            place_type,
            tenure,
        }
    }

    /// Stratum pooled over all geography and tenure.
    pub fn demographic(group: DemographicGroup) -> Self {
        PostStratumKey::new(group, None, None, None)
    }

    /// Whether a person living at `area` could belong to this stratum.
    pub fn admits_area(&self, area: &AreaKey) -> bool {
        self.region.is_none_or(|r| r == area.region) && self.place_type.is_none_or(|p| p == area.place_type)
    }

    pub const CSV_COLUMNS: [&'static str; 5] = ["age_sex", "race", "region", "place_type", "tenure"];

    pub fn csv_fields(&self) -> [String; 5] {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map_or_else(|| "*".to_string(), |v| v.to_string())
        }
        [
            self.group.age_sex.to_string(),
            self.group.race.to_string(),
            opt(self.region),
            opt(self.place_type),
            opt(self.tenure.map(Tenure::as_str)),
        ]
    }

    pub fn from_csv_fields(fields: [&str; 5]) -> Result<Self> {
        fn int(column: &str, s: &str) -> Result<u8> {
            s.trim()
                .parse()
                .map_err(|_| Error::schema(column, format!("expected a small integer, got `{s}`")))
        }
        fn opt_int(column: &str, s: &str) -> Result<Option<u8>> {
            if s.trim() == "*" {
                Ok(None)
            } else {
                int(column, s).map(Some)
            }
        }
        let tenure = match fields[4].trim() {
            "*" => None,
            s => Some(s.parse::<Tenure>().map_err(|e| Error::schema("tenure", e))?),
        };
        Ok(PostStratumKey {
            group: DemographicGroup::new(int("age_sex", fields[0])?, int("race", fields[1])?),
            region: opt_int("region", fields[2])?,
            place_type: opt_int("place_type", fields[3])?,
            tenure,
        })
    }
}

/// Flat serde shape of [`PostStratumKey`], as written in config files.
#[derive(Serialize, Deserialize)]
struct FlatKey {
    age_sex: u8,
    race: u8,
    #[serde(default)]
    region: Option<u8>,
    #[serde(default)]
    place_type: Option<u8>,
    #[serde(default)]
    tenure: Option<Tenure>,
}

impl From<FlatKey> for PostStratumKey {
    fn from(k: FlatKey) -> Self {
        PostStratumKey::new(
            DemographicGroup::new(k.age_sex, k.race),
            k.region,
            k.place_type,
            k.tenure,
        )
    }
}

impl From<PostStratumKey> for FlatKey {
    fn from(k: PostStratumKey) -> Self {
        FlatKey {
            age_sex: k.group.age_sex,
            race: k.group.race,
            region: k.region,
            place_type: k.place_type,
            tenure: k.tenure,
        }
    }
}

impl fmt::Display for PostStratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [_, _, region, place, tenure] = self.csv_fields();
        write!(f, "{}/reg{}/pt{}/{}", self.group, region, place, tenure)
    }
}

/// Sub-state area: the finest level at which synthetic estimates are
/// reported. `area` is unique across the whole geography.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AreaKey {
    pub region: u8,
    pub place_type: u8,
    pub area: u32,
}

impl fmt::Display for AreaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "reg{}/pt{}/area{}", self.region, self.place_type, self.area)
    }
}

/// Full geographic location of a person or record. Blocks are numbered
/// globally and each belongs to exactly one area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GeographyKey {
    pub region: u8,
    pub place_type: u8,
    pub area: u32,
    pub block: u32,
}

impl GeographyKey {
    pub fn area_key(&self) -> AreaKey {
        AreaKey {
            region: self.region,
            place_type: self.place_type,
            area: self.area,
        }
    }
}

impl fmt::Display for GeographyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/blk{}", self.area_key(), self.block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_fields_round_trip() {
        let k = PostStratumKey::new(DemographicGroup::new(3, 1), Some(2), None, Some(Tenure::Owner));
        let f = k.csv_fields();
        assert_eq!(f, ["3", "1", "2", "*", "owner"].map(String::from));
        let back = PostStratumKey::from_csv_fields([&f[0], &f[1], &f[2], &f[3], &f[4]]).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn bad_field_names_column() {
        let err = PostStratumKey::from_csv_fields(["1", "x", "*", "*", "*"]).unwrap_err();
        assert!(err.to_string().contains("`race`"), "{err}");
        let err = PostStratumKey::from_csv_fields(["1", "1", "*", "*", "tenant"]).unwrap_err();
        assert!(err.to_string().contains("`tenure`"), "{err}");
    }

    #[test]
    fn area_admission() {
        let area = AreaKey {
            region: 1,
            place_type: 3,
            area: 9,
        };
        let g = DemographicGroup::new(0, 0);
        assert!(PostStratumKey::demographic(g).admits_area(&area));
        assert!(PostStratumKey::new(g, Some(1), Some(3), None).admits_area(&area));
        assert!(!PostStratumKey::new(g, Some(2), None, None).admits_area(&area));
    }
}
