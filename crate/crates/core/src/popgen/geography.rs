use serde::{Deserialize, Serialize};

use super::keys::{AreaKey, GeographyKey};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub key: AreaKey,
    pub first_block: u32,
    pub blocks: u32,
}

impl Area {
    pub fn block_range(&self) -> std::ops::Range<u32> {
        self.first_block..self.first_block + self.blocks
    }
}

/// Region → place type → area → block hierarchy. Areas are numbered
/// `0..n` and blocks `0..m` globally, each block in exactly one area.
#[derive(Debug, Clone, PartialEq)]
pub struct Geography {
    areas: Vec<Area>,
    block_area: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub region: u8,
    pub place_type: u8,
    pub blocks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeographySpec {
    /// The same number of areas in every (region, place type) cell.
    Grid {
        regions: u8,
        place_types: u8,
        areas_per_cell: u32,
        blocks_per_area: u32,
    },
    Explicit {
        areas: Vec<AreaSpec>,
    },
}

impl GeographySpec {
    pub fn build(&self) -> Result<Geography> {
        match *self {
            GeographySpec::Grid {
                regions,
                place_types,
                areas_per_cell,
                blocks_per_area,
            } => Geography::grid(regions, place_types, areas_per_cell, blocks_per_area),
            GeographySpec::Explicit { ref areas } => Geography::from_areas(areas),
        }
    }
}

impl Geography {
    pub fn grid(regions: u8, place_types: u8, areas_per_cell: u32, blocks_per_area: u32) -> Result<Self> {
        let mut specs = Vec::new();
        for region in 0..regions {
            for place_type in 0..place_types {
                for _ in 0..areas_per_cell {
                    specs.push(AreaSpec {
                        region,
                        place_type,
                        blocks: blocks_per_area,
                    });
                }
            }
        }
        Geography::from_areas(&specs)
    }

    pub fn from_areas(specs: &[AreaSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidConfig("geography has no areas".into()));
        }
        let mut areas = Vec::with_capacity(specs.len());
        let mut block_area = Vec::new();
        for (i, s) in specs.iter().enumerate() {
            if s.blocks == 0 {
                return Err(Error::InvalidConfig(format!("area {i} has no blocks")));
            }
            let first_block =
                u32::try_from(block_area.len()).map_err(|_| Error::InvalidConfig("too many blocks".into()))?;
            areas.push(Area {
                key: AreaKey {
                    region: s.region,
                    place_type: s.place_type,
                    area: i as u32,
                },
                first_block,
                blocks: s.blocks,
            });
            block_area.extend(std::iter::repeat_n(i as u32, s.blocks as usize));
        }
        Ok(Geography { areas, block_area })
    }

    pub fn areas(&self) -> &[Area] {
        &self.areas
    }

    pub fn area(&self, index: u32) -> Option<&Area> {
        self.areas.get(index as usize)
    }

    pub fn block_count(&self) -> u32 {
        self.block_area.len() as u32
    }

    pub fn locate(&self, block: u32) -> Option<GeographyKey> {
        let area = self.areas.get(*self.block_area.get(block as usize)? as usize)?;
        Some(GeographyKey {
            region: area.key.region,
            place_type: area.key.place_type,
            area: area.key.area,
            block,
        })
    }

    /// Areas sharing a (region, place type) cell, in index order.
    pub fn areas_in_cell(&self, region: u8, place_type: u8) -> impl Iterator<Item = &Area> {
        self.areas
            .iter()
            .filter(move |a| a.key.region == region && a.key.place_type == place_type)
    }
}
