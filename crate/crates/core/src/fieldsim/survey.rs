use rand::seq::index;
use rand::Rng;
use std::io::Write;

use crate::error::{Error, Result};
use crate::popgen::{GeographyKey, Population, PostStratumKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Respondent {
    pub person: u32,
    pub stratum: PostStratumKey,
    pub geo: GeographyKey,
    pub mover: bool,
}

/// The coverage survey: a simple random sample of blocks and every
/// survey-captured person living in them.
#[derive(Debug, Clone, PartialEq)]
pub struct PSample {
    /// Sorted block indices.
    pub sampled_blocks: Vec<u32>,
    pub total_blocks: u32,
    pub respondents: Vec<Respondent>,
}

impl PSample {
    /// Expansion weight from sampled blocks to all blocks.
    pub fn weight(&self) -> f64 {
        self.total_blocks as f64 / self.sampled_blocks.len() as f64
    }

    /// Membership mask indexed by block.
    pub fn block_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total_blocks as usize];
        for &b in &self.sampled_blocks {
            mask[b as usize] = true;
        }
        mask
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "person_id",
            "age_sex",
            "race",
            "region",
            "place_type",
            "tenure",
            "area",
            "block",
            "mover",
        ])?;
        for r in &self.respondents {
            let s = r.stratum.csv_fields();
            out.write_record([
                r.person.to_string().as_str(),
                &s[0],
                &s[1],
                &s[2],
                &s[3],
                &s[4],
                &r.geo.area.to_string(),
                &r.geo.block.to_string(),
                if r.mover { "1" } else { "0" },
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Samples `round(fraction · blocks)` blocks without replacement.
pub fn draw_psample<R: Rng + ?Sized>(pop: &Population, block_fraction: f64, rng: &mut R) -> Result<PSample> {
    if !(block_fraction > 0.0 && block_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "block sample fraction must lie in (0, 1], got {block_fraction}"
        )));
    }
    let total = pop.geography.block_count();
    let k = (block_fraction * total as f64).round() as usize;
    if k == 0 {
        return Err(Error::EmptySample);
    }
    let mut sampled_blocks: Vec<u32> = if k == total as usize {
        (0..total).collect()
    } else {
        index::sample(rng, total as usize, k)
            .into_iter()
            .map(|b| b as u32)
            .collect()
    };
    sampled_blocks.sort_unstable();

    let mut ps = PSample {
        sampled_blocks,
        total_blocks: total,
        respondents: Vec::new(),
    };
    let mask = ps.block_mask();
    ps.respondents = pop
        .persons
        .iter()
        .filter(|p| p.survey && mask[p.geo.block as usize])
        .map(|p| Respondent {
            person: p.id,
            stratum: p.stratum,
            geo: p.geo,
            mover: p.mover,
        })
        .collect();
    Ok(ps)
}
