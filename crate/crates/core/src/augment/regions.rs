use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::ParcellationAtlas;

/// How many atlas regions a single replacement swaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionPolicy {
    /// Exactly `k` distinct regions, uniformly without replacement.
    FixedCount { k: usize },
    /// Each region independently with probability `p`; empty draws are redrawn.
    Bernoulli { p: f64 },
}

impl Default for RegionPolicy {
    fn default() -> Self {
        RegionPolicy::FixedCount { k: 2 }
    }
}

impl RegionPolicy {
    pub fn validate(&self, available: usize) -> Result<()> {
        match *self {
            RegionPolicy::FixedCount { k: 0 } => {
                Err(Error::InvalidParameter("FixedCount k must be positive".into()))
            }
            RegionPolicy::FixedCount { k } if k > available => {
                Err(Error::KTooLarge { k, available })
            }
            RegionPolicy::Bernoulli { p } if !(p > 0.0 && p < 1.0) => Err(Error::InvalidParameter(
                format!("Bernoulli p must lie in (0, 1), got {p}"),
            )),
            _ => Ok(()),
        }
    }
}

pub fn sample_regions<R: Rng + ?Sized>(
    atlas: &ParcellationAtlas,
    policy: RegionPolicy,
    rng: &mut R,
) -> Result<BTreeSet<u32>> {
    let ids = atlas.region_ids();
    if ids.is_empty() {
        return Err(Error::EmptyRegionSelection);
    }
    policy.validate(ids.len())?;
    match policy {
        RegionPolicy::FixedCount { k } => Ok(rand::seq::index::sample(rng, ids.len(), k)
            .into_iter()
            .map(|i| ids[i])
            .collect()),
        RegionPolicy::Bernoulli { p } => loop {
            let picked: BTreeSet<u32> = ids.iter().copied().filter(|_| rng.random_bool(p)).collect();
            if !picked.is_empty() {
                return Ok(picked);
            }
        },
    }
}
