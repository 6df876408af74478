//! Local-variability comparison between region replacement and CutMix.
//!
//! Boundary ratio shrinks as a mask grows, so the two methods are compared
//! at matched replacement ratio: CutMix draws are kept only when their ratio
//! lies within `ratio_tolerance` of the BAR mean ratio.

use serde::{Deserialize, Serialize};

use super::{boundary_ratio, draw_cuboid, sample_regions, RegionPolicy};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::volume::ParcellationAtlas;

const CUTMIX_STREAM_BASE: u64 = 1 << 40;
const MAX_ATTEMPTS_PER_DRAW: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityReport {
    pub draws: usize,
    pub bar_mean_ratio: f64,
    pub bar_mean_boundary: f64,
    pub cutmix_mean_ratio: f64,
    pub cutmix_mean_boundary: f64,
    /// CutMix draws attempted to collect `draws` ratio-matched ones.
    pub cutmix_attempts: usize,
    /// Statistics over every non-empty CutMix draw, matched or not.
    pub cutmix_unmatched_mean_ratio: f64,
    pub cutmix_unmatched_mean_boundary: f64,
}

impl VariabilityReport {
    pub fn bar_more_variable(&self) -> bool {
        self.bar_mean_boundary > self.cutmix_mean_boundary
    }
}

pub fn compare_variability(
    atlas: &ParcellationAtlas,
    policy: RegionPolicy,
    alpha: f64,
    draws: usize,
    ratio_tolerance: f64,
    seed: u64,
) -> Result<VariabilityReport> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be positive".into()));
    }
    let brain = atlas.brain_mask();
    let brain_count = brain.voxel_count();
    if brain_count == 0 {
        return Err(Error::EmptyMask);
    }

    let mut bar_ratio = 0.0;
    let mut bar_boundary = 0.0;
    for t in 0..draws {
        let regions = sample_regions(atlas, policy, &mut substream(seed, t as u64))?;
        let mask = atlas.region_mask(&regions)?;
        if mask.voxel_count() == 0 {
            return Err(Error::EmptyMask);
        }
        bar_ratio += mask.voxel_count() as f64 / brain_count as f64;
        bar_boundary += boundary_ratio(&mask)?;
    }
    let bar_mean_ratio = bar_ratio / draws as f64;
    let bar_mean_boundary = bar_boundary / draws as f64;

    let mut matched = 0usize;
    let mut matched_ratio = 0.0;
    let mut matched_boundary = 0.0;
    let mut nonempty = 0usize;
    let mut all_ratio = 0.0;
    let mut all_boundary = 0.0;
    let mut attempts = 0usize;
    let max_attempts = draws * MAX_ATTEMPTS_PER_DRAW;
    while matched < draws {
        if attempts == max_attempts {
            return Err(Error::InvalidParameter(format!(
                "only {matched} of {draws} CutMix draws matched ratio {bar_mean_ratio:.3} within {ratio_tolerance}"
            )));
        }
        let mut rng = substream(seed, CUTMIX_STREAM_BASE + attempts as u64);
        attempts += 1;
        let (cuboid, _) = draw_cuboid(atlas.dims(), alpha, &mut rng)?;
        let mask = cuboid.mask(atlas.dims()).intersect(&brain);
        if mask.voxel_count() == 0 {
            continue;
        }
        let ratio = mask.voxel_count() as f64 / brain_count as f64;
        let boundary = boundary_ratio(&mask)?;
        nonempty += 1;
        all_ratio += ratio;
        all_boundary += boundary;
        if (ratio - bar_mean_ratio).abs() <= ratio_tolerance {
            matched += 1;
            matched_ratio += ratio;
            matched_boundary += boundary;
        }
    }

    Ok(VariabilityReport {
        draws,
        bar_mean_ratio,
        bar_mean_boundary,
        cutmix_mean_ratio: matched_ratio / draws as f64,
        cutmix_mean_boundary: matched_boundary / draws as f64,
        cutmix_attempts: attempts,
        cutmix_unmatched_mean_ratio: all_ratio / nonempty as f64,
        cutmix_unmatched_mean_boundary: all_boundary / nonempty as f64,
    })
}
