//! Region replacement (BAR) and the 3D CutMix baseline.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{linear_index, validate_alignment, ParcellationAtlas, RegionMask, Volume3D};

/// Output of a replacement: the synthetic volume, the exact replacement
/// ratio, and the mask of replaced brain voxels.
#[derive(Debug, Clone)]
pub struct Replacement {
    pub volume: Volume3D,
    pub ratio: f64,
    pub mask: RegionMask,
}

impl Replacement {
    pub fn replaced_voxels(&self) -> usize {
        self.mask.voxel_count()
    }
}

fn ratio_of(replaced: usize, brain: usize) -> f64 {
    if brain == 0 {
        0.0
    } else {
        replaced as f64 / brain as f64
    }
}

fn copy_masked(anchor: &Volume3D, donor: &Volume3D, take_donor: impl Fn(usize) -> bool) -> Result<Volume3D> {
    let data = anchor
        .data()
        .iter()
        .zip(donor.data())
        .enumerate()
        .map(|(i, (a, d))| if take_donor(i) { *d } else { *a })
        .collect();
    anchor.with_data(data)
}

/// Copy donor voxels into the anchor wherever the atlas label is in `regions`.
///
/// The ratio is the replaced-voxel count over the brain-voxel count.
pub fn bar_replace(
    anchor: &Volume3D,
    donor: &Volume3D,
    atlas: &ParcellationAtlas,
    regions: &BTreeSet<u32>,
) -> Result<Replacement> {
    validate_alignment(anchor, atlas)?;
    validate_alignment(donor, atlas)?;
    if regions.is_empty() {
        return Err(Error::EmptyRegionSelection);
    }
    let mask = atlas.region_mask(regions)?;
    let volume = copy_masked(anchor, donor, |i| mask.contains(i))?;
    let ratio = ratio_of(mask.voxel_count(), atlas.brain_voxel_count());
    Ok(Replacement { volume, ratio, mask })
}

/// Half-open axis-aligned box `[x0, x1) x [y0, y1) x [z0, z1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "[usize; 6]", from = "[usize; 6]")]
pub struct Cuboid {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Cuboid {
    /// Side length per axis is `round(n * (1 - lambda)^(1/3))`, centered on
    /// `center` and clipped to the grid.
    pub fn from_lambda(dims: [usize; 3], lambda: f64, center: [usize; 3]) -> Self {
        let scale = (1.0 - lambda).max(0.0).cbrt();
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for axis in 0..3 {
            let n = dims[axis] as i64;
            // f64::round rounds half away from zero
            let side = ((n as f64 * scale).round() as i64).clamp(0, n);
            let start = center[axis] as i64 - side / 2;
            lo[axis] = start.clamp(0, n) as usize;
            hi[axis] = (start + side).clamp(0, n) as usize;
        }
        Cuboid { lo, hi }
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let p = [x, y, z];
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] < self.hi[a])
    }

    pub fn volume(&self) -> usize {
        (0..3).map(|a| self.hi[a].saturating_sub(self.lo[a])).product()
    }

    pub fn mask(&self, dims: [usize; 3]) -> RegionMask {
        let mut bits = vec![false; dims.iter().product()];
        for z in self.lo[2]..self.hi[2] {
            for y in self.lo[1]..self.hi[1] {
                for x in self.lo[0]..self.hi[0] {
                    bits[linear_index(dims, x, y, z)] = true;
                }
            }
        }
        RegionMask::from_bits(dims, bits)
    }
}

impl From<Cuboid> for [usize; 6] {
    fn from(c: Cuboid) -> Self {
        [c.lo[0], c.hi[0], c.lo[1], c.hi[1], c.lo[2], c.hi[2]]
    }
}

impl From<[usize; 6]> for Cuboid {
    fn from(b: [usize; 6]) -> Self {
        Cuboid {
            lo: [b[0], b[2], b[4]],
            hi: [b[1], b[3], b[5]],
        }
    }
}

/// Draw `lambda ~ Beta(alpha, alpha)` and a uniform center, returning the clipped cuboid.
pub fn draw_cuboid<R: Rng + ?Sized>(dims: [usize; 3], alpha: f64, rng: &mut R) -> Result<(Cuboid, f64)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let lambda = beta.sample(rng);
    let center = [
        rng.random_range(0..dims[0]),
        rng.random_range(0..dims[1]),
        rng.random_range(0..dims[2]),
    ];
    Ok((Cuboid::from_lambda(dims, lambda, center), lambda))
}

#[derive(Debug, Clone)]
pub struct CutMix {
    pub replacement: Replacement,
    pub cuboid: Cuboid,
    pub lambda: f64,
}

/// 3D CutMix: copy a donor cuboid into the anchor.
///
/// The ratio is recomputed from the replaced brain voxels, not taken from
/// the nominal `1 - lambda`.
pub fn cutmix3d<R: Rng + ?Sized>(
    anchor: &Volume3D,
    donor: &Volume3D,
    alpha: f64,
    rng: &mut R,
    atlas: &ParcellationAtlas,
) -> Result<CutMix> {
    validate_alignment(anchor, atlas)?;
    validate_alignment(donor, atlas)?;
    let (cuboid, lambda) = draw_cuboid(anchor.dims(), alpha, rng)?;
    let replacement = cutmix_with_cuboid(anchor, donor, atlas, cuboid)?;
    Ok(CutMix {
        replacement,
        cuboid,
        lambda,
    })
}

pub fn cutmix_with_cuboid(
    anchor: &Volume3D,
    donor: &Volume3D,
    atlas: &ParcellationAtlas,
    cuboid: Cuboid,
) -> Result<Replacement> {
    validate_alignment(anchor, atlas)?;
    validate_alignment(donor, atlas)?;
    let dims = anchor.dims();
    let boxed = cuboid.mask(dims);
    let volume = copy_masked(anchor, donor, |i| boxed.contains(i))?;
    let mask = boxed.intersect(&atlas.brain_mask());
    let ratio = ratio_of(mask.voxel_count(), atlas.brain_voxel_count());
    Ok(Replacement { volume, ratio, mask })
}
