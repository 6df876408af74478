//! Synthetic atlas and brain phantoms standing in for real MRIs.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::PhantomConfig;
use crate::augment::{LabeledVolumes, SoftLabel};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::volume::{diagonal_affine, ParcellationAtlas, Volume3D};

const SEMI_AXIS_FRACTION: f64 = 0.45;
const PHANTOM_STREAM_BASE: u64 = 1 << 32;

pub const CLASSES: usize = 2;

/// Ellipsoidal brain (semi-axes 0.45 * dims) split into `num_regions`
/// parcels around the centroid.
///
/// Parcels are azimuthal sectors about the z axis, split into lower and
/// upper halves when the region count is even; eight regions give the
/// eight octants.
pub fn make_synthetic_atlas(cfg: &PhantomConfig) -> Result<ParcellationAtlas> {
    cfg.validate()?;
    let dims = cfg.dims;
    let center = dims.map(|n| (n as f64 - 1.0) / 2.0);
    let semi = dims.map(|n| SEMI_AXIS_FRACTION * n as f64);
    let regions = cfg.num_regions as usize;
    let halves = if regions.is_multiple_of(2) { 2 } else { 1 };
    let sectors = regions / halves;

    let mut labels = vec![0u32; dims.iter().product()];
    let mut i = 0;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let d = [x as f64 - center[0], y as f64 - center[1], z as f64 - center[2]];
                let r2: f64 = (0..3).map(|a| (d[a] / semi[a]).powi(2)).sum();
                if r2 <= 1.0 {
                    let angle = d[1].atan2(d[0]).rem_euclid(TAU);
                    let sector = ((angle / TAU * sectors as f64) as usize).min(sectors - 1);
                    let half = usize::from(halves == 2 && d[2] > 0.0);
                    labels[i] = (1 + sector + sectors * half) as u32;
                }
                i += 1;
            }
        }
    }
    let lut: BTreeMap<u32, String> = (1..=cfg.num_regions).map(|id| (id, format!("parcel_{id}"))).collect();
    ParcellationAtlas::from_labels(dims, [1.0; 3], diagonal_affine([1.0; 3]), labels, lut)
}

/// One phantom: brain voxels `base + N(0, sigma^2)`, with class-1 signal
/// regions lowered by `signal_delta`. Background is 0.
pub fn make_phantom<R: Rng + ?Sized>(
    cfg: &PhantomConfig,
    atlas: &ParcellationAtlas,
    class: usize,
    rng: &mut R,
) -> Result<(Volume3D, SoftLabel)> {
    if class >= CLASSES {
        return Err(Error::InvalidParameter(format!("class {class} is not 0 or 1")));
    }
    if atlas.dims() != cfg.dims {
        return Err(Error::DimsMismatch {
            left: cfg.dims,
            right: atlas.dims(),
        });
    }
    let signal: BTreeSet<u32> = cfg.signal_regions.iter().copied().collect();
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let data = atlas
        .labels()
        .iter()
        .map(|&label| {
            if label == 0 {
                return 0.0;
            }
            let mut mean = cfg.base_intensity;
            if class == 1 && signal.contains(&label) {
                mean -= cfg.signal_delta;
            }
            let value = if cfg.noise_sigma > 0.0 { mean + noise.sample(rng) } else { mean };
            value as f32
        })
        .collect();
    let vol = Volume3D::new(atlas.dims(), atlas.spacing(), *atlas.affine(), data, crate::volume::DType::F32)?;
    Ok((vol, SoftLabel::one_hot(class, CLASSES)?))
}

/// A labeled set of phantoms generated from a contiguous id range.
#[derive(Debug, Clone)]
pub struct PhantomSet {
    pub store: LabeledVolumes,
    pub classes: Vec<usize>,
    /// Global sample ids; each phantom's noise comes from its own stream.
    pub sample_ids: Vec<u64>,
}

impl PhantomSet {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Phantoms for ids `first..first + count`; class alternates with the id.
pub fn make_phantom_set(
    cfg: &PhantomConfig,
    atlas: &ParcellationAtlas,
    seed: u64,
    first: u64,
    count: usize,
) -> Result<PhantomSet> {
    let mut volumes = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut classes = Vec::with_capacity(count);
    let sample_ids: Vec<u64> = (first..first + count as u64).collect();
    for &id in &sample_ids {
        let class = (id % CLASSES as u64) as usize;
        let (vol, label) = make_phantom(cfg, atlas, class, &mut substream(seed, PHANTOM_STREAM_BASE + id))?;
        volumes.push(vol);
        labels.push(label);
        classes.push(class);
    }
    Ok(PhantomSet {
        store: LabeledVolumes::new(volumes, labels)?,
        classes,
        sample_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn atlas_partitions_the_brain() {
        let cfg = PhantomConfig::default();
        let atlas = make_synthetic_atlas(&cfg).unwrap();
        assert_eq!(atlas.region_ids(), (1..=8).collect::<Vec<_>>());
        let counts = atlas.region_voxel_counts();
        assert_eq!(counts.values().sum::<usize>(), atlas.brain_voxel_count());
        let min = *counts.values().min().unwrap() as f64;
        let max = *counts.values().max().unwrap() as f64;
        assert!(max / min <= 1.05, "counts {counts:?}");
    }

    #[test]
    fn octants_match_coordinate_signs() {
        let cfg = PhantomConfig::default();
        let atlas = make_synthetic_atlas(&cfg).unwrap();
        // one voxel per octant, away from the axes
        let probe = |x: usize, y: usize, z: usize| atlas.labels()[x + 32 * (y + 32 * z)];
        let mut seen = BTreeSet::new();
        for &z in &[10usize, 21] {
            for &y in &[10usize, 21] {
                for &x in &[10usize, 21] {
                    seen.insert(probe(x, y, z));
                }
            }
        }
        assert_eq!(seen.len(), 8);
        assert!(!seen.contains(&0));
    }

    #[test]
    fn background_fraction_matches_ellipsoid_volume() {
        let atlas = make_synthetic_atlas(&PhantomConfig::default()).unwrap();
        let background = 1.0 - atlas.brain_voxel_count() as f64 / 32768.0;
        let analytic = 1.0 - 4.0 / 3.0 * std::f64::consts::PI * 0.45f64.powi(3);
        assert!((analytic - 0.618).abs() < 1e-3);
        assert!((background - analytic).abs() < 0.03, "background {background}");
    }

    #[test]
    fn odd_region_counts() {
        let cfg = PhantomConfig {
            num_regions: 3,
            signal_regions: vec![1],
            ..PhantomConfig::default()
        };
        let atlas = make_synthetic_atlas(&cfg).unwrap();
        let counts = atlas.region_voxel_counts();
        assert_eq!(counts.len(), 3);
        assert!(counts.values().all(|&c| c > 0));
    }

    #[test]
    fn noiseless_phantoms() {
        let cfg = PhantomConfig {
            noise_sigma: 0.0,
            ..PhantomConfig::default()
        };
        let atlas = make_synthetic_atlas(&cfg).unwrap();
        let (healthy, label) = make_phantom(&cfg, &atlas, 0, &mut seeded(1)).unwrap();
        assert_eq!(label.probs(), &[1.0, 0.0]);
        let (ad, _) = make_phantom(&cfg, &atlas, 1, &mut seeded(1)).unwrap();
        for (i, &l) in atlas.labels().iter().enumerate() {
            match l {
                0 => {
                    assert_eq!(healthy.data()[i], 0.0);
                    assert_eq!(ad.data()[i], 0.0);
                }
                1 | 2 => {
                    assert_eq!(healthy.data()[i], 1.0);
                    assert_eq!(ad.data()[i], (1.0f64 - 0.4) as f32);
                }
                _ => {
                    assert_eq!(healthy.data()[i], 1.0);
                    assert_eq!(ad.data()[i], 1.0);
                }
            }
        }
    }

    #[test]
    fn phantoms_are_deterministic() {
        let cfg = PhantomConfig::default();
        let atlas = make_synthetic_atlas(&cfg).unwrap();
        let a = make_phantom(&cfg, &atlas, 1, &mut seeded(5)).unwrap();
        let b = make_phantom(&cfg, &atlas, 1, &mut seeded(5)).unwrap();
        assert_eq!(a, b);
        assert!(make_phantom(&cfg, &atlas, 2, &mut seeded(5)).is_err());
    }
}
