//! Batch generation of augmented samples with per-pair random streams.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bar_replace, cutmix3d, cutmix_with_cuboid, mix_labels, sample_regions, Cuboid, RegionPolicy, SoftLabel};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::volume::{ParcellationAtlas, Volume3D};

/// Volumes and labels addressable by sample id.
pub trait SampleSource: Sync {
    fn volume(&self, id: usize) -> Result<&Volume3D>;
    fn label(&self, id: usize) -> Result<&SoftLabel>;
}

/// Plain in-memory sample store.
#[derive(Debug, Clone, Default)]
pub struct LabeledVolumes {
    volumes: Vec<Volume3D>,
    labels: Vec<SoftLabel>,
}

impl LabeledVolumes {
    pub fn new(volumes: Vec<Volume3D>, labels: Vec<SoftLabel>) -> Result<Self> {
        if volumes.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: volumes.len(),
                right: labels.len(),
            });
        }
        Ok(LabeledVolumes { volumes, labels })
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn volumes(&self) -> &[Volume3D] {
        &self.volumes
    }

    pub fn labels(&self) -> &[SoftLabel] {
        &self.labels
    }
}

impl SampleSource for LabeledVolumes {
    fn volume(&self, id: usize) -> Result<&Volume3D> {
        self.volumes.get(id).ok_or(Error::UnknownSample(id))
    }

    fn label(&self, id: usize) -> Result<&SoftLabel> {
        self.labels.get(id).ok_or(Error::UnknownSample(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bar,
    CutMix,
}

/// Which augmentation a batch applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Augmenter {
    Bar(RegionPolicy),
    CutMix { alpha: f64 },
}

impl Augmenter {
    pub fn method(&self) -> Method {
        match self {
            Augmenter::Bar(_) => Method::Bar,
            Augmenter::CutMix { .. } => Method::CutMix,
        }
    }
}

/// What was copied from the donor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replaced {
    Regions(BTreeSet<u32>),
    Cuboid(Cuboid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub method: Method,
    pub seed: u64,
    /// Index of the random sub-stream within `seed`.
    pub stream: u64,
    pub anchor: usize,
    pub donor: usize,
    pub replaced: Replaced,
}

#[derive(Debug, Clone)]
pub struct AugmentedSample {
    pub volume: Volume3D,
    pub ratio: f64,
    pub label: SoftLabel,
    pub provenance: Provenance,
}

impl AugmentedSample {
    /// Rebuild a sample from its provenance alone.
    pub fn replay(
        provenance: &Provenance,
        store: &impl SampleSource,
        atlas: &ParcellationAtlas,
    ) -> Result<AugmentedSample> {
        let anchor = store.volume(provenance.anchor)?;
        let donor = store.volume(provenance.donor)?;
        let replacement = match &provenance.replaced {
            Replaced::Regions(ids) => bar_replace(anchor, donor, atlas, ids)?,
            Replaced::Cuboid(c) => cutmix_with_cuboid(anchor, donor, atlas, *c)?,
        };
        let label = mix_labels(
            store.label(provenance.anchor)?,
            store.label(provenance.donor)?,
            replacement.ratio,
        )?;
        Ok(AugmentedSample {
            volume: replacement.volume,
            ratio: replacement.ratio,
            label,
            provenance: provenance.clone(),
        })
    }

    /// JSON metadata record written next to an emitted volume.
    pub fn record(&self, anchor: impl Into<String>, donor: impl Into<String>) -> SampleRecord {
        let (regions, cuboid) = match &self.provenance.replaced {
            Replaced::Regions(ids) => (Some(ids.iter().copied().collect()), None),
            Replaced::Cuboid(c) => (None, Some(*c)),
        };
        SampleRecord {
            method: self.provenance.method,
            seed: self.provenance.seed,
            ratio: self.ratio,
            label: self.label.probs().to_vec(),
            regions,
            cuboid,
            anchor: anchor.into(),
            donor: donor.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub method: Method,
    pub seed: u64,
    pub ratio: f64,
    pub label: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuboid: Option<Cuboid>,
    pub anchor: String,
    pub donor: String,
}

/// Augment a single (anchor, donor) pair using stream `stream` of `seed`.
pub fn augment_pair(
    anchor_id: usize,
    donor_id: usize,
    store: &impl SampleSource,
    atlas: &ParcellationAtlas,
    augmenter: Augmenter,
    seed: u64,
    stream: u64,
) -> Result<AugmentedSample> {
    let mut rng = substream(seed, stream);
    let anchor = store.volume(anchor_id)?;
    let donor = store.volume(donor_id)?;
    let (replacement, replaced) = match augmenter {
        Augmenter::Bar(policy) => {
            let regions = sample_regions(atlas, policy, &mut rng)?;
            (bar_replace(anchor, donor, atlas, &regions)?, Replaced::Regions(regions))
        }
        Augmenter::CutMix { alpha } => {
            let out = cutmix3d(anchor, donor, alpha, &mut rng, atlas)?;
            (out.replacement, Replaced::Cuboid(out.cuboid))
        }
    };
    let label = mix_labels(store.label(anchor_id)?, store.label(donor_id)?, replacement.ratio)?;
    Ok(AugmentedSample {
        volume: replacement.volume,
        ratio: replacement.ratio,
        label,
        provenance: Provenance {
            method: augmenter.method(),
            seed,
            stream,
            anchor: anchor_id,
            donor: donor_id,
            replaced,
        },
    })
}

/// One sample per pair; pair `i` draws from stream `i` of `seed`, so the
/// output does not depend on how the work is scheduled.
pub fn augment_batch(
    pairs: &[(usize, usize)],
    store: &impl SampleSource,
    atlas: &ParcellationAtlas,
    augmenter: Augmenter,
    seed: u64,
) -> Result<Vec<AugmentedSample>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(a, d))| augment_pair(a, d, store, atlas, augmenter, seed, i as u64))
        .collect()
}

pub fn bar_batch(
    pairs: &[(usize, usize)],
    store: &impl SampleSource,
    atlas: &ParcellationAtlas,
    policy: RegionPolicy,
    seed: u64,
) -> Result<Vec<AugmentedSample>> {
    augment_batch(pairs, store, atlas, Augmenter::Bar(policy), seed)
}
