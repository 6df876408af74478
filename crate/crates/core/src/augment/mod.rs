//! Brain-aware region replacement, 3D CutMix, soft-label mixing, and the
//! boundary-ratio variability metric.

mod batch;
mod boundary;
mod label;
mod regions;
mod replace;
mod variability;

pub use batch::{
    augment_batch, augment_pair, bar_batch, AugmentedSample, Augmenter, LabeledVolumes, Method, Provenance,
    Replaced, SampleRecord, SampleSource,
};
pub use boundary::boundary_ratio;
pub use label::{mix_labels, SoftLabel};
pub use regions::{sample_regions, RegionPolicy};
pub use replace::{bar_replace, cutmix3d, cutmix_with_cuboid, draw_cuboid, CutMix, Cuboid, Replacement};
pub use variability::{compare_variability, VariabilityReport};
