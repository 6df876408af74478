//! Atlas-driven volumetric augmentation and soft-label contrastive learning.
//!
//! * [`volume`]: NIfTI-1 I/O, parcellation atlases, region masks.
//! * [`augment`]: brain-aware region replacement, 3D CutMix, label mixing.
//! * [`supcon`]: soft-label supervised contrastive loss and its gradient.
//! * [`pipeline`]: synthetic phantoms and a small pretrain/fine-tune demo.
//! * [`preview`]: PGM slice previews.
//! * [`cli`]: the `barkit` command-line front end.

pub mod augment;
pub mod cli;
pub mod error;
pub mod pipeline;
pub mod preview;
pub mod rng;
pub mod supcon;
pub mod volume;

pub use error::{Error, Result};
