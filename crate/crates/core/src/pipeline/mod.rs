//! Desk-scale pretrain / fine-tune demonstration on synthetic phantoms.

mod comparison;
mod config;
pub mod encoder;
mod phantom;
mod train;

pub use comparison::{run_comparison, ArmReport, ComparisonReport, SplitSummary};
pub use config::{DemoConfig, EncoderShape, PhantomConfig, TrainConfig};
pub use encoder::{encoder_forward, EncoderParams, ForwardCache};
pub use phantom::{make_phantom, make_phantom_set, make_synthetic_atlas, PhantomSet, CLASSES};
pub use train::{
    embed, evaluate, finetune_ce, pooled_features, predict_all, pretrain_contrastive, AugmentationSummary,
    EvalReport, Pretrained,
};
