use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::encoder::EncoderParams;
use super::phantom::{make_phantom_set, make_synthetic_atlas, PhantomSet};
use super::train::{evaluate, pooled_features, finetune_ce, pretrain_contrastive, AugmentationSummary, EvalReport};
use super::DemoConfig;
use crate::augment::{compare_variability, Augmenter, VariabilityReport};
use crate::error::Result;
use crate::rng::substream;

const INIT_STREAM: u64 = 1;
const MATCHED_RATIO_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub augmentation: Option<AugmentationSummary>,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train_ids: [u64; 2],
    pub test_ids: [u64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: DemoConfig,
    pub split: SplitSummary,
    pub arms: Vec<ArmReport>,
    pub variability: VariabilityReport,
}

/// Region-replacement pretraining, CutMix pretraining, and from-scratch
/// cross-entropy, all on the same splits and initial weights.
pub fn run_comparison(cfg: &DemoConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let train_cfg = &cfg.train;
    let atlas = make_synthetic_atlas(&cfg.phantom)?;
    let n_train = train_cfg.train_size as u64;
    let n_test = train_cfg.test_size as u64;
    // disjoint id ranges keep train and test phantoms apart
    let train = make_phantom_set(&cfg.phantom, &atlas, train_cfg.seed, 0, train_cfg.train_size)?;
    let test = make_phantom_set(&cfg.phantom, &atlas, train_cfg.seed, n_train, train_cfg.test_size)?;
    let mut init = EncoderParams::init(&cfg.encoder, &mut substream(train_cfg.seed, INIT_STREAM));
    init.center_on(&mean_features(&init, &train)?);

    let mut arms = Vec::with_capacity(3);
    for (name, augmenter) in [
        ("bar_pretrain_finetune", Augmenter::Bar(train_cfg.policy)),
        ("cutmix_pretrain_finetune", Augmenter::CutMix { alpha: train_cfg.cutmix_alpha }),
    ] {
        let pre = pretrain_contrastive(&init, &train, &atlas, augmenter, train_cfg)?;
        let (params, finetune_curve) = finetune_ce(&pre.params, &train, train_cfg, train_cfg.unfreeze_encoder)?;
        let mut eval = evaluate(&params, &test)?;
        eval.pretrain_loss = pre.loss_curve;
        eval.finetune_loss = finetune_curve;
        arms.push(ArmReport {
            name: name.to_string(),
            augmentation: Some(pre.summary),
            eval,
        });
    }
    let (scratch, scratch_curve) = finetune_ce(&init, &train, train_cfg, true)?;
    let mut eval = evaluate(&scratch, &test)?;
    eval.finetune_loss = scratch_curve;
    arms.push(ArmReport {
        name: "from_scratch_ce".to_string(),
        augmentation: None,
        eval,
    });

    let variability = compare_variability(
        &atlas,
        train_cfg.policy,
        train_cfg.cutmix_alpha,
        train_cfg.variability_draws,
        MATCHED_RATIO_TOLERANCE,
        train_cfg.seed,
    )?;

    Ok(ComparisonReport {
        config: cfg.clone(),
        split: SplitSummary {
            train_ids: [0, n_train],
            test_ids: [n_train, n_train + n_test],
        },
        arms,
        variability,
    })
}

fn mean_features(params: &EncoderParams, data: &PhantomSet) -> Result<Vec<f64>> {
    let features = pooled_features(params, data)?;
    let mut mean = vec![0.0; params.shape.features()];
    for f in &features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= features.len() as f64);
    Ok(mean)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

impl ComparisonReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<26} {:>8} {:>9} {:>8} {:>4} {:>4} {:>4} {:>4}",
            "arm", "accuracy", "precision", "recall", "TP", "FP", "FN", "TN"
        );
        for arm in &self.arms {
            let e = &arm.eval;
            let _ = writeln!(
                out,
                "{:<26} {:>8.4} {:>9} {:>8} {:>4} {:>4} {:>4} {:>4}",
                arm.name,
                e.accuracy,
                opt(e.precision),
                opt(e.recall),
                e.true_positive,
                e.false_positive,
                e.false_negative,
                e.true_negative
            );
        }
        let v = &self.variability;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "boundary ratio (ratio-matched, {} draws): bar {:.4} (mean ratio {:.4}) vs cutmix {:.4} (mean ratio {:.4})",
            v.draws, v.bar_mean_boundary, v.bar_mean_ratio, v.cutmix_mean_boundary, v.cutmix_mean_ratio
        );
        let _ = writeln!(
            out,
            "cutmix unmatched: boundary {:.4}, mean ratio {:.4} over {} attempts",
            v.cutmix_unmatched_mean_boundary, v.cutmix_unmatched_mean_ratio, v.cutmix_attempts
        );
        out
    }
}
