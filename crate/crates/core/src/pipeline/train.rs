//! Contrastive pretraining, cross-entropy fine-tuning, and evaluation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{
    backward_raw, cross_entropy_backward, encoder_forward, forward_features, pool_features, predict, EncoderParams,
};
use super::phantom::PhantomSet;
use super::TrainConfig;
use crate::augment::{augment_batch, Augmenter};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::supcon::{soft_supcon_loss_and_grad, EmbeddingBatch, Matrix};
use crate::volume::ParcellationAtlas;

const PRETRAIN_STREAM_BASE: u64 = 1 << 20;
const FINETUNE_STREAM_BASE: u64 = 2 << 20;

/// Summary of the augmented samples seen during pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSummary {
    pub augmenter: Augmenter,
    pub samples: usize,
    pub mean_ratio: f64,
    /// Batches skipped because no anchor had positive affinity.
    pub skipped_batches: usize,
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub params: EncoderParams,
    /// Mean contrastive loss per epoch.
    pub loss_curve: Vec<f64>,
    pub summary: AugmentationSummary,
}

/// Pretrain the encoder with the soft-label contrastive loss on augmented
/// (anchor, random donor) pairs drawn fresh every epoch.
pub fn pretrain_contrastive(
    init: &EncoderParams,
    data: &PhantomSet,
    atlas: &ParcellationAtlas,
    augmenter: Augmenter,
    cfg: &TrainConfig,
) -> Result<Pretrained> {
    cfg.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidConfig("pretraining needs at least 2 samples".into()));
    }
    let mut params = init.clone();
    let mut loss_curve = Vec::with_capacity(cfg.pretrain_epochs);
    let mut samples = 0usize;
    let mut ratio_sum = 0.0;
    let mut skipped = 0usize;

    for epoch in 0..cfg.pretrain_epochs {
        let mut rng = substream(cfg.seed, PRETRAIN_STREAM_BASE + epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut pairs = Vec::with_capacity(chunk.len() * cfg.views);
            for &anchor in chunk {
                for _ in 0..cfg.views {
                    let mut donor = rng.random_range(0..n - 1);
                    if donor >= anchor {
                        donor += 1;
                    }
                    pairs.push((anchor, donor));
                }
            }
            if pairs.len() < 2 {
                continue;
            }
            let batch_seed: u64 = rng.random();
            let augmented = augment_batch(&pairs, &data.store, atlas, augmenter, batch_seed)?;

            let mut caches = Vec::with_capacity(augmented.len());
            let mut raw = Vec::with_capacity(augmented.len() * params.shape.embedding);
            let mut labels = Vec::with_capacity(augmented.len());
            for sample in augmented {
                samples += 1;
                ratio_sum += sample.ratio;
                let features = pool_features(&sample.volume, params.shape.pool_grid)?;
                let cache = forward_features(&params, &features)?;
                raw.extend_from_slice(&cache.raw);
                caches.push(cache);
                labels.push(sample.label);
            }
            let batch = EmbeddingBatch::new(
                Matrix::from_vec(caches.len(), params.shape.embedding, raw)?,
                labels,
                cfg.temperature,
            )?;
            let out = match soft_supcon_loss_and_grad(&batch) {
                Ok(out) => out,
                Err(Error::NoValidAnchors) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut grads = EncoderParams::zeros(&params.shape);
            for (i, cache) in caches.iter().enumerate() {
                backward_raw(&params, cache, out.raw_grad.row(i), &mut grads);
            }
            params.sgd_step(&grads, cfg.learning_rate);
            epoch_loss += out.report.value;
            batches += 1;
        }
        loss_curve.push(if batches > 0 { epoch_loss / batches as f64 } else { f64::NAN });
    }

    if !params.is_finite() {
        return Err(Error::InvalidParameter("pretraining diverged".into()));
    }
    Ok(Pretrained {
        params,
        loss_curve,
        summary: AugmentationSummary {
            augmenter,
            samples,
            mean_ratio: if samples > 0 { ratio_sum / samples as f64 } else { 0.0 },
            skipped_batches: skipped,
        },
    })
}

/// Pooled features of every volume in the set.
pub fn pooled_features(params: &EncoderParams, data: &PhantomSet) -> Result<Vec<Vec<f64>>> {
    data.store
        .volumes()
        .iter()
        .map(|v| pool_features(v, params.shape.pool_grid))
        .collect()
}

/// Softmax cross-entropy training on hard labels of unaugmented volumes.
/// Only the head moves unless `unfreeze_encoder` is set.
pub fn finetune_ce(
    init: &EncoderParams,
    data: &PhantomSet,
    cfg: &TrainConfig,
    unfreeze_encoder: bool,
) -> Result<(EncoderParams, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("fine-tuning needs at least one sample".into()));
    }
    let features = pooled_features(init, data)?;
    let mut params = init.clone();
    let mut curve = Vec::with_capacity(cfg.finetune_epochs);
    for epoch in 0..cfg.finetune_epochs {
        let mut rng = substream(cfg.seed, FINETUNE_STREAM_BASE + epoch as u64);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let weight = 1.0 / chunk.len() as f64;
            let mut grads = EncoderParams::zeros(&params.shape);
            for &i in chunk {
                let cache = forward_features(&params, &features[i])?;
                epoch_loss += cross_entropy_backward(
                    &params,
                    &cache,
                    data.classes[i],
                    weight,
                    unfreeze_encoder,
                    &mut grads,
                );
            }
            params.sgd_step(&grads, cfg.learning_rate);
        }
        curve.push(epoch_loss / data.len() as f64);
    }
    if !params.is_finite() {
        return Err(Error::InvalidParameter("fine-tuning diverged".into()));
    }
    Ok((params, curve))
}

/// Binary classification metrics with class 1 ("AD") as positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `None` when nothing was predicted positive.
    pub precision: Option<f64>,
    /// `None` when the test set has no positives.
    pub recall: Option<f64>,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
    pub pretrain_loss: Vec<f64>,
    pub finetune_loss: Vec<f64>,
}

impl EvalReport {
    pub fn from_predictions(predicted: &[usize], truth: &[usize]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        if predicted.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: predicted.len(),
                right: truth.len(),
            });
        }
        let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => tn += 1,
            }
        }
        Ok(Self::from_counts(tp, fp, fneg, tn))
    }

    pub fn from_counts(tp: usize, fp: usize, fneg: usize, tn: usize) -> Self {
        let total = tp + fp + fneg + tn;
        let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        EvalReport {
            accuracy: (tp + tn) as f64 / total.max(1) as f64,
            precision: frac(tp, tp + fp),
            recall: frac(tp, tp + fneg),
            true_positive: tp,
            false_positive: fp,
            false_negative: fneg,
            true_negative: tn,
            pretrain_loss: Vec::new(),
            finetune_loss: Vec::new(),
        }
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }
}

pub fn predict_all(params: &EncoderParams, data: &PhantomSet) -> Result<Vec<usize>> {
    pooled_features(params, data)?
        .iter()
        .map(|f| predict(params, f))
        .collect()
}

pub fn evaluate(params: &EncoderParams, test: &PhantomSet) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    EvalReport::from_predictions(&predict_all(params, test)?, &test.classes)
}

/// Forward a volume through the encoder, returning the unit embedding.
pub fn embed(params: &EncoderParams, vol: &crate::volume::Volume3D) -> Result<Vec<f64>> {
    Ok(encoder_forward(params, vol)?.0)
}
