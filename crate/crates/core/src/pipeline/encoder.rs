//! Mean-pool -> affine -> tanh -> affine encoder with a linear classifier
//! head, and explicit backpropagation through all of it.

use rand::Rng;

use super::EncoderShape;
use crate::error::{Error, Result};
use crate::volume::{linear_index, Volume3D};

/// Weights are row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub shape: EncoderShape,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

pub const HEAD_CLASSES: usize = 2;

fn xavier<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect()
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(shape: &EncoderShape, rng: &mut R) -> Self {
        let f = shape.features();
        EncoderParams {
            w1: xavier(f, shape.hidden, rng),
            b1: vec![0.0; shape.hidden],
            w2: xavier(shape.hidden, shape.embedding, rng),
            b2: vec![0.0; shape.embedding],
            head_w: xavier(shape.embedding, HEAD_CLASSES, rng),
            head_b: vec![0.0; HEAD_CLASSES],
            shape: shape.clone(),
        }
    }

    /// Set the first-layer bias to `-W1 . mean` so pre-activations start
    /// centered on data whose pooled features average to `mean`.
    pub fn center_on(&mut self, mean: &[f64]) {
        let f = self.shape.features();
        for (j, b) in self.b1.iter_mut().enumerate() {
            *b = -self.w1[j * f..(j + 1) * f].iter().zip(mean).map(|(w, m)| w * m).sum::<f64>();
        }
    }

    pub fn zeros(shape: &EncoderShape) -> Self {
        let f = shape.features();
        EncoderParams {
            w1: vec![0.0; f * shape.hidden],
            b1: vec![0.0; shape.hidden],
            w2: vec![0.0; shape.hidden * shape.embedding],
            b2: vec![0.0; shape.embedding],
            head_w: vec![0.0; shape.embedding * HEAD_CLASSES],
            head_b: vec![0.0; HEAD_CLASSES],
            shape: shape.clone(),
        }
    }

    fn tensors(&self) -> [&Vec<f64>; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.head_w, &self.head_b]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.head_w,
            &mut self.head_b,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self -= lr * grads`.
    pub fn sgd_step(&mut self, grads: &EncoderParams, lr: f64) {
        for (p, g) in self.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= lr * gv;
            }
        }
    }

    /// All parameters flattened in a fixed order.
    pub fn flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *it.next().expect("flat parameter length");
            }
        }
    }
}

/// Mean over each cell of a `grid` partition of the volume.
pub fn pool_features(vol: &Volume3D, grid: [usize; 3]) -> Result<Vec<f64>> {
    let dims = vol.dims();
    if (0..3).any(|a| grid[a] == 0 || !dims[a].is_multiple_of(grid[a])) {
        return Err(Error::DimsNotPoolable { dims, grid });
    }
    let cell = [dims[0] / grid[0], dims[1] / grid[1], dims[2] / grid[2]];
    let mut sums = vec![0.0f64; grid.iter().product()];
    let data = vol.data();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            let row = linear_index(dims, 0, y, z);
            let base = grid[0] * (y / cell[1] + grid[1] * (z / cell[2]));
            for x in 0..dims[0] {
                sums[base + x / cell[0]] += data[row + x] as f64;
            }
        }
    }
    let inv = 1.0 / cell.iter().product::<usize>() as f64;
    sums.iter_mut().for_each(|s| *s *= inv);
    Ok(sums)
}

/// Intermediates kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub features: Vec<f64>,
    /// tanh activations.
    pub hidden: Vec<f64>,
    /// Pre-normalization embedding.
    pub raw: Vec<f64>,
    pub norm: f64,
    /// Unit-norm embedding (or `raw` when normalization is off).
    pub embedding: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(o, bias)| bias + w[o * x.len()..(o + 1) * x.len()].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

pub fn forward_features(params: &EncoderParams, features: &[f64]) -> Result<ForwardCache> {
    let hidden: Vec<f64> = affine(&params.w1, &params.b1, features).into_iter().map(f64::tanh).collect();
    let raw = affine(&params.w2, &params.b2, &hidden);
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let embedding = if params.shape.normalize_embedding {
        if norm < 1e-12 {
            return Err(Error::DegenerateNorm(0));
        }
        raw.iter().map(|v| v / norm).collect()
    } else {
        raw.clone()
    };
    Ok(ForwardCache {
        features: features.to_vec(),
        hidden,
        raw,
        norm,
        embedding,
    })
}

/// Pool, encode, and (optionally) normalize a single volume.
pub fn encoder_forward(params: &EncoderParams, vol: &Volume3D) -> Result<(Vec<f64>, ForwardCache)> {
    let features = pool_features(vol, params.shape.pool_grid)?;
    let cache = forward_features(params, &features)?;
    Ok((cache.embedding.clone(), cache))
}

/// Accumulate encoder gradients given `d_raw`, the loss gradient with
/// respect to the pre-normalization embedding.
pub fn backward_raw(params: &EncoderParams, cache: &ForwardCache, d_raw: &[f64], grads: &mut EncoderParams) {
    let h = params.shape.hidden;
    let f = cache.features.len();
    let mut d_hidden = vec![0.0; h];
    for (o, &g) in d_raw.iter().enumerate() {
        grads.b2[o] += g;
        let row = &mut grads.w2[o * h..(o + 1) * h];
        for (j, hv) in cache.hidden.iter().enumerate() {
            row[j] += g * hv;
            d_hidden[j] += g * params.w2[o * h + j];
        }
    }
    for (j, dh) in d_hidden.iter().enumerate() {
        let da = dh * (1.0 - cache.hidden[j] * cache.hidden[j]);
        grads.b1[j] += da;
        let row = &mut grads.w1[j * f..(j + 1) * f];
        for (k, fv) in cache.features.iter().enumerate() {
            row[k] += da * fv;
        }
    }
}

/// Gradient with respect to `raw` given the gradient with respect to the
/// (possibly normalized) embedding.
pub fn embedding_to_raw_grad(params: &EncoderParams, cache: &ForwardCache, d_embedding: &[f64]) -> Vec<f64> {
    if !params.shape.normalize_embedding {
        return d_embedding.to_vec();
    }
    let radial: f64 = d_embedding.iter().zip(&cache.embedding).map(|(a, b)| a * b).sum();
    d_embedding
        .iter()
        .zip(&cache.embedding)
        .map(|(g, e)| (g - radial * e) / cache.norm)
        .collect()
}

/// Classifier logits on the embedding.
pub fn head_logits(params: &EncoderParams, embedding: &[f64]) -> Vec<f64> {
    affine(&params.head_w, &params.head_b, embedding)
}

/// Softmax cross-entropy of one example; accumulates head gradients (and
/// encoder gradients when `through_encoder`) scaled by `weight`.
pub fn cross_entropy_backward(
    params: &EncoderParams,
    cache: &ForwardCache,
    class: usize,
    weight: f64,
    through_encoder: bool,
    grads: &mut EncoderParams,
) -> f64 {
    let logits = head_logits(params, &cache.embedding);
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[class];
    let e = cache.embedding.len();
    let mut d_embedding = vec![0.0; e];
    for (c, l) in logits.iter().enumerate() {
        let d = weight * ((l - lse).exp() - if c == class { 1.0 } else { 0.0 });
        grads.head_b[c] += d;
        for k in 0..e {
            grads.head_w[c * e + k] += d * cache.embedding[k];
            d_embedding[k] += d * params.head_w[c * e + k];
        }
    }
    if through_encoder {
        let d_raw = embedding_to_raw_grad(params, cache, &d_embedding);
        backward_raw(params, cache, &d_raw, grads);
    }
    loss
}

pub fn predict(params: &EncoderParams, features: &[f64]) -> Result<usize> {
    let cache = forward_features(params, features)?;
    let logits = head_logits(params, &cache.embedding);
    Ok(usize::from(logits[1] > logits[0]))
}
