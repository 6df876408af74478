#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use barkit::augment::{augment_batch, Augmenter, RegionPolicy, SoftLabel};
use barkit::pipeline::encoder::{backward_raw, forward_features, pool_features};
use barkit::pipeline::{make_phantom_set, make_synthetic_atlas, EncoderParams, EncoderShape, PhantomConfig};
use barkit::rng::seeded;
use barkit::supcon::{relative_error, soft_supcon_loss, soft_supcon_loss_and_grad, EmbeddingBatch, Matrix};
use barkit::volume::{diagonal_affine, ParcellationAtlas, Volume3D};
use rand::Rng;

pub fn lut(n: u32) -> BTreeMap<u32, String> {
    (1..=n).map(|id| (id, format!("r{id}"))).collect()
}

/// Random atlas with labels in `0..=regions`, every region present.
pub fn random_atlas<R: Rng>(dims: [usize; 3], regions: u32, rng: &mut R) -> ParcellationAtlas {
    let n: usize = dims.iter().product();
    let mut labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..=regions)).collect();
    for id in 1..=regions {
        if !labels.contains(&id) {
            let at = rng.random_range(0..n);
            labels[at] = id;
        }
    }
    ParcellationAtlas::from_labels(dims, [1.0; 3], diagonal_affine([1.0; 3]), labels, lut(regions)).unwrap()
}

pub fn random_volume<R: Rng>(dims: [usize; 3], rng: &mut R) -> Volume3D {
    let n: usize = dims.iter().product();
    Volume3D::from_data(dims, (0..n).map(|_| rng.random_range(-10.0f32..10.0)).collect()).unwrap()
}

pub fn random_dims<R: Rng>(max: usize, rng: &mut R) -> [usize; 3] {
    [rng.random_range(1..=max), rng.random_range(1..=max), rng.random_range(1..=max)]
}

pub fn ids(v: &[u32]) -> BTreeSet<u32> {
    v.iter().copied().collect()
}

/// Hard supervised contrastive loss written directly from its definition:
/// for each anchor with at least one positive, the mean over positives of
/// `-log softmax`, averaged over such anchors.
pub fn hard_supcon(z: &[Vec<f64>], classes: &[usize], tau: f64) -> f64 {
    let n = z.len();
    let unit: Vec<Vec<f64>> = z
        .iter()
        .map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter().map(|v| v / norm).collect()
        })
        .collect();
    let sim = |i: usize, j: usize| unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum::<f64>() / tau;
    let mut total = 0.0;
    let mut anchors = 0;
    for i in 0..n {
        let positives: Vec<usize> = (0..n).filter(|&j| j != i && classes[j] == classes[i]).collect();
        if positives.is_empty() {
            continue;
        }
        let denom: f64 = (0..n).filter(|&k| k != i).map(|k| sim(i, k).exp()).sum();
        let l: f64 = positives.iter().map(|&p| -(sim(i, p).exp() / denom).ln()).sum::<f64>() / positives.len() as f64;
        total += l;
        anchors += 1;
    }
    total / anchors as f64
}

/// Contrastive loss of a fixed batch of pooled features as a function of
/// the encoder parameters.
fn composed_loss(params: &EncoderParams, features: &[Vec<f64>], labels: &[SoftLabel], tau: f64) -> f64 {
    let rows: Vec<Vec<f64>> = features.iter().map(|f| forward_features(params, f).unwrap().raw).collect();
    soft_supcon_loss(&EmbeddingBatch::from_rows(&rows, labels.to_vec(), tau).unwrap()).unwrap().value
}

/// Worst relative error between backpropagated encoder gradients of the
/// contrastive loss on a small BAR batch and central differences over
/// every encoder parameter.
pub fn composed_gradcheck(seed: u64) -> f64 {
    let phantom = PhantomConfig {
        dims: [8, 8, 8],
        ..PhantomConfig::default()
    };
    let shape = EncoderShape {
        pool_grid: [2, 2, 2],
        hidden: 6,
        embedding: 4,
        normalize_embedding: true,
    };
    let atlas = make_synthetic_atlas(&phantom).unwrap();
    let data = make_phantom_set(&phantom, &atlas, seed, 0, 6).unwrap();
    let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)];
    let aug = Augmenter::Bar(RegionPolicy::FixedCount { k: 3 });
    let samples = augment_batch(&pairs, &data.store, &atlas, aug, seed).unwrap();
    let features: Vec<Vec<f64>> = samples.iter().map(|s| pool_features(&s.volume, [2, 2, 2]).unwrap()).collect();
    let labels: Vec<SoftLabel> = samples.iter().map(|s| s.label.clone()).collect();
    let tau = 0.5;

    let mut rng = seeded(seed);
    let mut params = EncoderParams::init(&shape, &mut rng);
    let mut flat = params.flat();
    flat.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
    params.set_flat(&flat);

    let caches: Vec<_> = features.iter().map(|f| forward_features(&params, f).unwrap()).collect();
    let raw: Vec<f64> = caches.iter().flat_map(|c| c.raw.iter().copied()).collect();
    let batch = EmbeddingBatch::new(Matrix::from_vec(6, 4, raw).unwrap(), labels.clone(), tau).unwrap();
    let out = soft_supcon_loss_and_grad(&batch).unwrap();
    let mut grads = EncoderParams::zeros(&shape);
    for (i, c) in caches.iter().enumerate() {
        backward_raw(&params, c, out.raw_grad.row(i), &mut grads);
    }
    let analytic = grads.flat();

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    // head weights and biases come last and play no part in this loss
    let encoder_len = analytic.len() - (params.head_w.len() + params.head_b.len());
    for idx in 0..encoder_len {
        let mut f = flat.clone();
        f[idx] += eps;
        let mut plus = params.clone();
        plus.set_flat(&f);
        f[idx] -= 2.0 * eps;
        let mut minus = params.clone();
        minus.set_flat(&f);
        let numeric = (composed_loss(&plus, &features, &labels, tau) - composed_loss(&minus, &features, &labels, tau))
            / (2.0 * eps);
        worst = worst.max(relative_error(analytic[idx], numeric));
    }
    worst
}
