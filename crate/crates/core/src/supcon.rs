//! Soft-label supervised contrastive loss with an analytic gradient.
//!
//! For unit embeddings `z_i` and temperature `tau`, with
//! `p_ij = exp(z_i.z_j / tau) / sum_{k != i} exp(z_i.z_k / tau)` and label
//! affinity `w_ij = y_i . y_j` (zero diagonal), each anchor contributes
//!
//! ```text
//! L_i = -(sum_{j != i} w_ij log p_ij) / (sum_{j != i} w_ij)
//! ```
//!
//! and the loss is the mean of `L_i` over anchors whose affinity mass
//! exceeds 1e-12. With one-hot labels this is the usual SupCon loss with
//! the positive-count normalization outside the log.
//!
//! Writing `q_ij = w_ij / W_i`, the derivative of `L_i` with respect to the
//! logit `s_ij = z_i.z_j / tau` is `p_ij - q_ij`, so with
//! `G_ij = (p_ij - q_ij) / V` over the `V` valid anchors the gradient with
//! respect to the normalized embeddings is `(G + G^T) Z / tau`. Chaining
//! through `z = u / |u|` multiplies by `(I - z z^T) / |u|`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::augment::SoftLabel;
use crate::error::{Error, Result};

const AFFINITY_EPS: f64 = 1e-12;
const NORM_EPS: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw encoder outputs, their row-normalized form, soft labels, and temperature.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    raw: Matrix,
    normalized: Matrix,
    norms: Vec<f64>,
    labels: Vec<SoftLabel>,
    temperature: f64,
}

impl EmbeddingBatch {
    pub fn new(raw: Matrix, labels: Vec<SoftLabel>, temperature: f64) -> Result<Self> {
        let (n, d) = (raw.rows(), raw.cols());
        if n < 2 || d < 2 {
            return Err(Error::InvalidParameter(format!("need n >= 2 and d >= 2, got n={n} d={d}")));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {temperature}")));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: n,
            });
        }
        let classes = labels[0].classes();
        if let Some(bad) = labels.iter().find(|l| l.classes() != classes) {
            return Err(Error::LengthMismatch {
                left: bad.classes(),
                right: classes,
            });
        }
        if raw.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite embedding".into()));
        }
        let mut normalized = raw.clone();
        let mut norms = Vec::with_capacity(n);
        for i in 0..n {
            let norm = dot(raw.row(i), raw.row(i)).sqrt();
            if norm < NORM_EPS {
                return Err(Error::DegenerateNorm(i));
            }
            normalized.row_mut(i).iter_mut().for_each(|v| *v /= norm);
            norms.push(norm);
        }
        Ok(EmbeddingBatch {
            raw,
            normalized,
            norms,
            labels,
            temperature,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<SoftLabel>, temperature: f64) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::LengthMismatch { left: bad.len(), right: d });
        }
        let raw = Matrix::from_vec(rows.len(), d, rows.concat())?;
        Self::new(raw, labels, temperature)
    }

    /// Same labels and temperature, different raw embeddings.
    pub fn with_raw(&self, raw: Matrix) -> Result<Self> {
        Self::new(raw, self.labels.clone(), self.temperature)
    }

    pub fn len(&self) -> usize {
        self.raw.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.raw.cols()
    }

    pub fn raw(&self) -> &Matrix {
        &self.raw
    }

    pub fn normalized(&self) -> &Matrix {
        &self.normalized
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn labels(&self) -> &[SoftLabel] {
        &self.labels
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

/// `w_ij = y_i . y_j` off the diagonal, zero on it.
pub fn label_affinity(labels: &[SoftLabel]) -> Result<Matrix> {
    let n = labels.len();
    if let Some(first) = labels.first() {
        if let Some(bad) = labels.iter().find(|l| l.classes() != first.classes()) {
            return Err(Error::LengthMismatch {
                left: bad.classes(),
                right: first.classes(),
            });
        }
    }
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = labels[i].dot(&labels[j]);
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    /// `None` for anchors excluded for lack of affinity mass.
    pub per_anchor: Vec<Option<f64>>,
    pub valid_anchor_count: usize,
    pub affinity_row_sums: Vec<f64>,
}

struct Forward {
    report: LossReport,
    /// Softmax probabilities `p_ij`, zero on the diagonal.
    probs: Matrix,
    affinity: Matrix,
}

fn forward(batch: &EmbeddingBatch) -> Result<Forward> {
    let n = batch.len();
    let z = batch.normalized();
    let tau = batch.temperature();
    let affinity = label_affinity(batch.labels())?;
    let mut probs = Matrix::zeros(n, n);
    let mut per_anchor = vec![None; n];
    let mut row_sums = vec![0.0; n];
    let mut logits = vec![0.0; n];

    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for k in (0..n).filter(|&k| k != i) {
            logits[k] = dot(z.row(i), z.row(k)) / tau;
            max = max.max(logits[k]);
        }
        let sum_exp: f64 = (0..n).filter(|&k| k != i).map(|k| (logits[k] - max).exp()).sum();
        let lse = max + sum_exp.ln();

        let mut weight = 0.0;
        let mut weighted_log_p = 0.0;
        for k in (0..n).filter(|&k| k != i) {
            let log_p = logits[k] - lse;
            probs.set(i, k, log_p.exp());
            let w = affinity.get(i, k);
            weight += w;
            weighted_log_p += w * log_p;
        }
        row_sums[i] = weight;
        if weight > AFFINITY_EPS {
            // 0 - x keeps an exact zero positive
            per_anchor[i] = Some(0.0 - weighted_log_p / weight);
        }
    }

    let valid: Vec<f64> = per_anchor.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::NoValidAnchors);
    }
    let value = valid.iter().sum::<f64>() / valid.len() as f64;
    Ok(Forward {
        report: LossReport {
            value,
            per_anchor,
            valid_anchor_count: valid.len(),
            affinity_row_sums: row_sums,
        },
        probs,
        affinity,
    })
}

pub fn soft_supcon_loss(batch: &EmbeddingBatch) -> Result<LossReport> {
    Ok(forward(batch)?.report)
}

/// Loss report, gradient with respect to the raw embeddings, and the
/// tangent (sphere-projected) gradient with respect to the normalized ones.
#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub report: LossReport,
    pub raw_grad: Matrix,
    pub tangent_grad: Matrix,
}

pub fn soft_supcon_loss_and_grad(batch: &EmbeddingBatch) -> Result<LossAndGrad> {
    let fwd = forward(batch)?;
    let (n, d) = (batch.len(), batch.dim());
    let z = batch.normalized();
    let scale = 1.0 / (fwd.report.valid_anchor_count as f64 * batch.temperature());

    // coefficient matrix G (already scaled by 1 / (V tau))
    let mut coef = Matrix::zeros(n, n);
    for i in 0..n {
        if fwd.report.per_anchor[i].is_none() {
            continue;
        }
        let weight = fwd.report.affinity_row_sums[i];
        for k in (0..n).filter(|&k| k != i) {
            coef.set(i, k, scale * (fwd.probs.get(i, k) - fwd.affinity.get(i, k) / weight));
        }
    }

    let mut tangent = Matrix::zeros(n, d);
    let mut raw_grad = Matrix::zeros(n, d);
    for a in 0..n {
        let g = tangent.row_mut(a);
        for k in 0..n {
            let c = coef.get(a, k) + coef.get(k, a);
            if c != 0.0 {
                for (gv, zv) in g.iter_mut().zip(z.row(k)) {
                    *gv += c * zv;
                }
            }
        }
        let radial = dot(g, z.row(a));
        for (gv, zv) in g.iter_mut().zip(z.row(a)) {
            *gv -= radial * zv;
        }
        let inv_norm = 1.0 / batch.norms()[a];
        for (rv, gv) in raw_grad.row_mut(a).iter_mut().zip(tangent.row(a)) {
            *rv = gv * inv_norm;
        }
    }

    Ok(LossAndGrad {
        report: fwd.report,
        raw_grad,
        tangent_grad: tangent,
    })
}

/// Gradient of the loss value with respect to the raw embeddings.
pub fn soft_supcon_grad(batch: &EmbeddingBatch) -> Result<Matrix> {
    Ok(soft_supcon_loss_and_grad(batch)?.raw_grad)
}

/// Largest relative disagreement between the analytic gradient and central
/// differences over every raw coordinate. Relative error uses the
/// denominator `max(|a|, |b|, 1e-8)`.
pub fn finite_diff_check(batch: &EmbeddingBatch, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1e-2], got {epsilon}")));
    }
    let analytic = soft_supcon_grad(batch)?;
    let mut worst: f64 = 0.0;
    for idx in 0..batch.raw().data().len() {
        let mut plus = batch.raw().clone();
        plus.data[idx] += epsilon;
        let mut minus = batch.raw().clone();
        minus.data[idx] -= epsilon;
        let f_plus = soft_supcon_loss(&batch.with_raw(plus)?)?.value;
        let f_minus = soft_supcon_loss(&batch.with_raw(minus)?)?.value;
        let numeric = (f_plus - f_minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic.data()[idx], numeric));
    }
    Ok(worst)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Gaussian raw embeddings with two-class soft labels whose components all
/// lie in [0.05, 0.95], so every anchor has positive affinity mass.
pub fn random_batch<R: Rng + ?Sized>(n: usize, d: usize, temperature: f64, rng: &mut R) -> Result<EmbeddingBatch> {
    let raw: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let labels = (0..n)
        .map(|_| {
            let p = rng.random_range(0.05..=0.95);
            SoftLabel::new(vec![p, 1.0 - p])
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingBatch::new(Matrix::from_vec(n, d, raw)?, labels, temperature)
}

/// Stable single-line record of one loss/gradient check.
pub fn check_line(n: usize, d: usize, temperature: f64, loss: f64, gradcheck: f64) -> String {
    format!("n={n} d={d} tau={temperature} loss={loss:.12e} gradcheck={gradcheck:.3e}")
}
