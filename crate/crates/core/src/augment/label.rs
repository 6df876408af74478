use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// A class-probability vector on the simplex (C >= 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidLabel(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidLabel(format!("component {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidLabel(format!("components sum to {sum}")));
        }
        Ok(SoftLabel(probs))
    }

    pub fn one_hot(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidLabel(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        let mut probs = vec![0.0; classes];
        probs[class] = 1.0;
        Self::new(probs)
    }

    /// Accept weights that lie on the simplex within `tol`, then renormalize.
    pub fn from_weights(weights: &[f64], tol: f64) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -tol || *w > 1.0 + tol) {
            return Err(Error::InvalidLabel(format!("weights {weights:?} outside [0, 1]")));
        }
        let clamped: Vec<f64> = weights.iter().map(|w| w.clamp(0.0, 1.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > tol || sum <= 0.0 {
            return Err(Error::InvalidLabel(format!("weights sum to {sum}")));
        }
        Self::new(clamped.iter().map(|w| w / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &SoftLabel) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Index of the largest component (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.0.iter().enumerate() {
            if *p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for SoftLabel {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        SoftLabel::new(probs)
    }
}

impl From<SoftLabel> for Vec<f64> {
    fn from(label: SoftLabel) -> Self {
        label.0
    }
}

/// `(1 - ratio) * anchor + ratio * donor`.
pub fn mix_labels(anchor: &SoftLabel, donor: &SoftLabel, ratio: f64) -> Result<SoftLabel> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::RatioOutOfRange(ratio));
    }
    if anchor.classes() != donor.classes() {
        return Err(Error::LengthMismatch {
            left: anchor.classes(),
            right: donor.classes(),
        });
    }
    let probs = anchor
        .0
        .iter()
        .zip(&donor.0)
        .map(|(a, d)| ((1.0 - ratio) * a + ratio * d).clamp(0.0, 1.0))
        .collect();
    SoftLabel::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(p: &[f64]) -> SoftLabel {
        SoftLabel::new(p.to_vec()).unwrap()
    }

    #[test]
    fn linear_mixing() {
        let y = mix_labels(&label(&[1.0, 0.0]), &label(&[0.0, 1.0]), 0.25).unwrap();
        assert_eq!(y.probs(), &[0.75, 0.25]);
        let y = mix_labels(&label(&[0.6, 0.4]), &label(&[0.2, 0.8]), 0.5).unwrap();
        assert!((y.probs()[0] - 0.4).abs() < 1e-15);
        assert!((y.probs()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn endpoints_are_exact() {
        let a = label(&[0.3, 0.7]);
        let d = label(&[0.9, 0.1]);
        assert_eq!(mix_labels(&a, &d, 0.0).unwrap(), a);
        assert_eq!(mix_labels(&a, &d, 1.0).unwrap(), d);
    }

    #[test]
    fn errors() {
        let a = label(&[0.5, 0.5]);
        assert!(matches!(mix_labels(&a, &a, 1.5), Err(Error::RatioOutOfRange(_))));
        assert!(matches!(mix_labels(&a, &a, f64::NAN), Err(Error::RatioOutOfRange(_))));
        let b = label(&[0.2, 0.3, 0.5]);
        assert!(matches!(mix_labels(&a, &b, 0.5), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn validation() {
        assert!(SoftLabel::new(vec![1.0]).is_err());
        assert!(SoftLabel::new(vec![0.5, 0.6]).is_err());
        assert!(SoftLabel::new(vec![-0.1, 1.1]).is_err());
        assert!(SoftLabel::one_hot(2, 2).is_err());
        assert_eq!(SoftLabel::one_hot(1, 2).unwrap().probs(), &[0.0, 1.0]);
    }

    #[test]
    fn weights_within_tolerance_are_renormalized() {
        let y = SoftLabel::from_weights(&[0.3, 0.7000005], 1e-6).unwrap();
        assert!((y.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(SoftLabel::from_weights(&[0.3, 0.71], 1e-6).is_err());
        assert!(SoftLabel::from_weights(&[-0.5, 1.5], 1e-6).is_err());
    }

    #[test]
    fn serde_validates() {
        let y: SoftLabel = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(y.probs(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<SoftLabel>("[0.25, 0.25]").is_err());
    }
}
