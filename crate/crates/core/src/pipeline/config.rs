use serde::{Deserialize, Serialize};

use crate::augment::RegionPolicy;
use crate::error::{Error, Result};

/// Synthetic brain phantom settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub dims: [usize; 3],
    pub num_regions: u32,
    /// Regions whose intensity drops by `signal_delta` in class 1.
    pub signal_regions: Vec<u32>,
    pub signal_delta: f64,
    pub noise_sigma: f64,
    pub base_intensity: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            dims: [32, 32, 32],
            num_regions: 8,
            signal_regions: vec![1, 2],
            signal_delta: 0.4,
            noise_sigma: 0.2,
            base_intensity: 1.0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&n| n < 8) {
            return Err(Error::InvalidConfig(format!("phantom dims must be >= 8, got {:?}", self.dims)));
        }
        if self.num_regions == 0 {
            return Err(Error::InvalidConfig("num_regions must be positive".into()));
        }
        if let Some(r) = self.signal_regions.iter().find(|&&r| r == 0 || r > self.num_regions) {
            return Err(Error::InvalidConfig(format!(
                "signal region {r} outside 1..={}",
                self.num_regions
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !self.signal_delta.is_finite() || !self.base_intensity.is_finite() {
            return Err(Error::InvalidConfig("intensities must be finite".into()));
        }
        Ok(())
    }
}

/// Encoder architecture: mean-pool grid, hidden width, embedding width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderShape {
    pub pool_grid: [usize; 3],
    pub hidden: usize,
    pub embedding: usize,
    /// L2-normalize the embedding fed to the classifier head.
    pub normalize_embedding: bool,
}

impl Default for EncoderShape {
    fn default() -> Self {
        EncoderShape {
            pool_grid: [4, 4, 4],
            hidden: 32,
            embedding: 16,
            normalize_embedding: true,
        }
    }
}

impl EncoderShape {
    pub fn features(&self) -> usize {
        self.pool_grid.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_grid.contains(&0) || self.hidden == 0 || self.embedding < 2 {
            return Err(Error::InvalidConfig(format!("invalid encoder shape {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub policy: RegionPolicy,
    pub cutmix_alpha: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Augmented views per anchor in each contrastive batch (1 or 2).
    pub views: usize,
    /// Also update the encoder during fine-tuning (head only otherwise).
    pub unfreeze_encoder: bool,
    /// Draws per method for the boundary-ratio comparison.
    pub variability_draws: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            batch_size: 16,
            pretrain_epochs: 30,
            finetune_epochs: 20,
            learning_rate: 0.05,
            temperature: 0.1,
            policy: RegionPolicy::FixedCount { k: 2 },
            cutmix_alpha: 1.0,
            train_size: 200,
            test_size: 100,
            views: 1,
            unfreeze_encoder: false,
            variability_draws: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("pretrain_epochs", self.pretrain_epochs),
            ("finetune_epochs", self.finetune_epochs),
            ("train_size", self.train_size),
            ("test_size", self.test_size),
            ("variability_draws", self.variability_draws),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be at least 2".into()));
        }
        if self.train_size < 2 {
            return Err(Error::InvalidConfig("train_size must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !(self.cutmix_alpha > 0.0 && self.cutmix_alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("cutmix_alpha must be > 0, got {}", self.cutmix_alpha)));
        }
        if !(1..=2).contains(&self.views) {
            return Err(Error::InvalidConfig(format!("views must be 1 or 2, got {}", self.views)));
        }
        Ok(())
    }
}

/// Contents of `demo.json`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub phantom: PhantomConfig,
    pub encoder: EncoderShape,
    pub train: TrainConfig,
}

impl DemoConfig {
    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        self.encoder.validate()?;
        self.train.validate()?;
        self.train
            .policy
            .validate(self.phantom.num_regions as usize)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if (0..3).any(|a| !self.phantom.dims[a].is_multiple_of(self.encoder.pool_grid[a])) {
            return Err(Error::InvalidConfig(format!(
                "phantom dims {:?} not divisible by pool grid {:?}",
                self.phantom.dims, self.encoder.pool_grid
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: DemoConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
