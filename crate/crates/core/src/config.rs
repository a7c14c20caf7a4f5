//! Pipeline configuration, read from TOML. Every field has a default, so a
//! config file only lists what it changes; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureConfig;
use crate::descriptors::DescriptorKind;
use crate::error::{Error, Result};
use crate::fmap::{LossWeights, OptimizerConfig};
use crate::linalg::LanczosOptions;
use crate::spectral::{EigenMethod, EigenOptions};

/// Spectral domains for shapes that are close to isometric.
pub const NEAR_ISOMETRIC_ALPHAS: [f64; 3] = [0.0, 0.6, 0.8];
/// Spectral domains for shapes from different classes or with local scaling.
pub const NON_ISOMETRIC_ALPHAS: [f64; 3] = [0.5, 0.6, 0.8];

/// The documented default configuration file.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../default_config.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    pub method: EigenMethod,
    pub dense_limit: usize,
    pub block_size: usize,
    pub tolerance: f64,
    pub max_restarts: usize,
    pub shift_scale: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        let e = EigenOptions::default();
        Self {
            method: e.method,
            dense_limit: e.dense_limit,
            block_size: e.lanczos.block_size,
            tolerance: e.lanczos.tolerance,
            max_restarts: e.lanczos.max_restarts,
            shift_scale: e.lanczos.shift_scale,
        }
    }
}

impl EigenConfig {
    pub fn options(&self, seed: u64) -> EigenOptions {
        EigenOptions {
            method: self.method,
            dense_limit: self.dense_limit,
            lanczos: LanczosOptions {
                block_size: self.block_size,
                tolerance: self.tolerance,
                max_restarts: self.max_restarts,
                shift_scale: self.shift_scale,
                seed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorConfig {
    pub kind: DescriptorKind,
    /// Number of channels (diffusion times or energies).
    pub count: usize,
    /// WKS band width in units of the energy spacing.
    pub variance_scale: f64,
    /// Zero mean, unit variance per channel before use.
    pub normalize: bool,
    /// Every `e4_step`-th channel enters the descriptor commutativity term.
    pub e4_step: usize,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            kind: DescriptorKind::Wks,
            count: 100,
            variance_scale: 7.0,
            normalize: true,
            e4_step: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub alphas: Vec<f64>,
    pub k: usize,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub curvature: CurvatureConfig,
    pub eigen: EigenConfig,
    pub descriptors: DescriptorConfig,
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alphas: NEAR_ISOMETRIC_ALPHAS.to_vec(),
            k: 30,
            seed: 0,
            cache_dir: None,
            curvature: CurvatureConfig::default(),
            eigen: EigenConfig::default(),
            descriptors: DescriptorConfig::default(),
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::Config("alphas must not be empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
        }
        for (i, a) in self.alphas.iter().enumerate() {
            if self.alphas[..i].contains(a) {
                return Err(Error::Config(format!("alpha {a} listed twice")));
            }
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2 (got {})", self.k)));
        }
        if self.descriptors.count == 0 || self.descriptors.e4_step == 0 {
            return Err(Error::Config("descriptor count and e4_step must be positive".into()));
        }
        if !(self.descriptors.variance_scale > 0.0) {
            return Err(Error::Config("descriptor variance_scale must be positive".into()));
        }
        if !(self.eigen.tolerance > 0.0) || !(self.eigen.shift_scale > 0.0) || self.eigen.block_size == 0 {
            return Err(Error::Config("eigen tolerance, shift_scale and block_size must be positive".into()));
        }
        self.curvature.check()?;
        self.weights.check()?;
        self.optimizer.check()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_defaults_match_code() {
        let parsed = PipelineConfig::from_toml(DEFAULT_CONFIG_TOML).unwrap();
        assert_eq!(parsed, PipelineConfig::default());
    }

    #[test]
    fn serialized_config_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.alphas = NON_ISOMETRIC_ALPHAS.to_vec();
        cfg.cache_dir = Some("cache".into());
        cfg.descriptors.kind = DescriptorKind::Hks;
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "alphas = []",
            "alphas = [1.5]",
            "alphas = [0.5, 0.5]",
            "k = 1",
            "[curvature]\nlo_pct = 80.0",
            "[weights]\nbijectivity = 0.0\northogonality = 0.0\nlaplacian = 0.0\ndescriptor = 0.0",
            "unknown_key = 3",
        ] {
            assert!(
                matches!(PipelineConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
        let partial = PipelineConfig::from_toml("k = 12").unwrap();
        assert_eq!(partial.k, 12);
        assert_eq!(partial.alphas, NEAR_ISOMETRIC_ALPHAS.to_vec());
    }
}
