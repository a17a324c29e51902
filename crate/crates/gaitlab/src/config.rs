//! Pipeline configuration: a flat `key = value` text file, canonical
//! serialization, and the compatibility hash embedded in persisted
//! artifacts.

use sha2::{Digest, Sha256};

use crate::classifier::TrainConfig;
use crate::covariate::MomentMode;
use crate::error::{Error, Result};
use crate::features::SdogNorm;
use crate::silhouette::NormalizationSpec;
use crate::zernike::{default_index_set, ZernikeIndex};

/// Every knob of the recognition pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub normalization: NormalizationSpec,
    pub zernike_indices: Vec<ZernikeIndex>,
    pub k_sigma: f64,
    pub sdog_bins: usize,
    pub sdog_levels: Vec<u32>,
    pub sdog_norm: SdogNorm,
    pub svm: TrainConfig,
    pub smoothing_window: usize,
    pub moment_mode: MomentMode,
    pub screening: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            normalization: NormalizationSpec {
                target_height: 128,
                target_width: 88,
            },
            zernike_indices: default_index_set(),
            k_sigma: 3.0,
            sdog_bins: 9,
            sdog_levels: vec![0, 1, 2],
            sdog_norm: SdogNorm::Global,
            svm: TrainConfig::default(),
            smoothing_window: 3,
            moment_mode: MomentMode::Complex,
            screening: true,
            seed: 0,
        }
    }
}

fn indices_to_string(indices: &[ZernikeIndex]) -> String {
    indices
        .iter()
        .map(|i| format!("{}:{}", i.n(), i.m()))
        .collect::<Vec<_>>()
        .join(",")
}

fn levels_to_string(levels: &[u32]) -> String {
    levels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl PipelineConfig {
    /// Canonical text form; keys in fixed order, floats in shortest
    /// round-trip notation.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "normalization_height = {}\n",
            self.normalization.target_height
        ));
        out.push_str(&format!(
            "normalization_width = {}\n",
            self.normalization.target_width
        ));
        out.push_str(&format!(
            "zernike_indices = {}\n",
            indices_to_string(&self.zernike_indices)
        ));
        out.push_str(&format!("moment_mode = {}\n", self.moment_mode.name()));
        out.push_str(&format!("k_sigma = {}\n", self.k_sigma));
        out.push_str(&format!("sdog_bins = {}\n", self.sdog_bins));
        out.push_str(&format!(
            "sdog_levels = {}\n",
            levels_to_string(&self.sdog_levels)
        ));
        out.push_str(&format!("sdog_norm = {}\n", self.sdog_norm.name()));
        out.push_str(&format!("smoothing_window = {}\n", self.smoothing_window));
        out.push_str(&format!("svm_c = {}\n", self.svm.c));
        out.push_str(&format!("svm_max_iterations = {}\n", self.svm.max_iterations));
        out.push_str(&format!("svm_convergence_tol = {}\n", self.svm.convergence_tol));
        out.push_str(&format!("screening = {}\n", self.screening));
        out.push_str(&format!("seed = {}\n", self.seed));
        out
    }

    /// Parse the `key = value` form. Unknown keys are rejected; omitted
    /// keys keep their defaults. Lines starting with `#` are comments.
    fn parse_text(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ctx = format!("config line {}", lineno + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected `key = value` in {ctx}")))?;
            let key = key.trim();
            let value = value.trim();
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad count `{v}` in {ctx}")))
            };
            let parse_f64 = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number `{v}` in {ctx}")))
            };
            match key {
                "normalization_height" => cfg.normalization.target_height = parse_usize(value)?,
                "normalization_width" => cfg.normalization.target_width = parse_usize(value)?,
                "zernike_indices" => {
                    let mut indices = Vec::new();
                    for piece in value.split(',') {
                        let (n, m) = piece.trim().split_once(':').ok_or_else(|| {
                            Error::Format(format!("expected `n:m` index in {ctx}"))
                        })?;
                        let n = n
                            .parse::<u32>()
                            .map_err(|_| Error::Format(format!("bad order in {ctx}")))?;
                        let m = m
                            .parse::<i32>()
                            .map_err(|_| Error::Format(format!("bad repetition in {ctx}")))?;
                        indices.push(ZernikeIndex::new(n, m)?);
                    }
                    if indices.is_empty() {
                        return Err(Error::Format(format!("empty index list in {ctx}")));
                    }
                    cfg.zernike_indices = indices;
                }
                "moment_mode" => cfg.moment_mode = MomentMode::from_name(value)?,
                "k_sigma" => cfg.k_sigma = parse_f64(value)?,
                "sdog_bins" => cfg.sdog_bins = parse_usize(value)?,
                "sdog_levels" => {
                    let levels: std::result::Result<Vec<u32>, _> =
                        value.split(',').map(|v| v.trim().parse::<u32>()).collect();
                    cfg.sdog_levels = levels
                        .map_err(|_| Error::Format(format!("bad level list in {ctx}")))?;
                }
                "sdog_norm" => cfg.sdog_norm = SdogNorm::from_name(value)?,
                "smoothing_window" => cfg.smoothing_window = parse_usize(value)?,
                "svm_c" => cfg.svm.c = parse_f64(value)?,
                "svm_max_iterations" => cfg.svm.max_iterations = parse_usize(value)?,
                "svm_convergence_tol" => cfg.svm.convergence_tol = parse_f64(value)?,
                "screening" => {
                    cfg.screening = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(Error::Format(format!(
                                "expected true/false, got `{other}` in {ctx}"
                            )))
                        }
                    }
                }
                "seed" => {
                    cfg.seed = value
                        .parse::<u64>()
                        .map_err(|_| Error::Format(format!("bad seed in {ctx}")))?
                }
                other => {
                    return Err(Error::Format(format!("unknown config key `{other}` in {ctx}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.normalization.target_height == 0 || self.normalization.target_width == 0 {
            return Err(Error::Parameter("normalization dims must be positive".into()));
        }
        if self.zernike_indices.is_empty() {
            return Err(Error::Parameter("zernike index set must be nonempty".into()));
        }
        if self.sdog_bins == 0 || self.sdog_levels.is_empty() {
            return Err(Error::Parameter("sdog needs bins and levels".into()));
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::Parameter("smoothing window must be odd".into()));
        }
        if self.svm.c <= 0.0 || self.svm.max_iterations == 0 {
            return Err(Error::Parameter("svm config out of range".into()));
        }
        Ok(())
    }

    /// Compatibility fingerprint covering the fields that must agree
    /// between enrollment and identification: normalization, index set,
    /// moment mode, histogram layout and smoothing. Runtime-only knobs
    /// (k_sigma, screening toggle, SVM solver settings, seed) are
    /// excluded so they can vary without invalidating artifacts.
    pub fn config_hash(&self) -> String {
        let fingerprint = format!(
            "h={};w={};idx={};mode={};bins={};levels={};norm={};smooth={}",
            self.normalization.target_height,
            self.normalization.target_width,
            indices_to_string(&self.zernike_indices),
            self.moment_mode.name(),
            self.sdog_bins,
            levels_to_string(&self.sdog_levels),
            self.sdog_norm.name(),
            self.smoothing_window,
        );
        let digest = Sha256::digest(fingerprint.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

impl std::str::FromStr for PipelineConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<PipelineConfig> {
        PipelineConfig::parse_text(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    #[test]
    fn canonical_roundtrip() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_canonical_string();
        let back = PipelineConfig::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_canonical_string(), text);
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg = PipelineConfig::from_str("k_sigma = 2.5\n# comment\n\nseed = 9\n").unwrap();
        assert_eq!(cfg.k_sigma, 2.5);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sdog_bins, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_str("frobnicate = 1\n").is_err());
        assert!(PipelineConfig::from_str("just a line\n").is_err());
    }

    #[test]
    fn hash_tracks_structural_fields_only() {
        let base = PipelineConfig::default();
        let mut runtime = base.clone();
        runtime.k_sigma = 5.0;
        runtime.screening = false;
        runtime.seed = 99;
        runtime.svm.max_iterations = 10;
        assert_eq!(base.config_hash(), runtime.config_hash());

        let mut structural = base.clone();
        structural.normalization.target_height = 136;
        structural.normalization.target_width = 72;
        assert_ne!(base.config_hash(), structural.config_hash());

        let mut indices = base.clone();
        indices.zernike_indices = vec![ZernikeIndex::new(4, 0).unwrap()];
        assert_ne!(base.config_hash(), indices.config_hash());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(PipelineConfig::from_str("smoothing_window = 4\n").is_err());
        assert!(PipelineConfig::from_str("zernike_indices = 5:2\n").is_err());
        assert!(PipelineConfig::from_str("moment_mode = banana\n").is_err());
    }
}
