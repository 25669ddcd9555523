//! TOML sweep configuration and the metadata sidecars written next to outputs.

use std::path::Path;

use anyhow::{Context, Result};
use hashmark::compression::{Algorithm, CompressionSetting, DCT_LEVELS, DEFAULT_SPLIT_THRESHOLD, DWT_LEVELS, QUADTREE_DEPTHS, SPLINE_STEPS};
use hashmark::embedding::{EccLevel, EmbedderConfig, QrPlacement, Scheme};
use hashmark::experiments::{ExperimentConfig, DEFAULT_REPEATS, DEFAULT_SEED};
use hashmark::perceptual::DEFAULT_GRID;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub lsb_depth: u32,
    pub qs_dct: f64,
    pub qs_dwt: f64,
    pub ecc: EccLevel,
}

impl Default for EmbedSection {
    fn default() -> Self {
        let d = EmbedderConfig::new(Scheme::Iwt);
        Self { lsb_depth: d.lsb_depth, qs_dct: d.qs_dct, qs_dwt: d.qs_dwt, ecc: d.qr_ecc }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionSection {
    pub dct: Vec<f64>,
    pub dwt: Vec<usize>,
    pub klt: Vec<f64>,
    pub quadtree: Vec<usize>,
    pub quadtree_threshold: u8,
    pub spline: Vec<usize>,
}

impl Default for CompressionSection {
    fn default() -> Self {
        Self {
            dct: DCT_LEVELS.to_vec(),
            dwt: DWT_LEVELS.to_vec(),
            klt: DCT_LEVELS.to_vec(),
            quadtree: QUADTREE_DEPTHS.iter().rev().copied().collect(),
            quadtree_threshold: DEFAULT_SPLIT_THRESHOLD,
            spline: SPLINE_STEPS.to_vec(),
        }
    }
}

impl CompressionSection {
    pub fn settings(&self) -> Vec<CompressionSetting> {
        let mut out = Vec::new();
        out.extend(self.dct.iter().map(|&level| CompressionSetting::Dct { level }));
        out.extend(self.dwt.iter().map(|&levels| CompressionSetting::Dwt { levels }));
        out.extend(self.klt.iter().map(|&level| CompressionSetting::Klt { level }));
        out.extend(
            self.quadtree
                .iter()
                .map(|&depth| CompressionSetting::Quadtree { depth, threshold: self.quadtree_threshold }),
        );
        out.extend(self.spline.iter().map(|&step| CompressionSetting::Spline { step }));
        out
    }
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub repeats: usize,
    pub elements: usize,
    pub hash_grid: [usize; 2],
    pub schemes: Vec<String>,
    pub calibrate: bool,
    pub target_db: f64,
    pub tolerance_db: f64,
    pub embed: EmbedSection,
    pub compression: CompressionSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            repeats: DEFAULT_REPEATS,
            elements: 10,
            hash_grid: [DEFAULT_GRID.0, DEFAULT_GRID.1],
            schemes: Scheme::ALL.iter().map(|s| s.name().to_string()).collect(),
            calibrate: false,
            target_db: 36.0,
            tolerance_db: 0.5,
            embed: EmbedSection::default(),
            compression: CompressionSection::default(),
        }
    }
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")).into())
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text)
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        self.schemes.iter().map(|s| s.parse().map_err(|e: hashmark::Error| UsageError(e.to_string()).into())).collect()
    }

    pub fn embedder(&self, scheme: Scheme) -> EmbedderConfig {
        EmbedderConfig {
            scheme,
            lsb_depth: self.embed.lsb_depth,
            qs_dct: self.embed.qs_dct,
            qs_dwt: self.embed.qs_dwt,
            qr_ecc: self.embed.ecc,
            hash_grid: (self.hash_grid[0], self.hash_grid[1]),
        }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            schemes: self.schemes()?,
            n_elements: self.elements,
            n_repeats: self.repeats,
            rng_seed: self.seed,
            hash_grid: (self.hash_grid[0], self.hash_grid[1]),
            embedder: self.embedder(Scheme::Iwt),
            calibrate: self.calibrate,
            target_db: self.target_db,
            tolerance_db: self.tolerance_db,
            compression: self.compression.settings(),
        };
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementInfo {
    /// `ll` for the integer wavelet band, `pixels` for the image itself.
    pub carrier: String,
    pub module_px_num: usize,
    pub module_px_den: usize,
    pub module_px: f64,
    pub qr_size: usize,
    pub block_hash: usize,
}

impl PlacementInfo {
    pub fn new(carrier: &str, p: &QrPlacement) -> Self {
        Self {
            carrier: carrier.into(),
            module_px_num: p.scale.num,
            module_px_den: p.scale.den,
            module_px: p.b_qr(),
            qr_size: p.qr_size,
            block_hash: p.block_hash,
        }
    }
}

/// Metadata written beside an embedded image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSidecar {
    pub source: String,
    pub output: String,
    pub scheme: String,
    pub lsb_depth: u32,
    pub qs_dct: f64,
    pub qs_dwt: f64,
    pub ecc: EccLevel,
    pub hash_grid: [usize; 2],
    pub psnr_db: String,
    pub message_elements: usize,
    pub message_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<PlacementInfo>,
}

impl EmbedSidecar {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| UsageError(format!("invalid sidecar: {e}")).into())
    }

    pub fn embedder(&self) -> Result<EmbedderConfig> {
        let scheme: Scheme = self.scheme.parse().map_err(|e: hashmark::Error| UsageError(e.to_string()))?;
        let cfg = EmbedderConfig {
            scheme,
            lsb_depth: self.lsb_depth,
            qs_dct: self.qs_dct,
            qs_dwt: self.qs_dwt,
            qr_ecc: self.ecc,
            hash_grid: (self.hash_grid[0], self.hash_grid[1]),
        };
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }
}

/// Metadata written beside a compressed image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressSidecar {
    pub source: String,
    pub output: String,
    pub algorithm: Algorithm,
    pub params: String,
    pub level: f64,
    pub psnr_db: String,
    pub hamming: f64,
    pub hash_grid: [usize; 2],
}
