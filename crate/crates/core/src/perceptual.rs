//! Block-mean robust hash plus the PSNR and Hamming-distance metrics.
//!
//! The hash works on BT.601 luminance. Each image block contributes one bit:
//! set when the block mean is at or above the median of all block means.

use std::fmt;

use crate::error::{Error, Result};
use crate::imagecore::{to_grayscale, RasterImage};

/// Default hash grid: 16x16 blocks, i.e. 256 bits and 32-pixel blocks on a
/// 512x512 image.
pub const DEFAULT_GRID: (usize, usize) = (16, 16);

#[derive(Clone, PartialEq, Eq)]
pub struct RobustHash {
    bits: Vec<bool>,
    rows: usize,
    cols: usize,
    block_width: usize,
    block_height: usize,
}

impl RobustHash {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Block side in pixels as `(width, height)`.
    pub fn block_size(&self) -> (usize, usize) {
        (self.block_width, self.block_height)
    }

    /// Lowercase hex, most significant bit of the first byte is block (0, 0).
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self
            .bits
            .chunks(8)
            .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i))))
            .collect();
        hex::encode(bytes)
    }

    /// Parses the hex form back for a known grid. Block sizes are not part of
    /// the serialization and are left at zero.
    pub fn from_hex(s: &str, rows: usize, cols: usize) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::InvalidParameter(format!("hash hex: {e}")))?;
        let n = rows * cols;
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::InvalidParameter(format!(
                "hash hex holds {} bytes, grid {rows}x{cols} needs {}",
                bytes.len(),
                n.div_ceil(8)
            )));
        }
        let bits = (0..n).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect();
        Ok(Self { bits, rows, cols, block_width: 0, block_height: 0 })
    }
}

impl fmt::Debug for RobustHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RobustHash({}x{}, {})", self.rows, self.cols, self.to_hex())
    }
}

impl fmt::Display for RobustHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Robust hash of `img` on a `rows x cols` grid of equal, non-overlapping blocks.
pub fn block_hash(img: &RasterImage, grid: (usize, usize)) -> Result<RobustHash> {
    let (rows, cols) = grid;
    if rows == 0 || cols == 0 || img.width() % cols != 0 || img.height() % rows != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} hash grid does not divide a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let luma = to_grayscale(img);
    let (bw, bh) = (img.width() / cols, img.height() / rows);
    // Every block has the same area, so sums order exactly like means.
    let mut sums = vec![0u64; rows * cols];
    for y in 0..img.height() {
        let row = &luma.data[y * luma.width..(y + 1) * luma.width];
        let base = (y / bh) * cols;
        for (bx, chunk) in row.chunks_exact(bw).enumerate() {
            sums[base + bx] += chunk.iter().map(|&v| u64::from(v)).sum::<u64>();
        }
    }
    let mut sorted = sums.clone();
    sorted.sort_unstable();
    let n = sorted.len();
    // twice the median, kept integral
    let median2 = if n % 2 == 1 { 2 * sorted[n / 2] } else { sorted[n / 2 - 1] + sorted[n / 2] };
    let bits = sums.iter().map(|&s| 2 * s >= median2).collect();
    Ok(RobustHash { bits, rows, cols, block_width: bw, block_height: bh })
}

/// Fraction of differing bit positions.
pub fn hamming_distance(a: &RobustHash, b: &RobustHash) -> Result<f64> {
    if a.bits.len() != b.bits.len() || a.bits.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "hash lengths {} and {}",
            a.bits.len(),
            b.bits.len()
        )));
    }
    let diff = a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.bits.len() as f64)
}

/// Sum of squared sample differences.
pub fn squared_error(a: &RasterImage, b: &RasterImage) -> Result<u64> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(a.samples()
        .iter()
        .zip(b.samples())
        .map(|(&p, &q)| {
            let d = i64::from(p) - i64::from(q);
            (d * d) as u64
        })
        .sum())
}

/// Peak signal-to-noise ratio in dB over all samples of all channels.
/// Identical images give `f64::INFINITY`.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    let sse = squared_error(a, b)?;
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let n = a.samples().len() as f64;
    Ok(10.0 * (n * 255.0 * 255.0 / sse as f64).log10())
}

/// PSNR and hash Hamming distance between two images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub hamming: f64,
}

pub fn compare(a: &RasterImage, b: &RasterImage, grid: (usize, usize)) -> Result<MetricReport> {
    let psnr_db = psnr(a, b)?;
    let hamming = hamming_distance(&block_hash(a, grid)?, &block_hash(b, grid)?)?;
    Ok(MetricReport { psnr_db, hamming })
}

/// Formats a PSNR value the way all text outputs do: `inf` for identical inputs.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}
