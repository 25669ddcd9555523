//! Lossy compression simulators. Each returns the reconstructed image and
//! the retained fraction of coefficients or samples.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{clip_round, merge_channels, split_channels, Channel, Plane, RasterImage};
use crate::transforms::{
    check_block_aligned, dct2_block, haar_dwt, idct2_block, ihaar_dwt, read_block, write_block, zigzag,
    CoefficientBlock, WaveletBands, BLOCK,
};

pub const DCT_LEVELS: [f64; 7] = [0.70, 0.50, 0.30, 0.20, 0.10, 0.05, 0.02];
pub const DWT_LEVELS: [usize; 3] = [1, 2, 3];
pub const QUADTREE_DEPTHS: [usize; 6] = [3, 4, 5, 6, 7, 8];
pub const SPLINE_STEPS: [usize; 6] = [2, 3, 4, 5, 6, 7];
pub const DEFAULT_SPLIT_THRESHOLD: u8 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dct,
    Dwt,
    Klt,
    Quadtree,
    Spline,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Dct, Algorithm::Dwt, Algorithm::Klt, Algorithm::Quadtree, Algorithm::Spline];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dct => "dct",
            Algorithm::Dwt => "dwt",
            Algorithm::Klt => "klt",
            Algorithm::Quadtree => "quadtree",
            Algorithm::Spline => "spline",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?} (expected dct, dwt, klt, quadtree or spline)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionResult {
    pub image: RasterImage,
    /// Retained fraction of the original storage, in `(0, 1]`.
    pub level: f64,
    pub algorithm: Algorithm,
    /// Settings as `key=value` pairs separated by `;`.
    pub params: String,
}

fn map_channels(img: &RasterImage, f: impl Fn(&Channel) -> Result<Channel>) -> Result<RasterImage> {
    let out = split_channels(img).iter().map(f).collect::<Result<Vec<_>>>()?;
    merge_channels(&out)
}

fn zigzag_keep(level: f64) -> usize {
    (level * 64.0).round() as usize
}

/// Keeps the first `round(64 * level)` zig-zag coefficients of every 8x8 block.
pub fn compress_dct(img: &RasterImage, level: f64) -> Result<CompressionResult> {
    if !(0.02 - 1e-9..=0.70 + 1e-9).contains(&level) {
        return Err(Error::InvalidParameter(format!("DCT level {level} outside [0.02, 0.70]")));
    }
    compress_dct_coefficients(img, zigzag_keep(level))
}

/// Zig-zag truncation with an explicit coefficient count `k` in `[1, 64]`.
pub fn compress_dct_coefficients(img: &RasterImage, k: usize) -> Result<CompressionResult> {
    if !(1..=64).contains(&k) {
        return Err(Error::InvalidParameter(format!("kept coefficient count {k} outside [1, 64]")));
    }
    check_block_aligned(img.width(), img.height())?;
    let order = &zigzag()[..k];
    let image = map_channels(img, |ch| {
        let mut plane = ch.to_plane();
        for by in 0..ch.height / BLOCK {
            for bx in 0..ch.width / BLOCK {
                let coefs = dct2_block(&read_block(&plane, bx, by))?;
                let mut kept = CoefficientBlock([0.0; 64]);
                for &(u, v) in order {
                    kept.set(u, v, coefs.get(u, v));
                }
                write_block(&mut plane, bx, by, &idct2_block(&kept));
            }
        }
        plane.to_channel()
    })?;
    Ok(CompressionResult { image, level: k as f64 / 64.0, algorithm: Algorithm::Dct, params: format!("k={k}") })
}

/// Keeps only the LL band after `levels` Haar decompositions.
pub fn compress_dwt(img: &RasterImage, levels: usize) -> Result<CompressionResult> {
    if !(1..=3).contains(&levels) {
        return Err(Error::InvalidParameter(format!("DWT levels {levels} outside [1, 3]")));
    }
    let step = 1 << levels;
    if img.width() % step != 0 || img.height() % step != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not divisible by {step}",
            img.width(),
            img.height()
        )));
    }
    let image = map_channels(img, |ch| {
        let mut ll = ch.to_plane();
        let mut shapes = Vec::with_capacity(levels);
        for _ in 0..levels {
            let bands = haar_dwt(&ll)?;
            shapes.push((bands.width, bands.height));
            ll = Plane { width: bands.width, height: bands.height, data: bands.ll };
        }
        for &(w, h) in shapes.iter().rev() {
            let zero = vec![0.0; w * h];
            ll = ihaar_dwt(&WaveletBands { width: w, height: h, ll: ll.data, lh: zero.clone(), hl: zero.clone(), hh: zero })?;
        }
        ll.to_channel()
    })?;
    Ok(CompressionResult {
        image,
        level: 0.25f64.powi(levels as i32),
        algorithm: Algorithm::Dwt,
        params: format!("levels={levels}"),
    })
}

/// Eigenvectors of a symmetric matrix as columns, sorted by descending
/// eigenvalue, each with its largest-magnitude component positive.
fn sorted_eigenvectors(cov: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut out = DMatrix::zeros(n, n);
    for (j, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let lead = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            col.neg_mut();
        }
        out.set_column(j, &col);
    }
    out
}

/// KLT reconstruction of one plane from its top `k` block eigenvectors,
/// before rounding.
pub fn klt_reconstruct_plane(plane: &Plane, k: usize) -> Result<Plane> {
    if !(1..=64).contains(&k) {
        return Err(Error::InvalidParameter(format!("kept eigenvector count {k} outside [1, 64]")));
    }
    check_block_aligned(plane.width, plane.height)?;
    let (bw, bh) = (plane.width / BLOCK, plane.height / BLOCK);
    let n = bw * bh;
    // one block per column
    let mut x = DMatrix::<f64>::zeros(64, n);
    for by in 0..bh {
        for bx in 0..bw {
            let block = read_block(plane, bx, by);
            x.column_mut(by * bw + bx).copy_from_slice(&block);
        }
    }
    let mean = x.column_mean();
    for mut col in x.column_iter_mut() {
        col -= &mean;
    }
    let cov = (&x * x.transpose()) / n as f64;
    let basis = sorted_eigenvectors(cov).columns(0, k).into_owned();
    let coefs = basis.transpose() * &x;
    let mut recon = basis * coefs;
    for mut col in recon.column_iter_mut() {
        col += &mean;
    }
    let mut out = Plane::zeros(plane.width, plane.height);
    for by in 0..bh {
        for bx in 0..bw {
            let mut block = [0.0; 64];
            block.copy_from_slice(recon.column(by * bw + bx).as_slice());
            write_block(&mut out, bx, by, &block);
        }
    }
    Ok(out)
}

/// Per-channel KLT over 8x8 blocks keeping `k` of 64 eigenvectors.
pub fn compress_klt(img: &RasterImage, k: usize) -> Result<CompressionResult> {
    let image = map_channels(img, |ch| klt_reconstruct_plane(&ch.to_plane(), k)?.to_channel())?;
    Ok(CompressionResult { image, level: k as f64 / 64.0, algorithm: Algorithm::Klt, params: format!("k={k}") })
}

/// KLT with the eigenvector count matched to a DCT level.
pub fn compress_klt_level(img: &RasterImage, level: f64) -> Result<CompressionResult> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::InvalidParameter(format!("KLT level {level} outside [0, 1]")));
    }
    compress_klt(img, zigzag_keep(level).max(1))
}

struct QuadStats {
    leaves: usize,
    nodes: usize,
}

fn quad_split(
    ch: &Channel,
    out: &mut [u8],
    (x0, y0, size): (usize, usize, usize),
    depth: usize,
    max_depth: usize,
    threshold: u8,
    stats: &mut QuadStats,
) -> Result<()> {
    stats.nodes += 1;
    let w = ch.width;
    let (mut lo, mut hi, mut sum) = (u8::MAX, u8::MIN, 0u64);
    for y in y0..y0 + size {
        for &v in &ch.data[y * w + x0..y * w + x0 + size] {
            lo = lo.min(v);
            hi = hi.max(v);
            sum += u64::from(v);
        }
    }
    if depth < max_depth && hi - lo > threshold {
        let half = size / 2;
        for (dx, dy) in [(0, 0), (half, 0), (0, half), (half, half)] {
            quad_split(ch, out, (x0 + dx, y0 + dy, half), depth + 1, max_depth, threshold, stats)?;
        }
        return Ok(());
    }
    stats.leaves += 1;
    let mean = clip_round(sum as f64 / (size * size) as f64)?;
    for y in y0..y0 + size {
        out[y * w + x0..y * w + x0 + size].fill(mean);
    }
    Ok(())
}

/// Region quadtree per channel. A node splits while it is shallower than
/// `max_depth` and its intensity range exceeds `threshold`; leaves take the
/// mean of their pixels. Storage is one byte per leaf plus one structure bit
/// per node.
pub fn compress_quadtree(img: &RasterImage, max_depth: usize, threshold: u8) -> Result<CompressionResult> {
    let (w, h) = (img.width(), img.height());
    if w != h || !w.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("quadtree needs a square power-of-two image, got {w}x{h}")));
    }
    if max_depth == 0 || max_depth > 8 || (w >> max_depth) == 0 {
        return Err(Error::InvalidParameter(format!("quadtree depth {max_depth} invalid for a {w}-pixel side")));
    }
    let mut stats = QuadStats { leaves: 0, nodes: 0 };
    let mut out = Vec::with_capacity(img.channels());
    for ch in split_channels(img) {
        let mut data = vec![0u8; w * h];
        quad_split(&ch, &mut data, (0, 0, w), 0, max_depth, threshold, &mut stats)?;
        out.push(Channel::new(w, h, data)?);
    }
    let image = merge_channels(&out)?;
    let bits = 8 * stats.leaves + stats.nodes;
    let original = 8 * w * h * img.channels();
    Ok(CompressionResult {
        image,
        level: (bits as f64 / original as f64).min(1.0),
        algorithm: Algorithm::Quadtree,
        params: format!("depth={max_depth};threshold={threshold};leaves={};nodes={}", stats.leaves, stats.nodes),
    })
}

/// Second derivatives of the natural cubic spline through equally spaced
/// knots (unit spacing).
fn natural_spline_moments(y: &[f64]) -> Vec<f64> {
    let m = y.len();
    let mut moments = vec![0.0; m];
    if m < 3 {
        return moments;
    }
    // Thomas algorithm on M[i-1] + 4 M[i] + M[i+1] = 6 (y[i-1] - 2 y[i] + y[i+1])
    let n = m - 2;
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let rhs = 6.0 * (y[i] - 2.0 * y[i + 1] + y[i + 2]);
        if i == 0 {
            c[0] = 1.0 / 4.0;
            d[0] = rhs / 4.0;
        } else {
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
    }
    for i in (0..n).rev() {
        moments[i + 1] = if i + 1 < n { d[i] - c[i] * moments[i + 2] } else { d[i] };
    }
    moments
}

/// Evaluates the natural cubic spline through `y` (knots at `0, step, 2 step, ...`)
/// at `0..len`, continuing linearly past the last knot.
fn spline_resample(y: &[f64], step: usize, len: usize) -> Vec<f64> {
    let m = y.len();
    if m == 1 {
        return vec![y[0]; len];
    }
    let mm = natural_spline_moments(y);
    let h = step as f64;
    let last = (m - 1) * step;
    let end_slope = (y[m - 1] - y[m - 2]) + (2.0 * mm[m - 1] + mm[m - 2]) / 6.0;
    (0..len)
        .map(|p| {
            if p >= last {
                return y[m - 1] + end_slope * (p - last) as f64 / h;
            }
            let i = p / step;
            let t = (p - i * step) as f64 / h;
            let s = 1.0 - t;
            s * y[i] + t * y[i + 1] + ((s * s * s - s) * mm[i] + (t * t * t - t) * mm[i + 1]) / 6.0
        })
        .collect()
}

/// Keeps every `step`-th row and column (starting at 0) and rebuilds the rest
/// with separable natural cubic splines.
pub fn spline_reconstruct_plane(plane: &Plane, step: usize) -> Plane {
    let (w, h) = (plane.width, plane.height);
    let rows: Vec<usize> = (0..h).step_by(step).collect();
    let cols: Vec<usize> = (0..w).step_by(step).collect();
    let mut wide = vec![0.0; rows.len() * w];
    for (r, &y) in rows.iter().enumerate() {
        let knots: Vec<f64> = cols.iter().map(|&x| plane.get(x, y)).collect();
        wide[r * w..(r + 1) * w].copy_from_slice(&spline_resample(&knots, step, w));
    }
    let mut out = Plane::zeros(w, h);
    for x in 0..w {
        let knots: Vec<f64> = (0..rows.len()).map(|r| wide[r * w + x]).collect();
        for (y, v) in spline_resample(&knots, step, h).into_iter().enumerate() {
            out.set(x, y, v);
        }
    }
    out
}

pub fn compress_spline(img: &RasterImage, step: usize) -> Result<CompressionResult> {
    if !(2..=7).contains(&step) {
        return Err(Error::InvalidParameter(format!("spline step {step} outside [2, 7]")));
    }
    let image = map_channels(img, |ch| spline_reconstruct_plane(&ch.to_plane(), step).to_channel())?;
    Ok(CompressionResult {
        image,
        level: 1.0 / (step * step) as f64,
        algorithm: Algorithm::Spline,
        params: format!("step={step}"),
    })
}

/// One point of a compressor's sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CompressionSetting {
    Dct { level: f64 },
    Dwt { levels: usize },
    Klt { level: f64 },
    Quadtree { depth: usize, threshold: u8 },
    Spline { step: usize },
}

impl CompressionSetting {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            CompressionSetting::Dct { .. } => Algorithm::Dct,
            CompressionSetting::Dwt { .. } => Algorithm::Dwt,
            CompressionSetting::Klt { .. } => Algorithm::Klt,
            CompressionSetting::Quadtree { .. } => Algorithm::Quadtree,
            CompressionSetting::Spline { .. } => Algorithm::Spline,
        }
    }

    pub fn apply(&self, img: &RasterImage) -> Result<CompressionResult> {
        match *self {
            CompressionSetting::Dct { level } => compress_dct(img, level),
            CompressionSetting::Dwt { levels } => compress_dwt(img, levels),
            CompressionSetting::Klt { level } => compress_klt_level(img, level),
            CompressionSetting::Quadtree { depth, threshold } => compress_quadtree(img, depth, threshold),
            CompressionSetting::Spline { step } => compress_spline(img, step),
        }
    }

    /// The default sweep for one algorithm, strongest retention first.
    pub fn default_grid(algorithm: Algorithm) -> Vec<CompressionSetting> {
        match algorithm {
            Algorithm::Dct => DCT_LEVELS.iter().map(|&level| CompressionSetting::Dct { level }).collect(),
            Algorithm::Dwt => DWT_LEVELS.iter().map(|&levels| CompressionSetting::Dwt { levels }).collect(),
            Algorithm::Klt => DCT_LEVELS.iter().map(|&level| CompressionSetting::Klt { level }).collect(),
            Algorithm::Quadtree => QUADTREE_DEPTHS
                .iter()
                .rev()
                .map(|&depth| CompressionSetting::Quadtree { depth, threshold: DEFAULT_SPLIT_THRESHOLD })
                .collect(),
            Algorithm::Spline => SPLINE_STEPS.iter().map(|&step| CompressionSetting::Spline { step }).collect(),
        }
    }
}
