//! Block and wavelet transforms: orthonormal 8x8 DCT-II, single-level Haar
//! DWT in averaging form, and the integer Haar lifting transform.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::imagecore::{Channel, Plane};

pub const BLOCK: usize = 8;

/// 8x8 DCT coefficients, row-major (`[v * 8 + u]`, `v` vertical frequency).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientBlock(pub [f64; BLOCK * BLOCK]);

impl CoefficientBlock {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.0[v * BLOCK + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        self.0[v * BLOCK + u] = value;
    }
}

/// `basis[k][n] = c(k) cos((2n+1) k pi / 16)`, orthonormal rows.
fn dct_basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; BLOCK]; BLOCK];
        let n = BLOCK as f64;
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for (i, cell) in row.iter_mut().enumerate() {
                *cell = scale * (((2 * i + 1) as f64) * k as f64 * std::f64::consts::PI / (2.0 * n)).cos();
            }
        }
        m
    })
}

/// Orthonormal 2-D DCT-II of one 8x8 block given in row-major order.
pub fn dct2_block(block: &[f64]) -> Result<CoefficientBlock> {
    if block.len() != BLOCK * BLOCK {
        return Err(Error::DimensionMismatch(format!("DCT block has {} samples, expected 64", block.len())));
    }
    let b = dct_basis();
    // rows: tmp[y][u] = sum_x b[u][x] * block[y][x]
    let mut tmp = [0.0; BLOCK * BLOCK];
    for y in 0..BLOCK {
        for u in 0..BLOCK {
            tmp[y * BLOCK + u] = (0..BLOCK).map(|x| b[u][x] * block[y * BLOCK + x]).sum();
        }
    }
    let mut out = [0.0; BLOCK * BLOCK];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            out[v * BLOCK + u] = (0..BLOCK).map(|y| b[v][y] * tmp[y * BLOCK + u]).sum();
        }
    }
    Ok(CoefficientBlock(out))
}

pub fn idct2_block(coefs: &CoefficientBlock) -> [f64; BLOCK * BLOCK] {
    let b = dct_basis();
    let c = &coefs.0;
    let mut tmp = [0.0; BLOCK * BLOCK];
    for y in 0..BLOCK {
        for u in 0..BLOCK {
            tmp[y * BLOCK + u] = (0..BLOCK).map(|v| b[v][y] * c[v * BLOCK + u]).sum();
        }
    }
    let mut out = [0.0; BLOCK * BLOCK];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            out[y * BLOCK + x] = (0..BLOCK).map(|u| b[u][x] * tmp[y * BLOCK + u]).sum();
        }
    }
    out
}

/// Copies the 8x8 block with top-left corner `(bx*8, by*8)` out of a plane.
pub fn read_block(plane: &Plane, bx: usize, by: usize) -> [f64; BLOCK * BLOCK] {
    let mut out = [0.0; BLOCK * BLOCK];
    for y in 0..BLOCK {
        let row = (by * BLOCK + y) * plane.width + bx * BLOCK;
        out[y * BLOCK..(y + 1) * BLOCK].copy_from_slice(&plane.data[row..row + BLOCK]);
    }
    out
}

pub fn write_block(plane: &mut Plane, bx: usize, by: usize, block: &[f64; BLOCK * BLOCK]) {
    for y in 0..BLOCK {
        let row = (by * BLOCK + y) * plane.width + bx * BLOCK;
        plane.data[row..row + BLOCK].copy_from_slice(&block[y * BLOCK..(y + 1) * BLOCK]);
    }
}

pub fn check_block_aligned(width: usize, height: usize) -> Result<()> {
    if width % BLOCK != 0 || height % BLOCK != 0 {
        return Err(Error::DimensionMismatch(format!("{width}x{height} is not a multiple of 8")));
    }
    Ok(())
}

/// Single-level Haar sub-bands. Each band is `width x height` (half the parent).
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletBands {
    pub width: usize,
    pub height: usize,
    pub ll: Vec<f64>,
    pub lh: Vec<f64>,
    pub hl: Vec<f64>,
    pub hh: Vec<f64>,
}

fn check_even(width: usize, height: usize) -> Result<()> {
    if width % 2 != 0 || height % 2 != 0 || width == 0 || height == 0 {
        return Err(Error::DimensionMismatch(format!("{width}x{height} has an odd or zero dimension")));
    }
    Ok(())
}

/// Haar analysis over 2x2 quads `[[a, b], [c, d]]`:
/// `ll = (a+b+c+d)/4`, `hl = (a-b+c-d)/4`, `lh = (a+b-c-d)/4`, `hh = (a-b-c+d)/4`.
pub fn haar_dwt(plane: &Plane) -> Result<WaveletBands> {
    check_even(plane.width, plane.height)?;
    let (w, h) = (plane.width / 2, plane.height / 2);
    let mut bands = WaveletBands {
        width: w,
        height: h,
        ll: vec![0.0; w * h],
        lh: vec![0.0; w * h],
        hl: vec![0.0; w * h],
        hh: vec![0.0; w * h],
    };
    for j in 0..h {
        for i in 0..w {
            let a = plane.get(2 * i, 2 * j);
            let b = plane.get(2 * i + 1, 2 * j);
            let c = plane.get(2 * i, 2 * j + 1);
            let d = plane.get(2 * i + 1, 2 * j + 1);
            let k = j * w + i;
            bands.ll[k] = (a + b + c + d) / 4.0;
            bands.hl[k] = (a - b + c - d) / 4.0;
            bands.lh[k] = (a + b - c - d) / 4.0;
            bands.hh[k] = (a - b - c + d) / 4.0;
        }
    }
    Ok(bands)
}

pub fn ihaar_dwt(bands: &WaveletBands) -> Result<Plane> {
    let n = bands.width * bands.height;
    if [&bands.ll, &bands.lh, &bands.hl, &bands.hh].iter().any(|b| b.len() != n) {
        return Err(Error::DimensionMismatch("wavelet bands disagree in size".into()));
    }
    let mut out = Plane::zeros(bands.width * 2, bands.height * 2);
    for j in 0..bands.height {
        for i in 0..bands.width {
            let k = j * bands.width + i;
            let (ll, hl, lh, hh) = (bands.ll[k], bands.hl[k], bands.lh[k], bands.hh[k]);
            out.set(2 * i, 2 * j, ll + hl + lh + hh);
            out.set(2 * i + 1, 2 * j, ll - hl + lh - hh);
            out.set(2 * i, 2 * j + 1, ll + hl - lh - hh);
            out.set(2 * i + 1, 2 * j + 1, ll - hl - lh + hh);
        }
    }
    Ok(out)
}

/// Integer Haar sub-bands. Band names give the row pass first, then the
/// column pass: `lh` is the lowpass of row pairs followed by the highpass of
/// column pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerBands {
    pub width: usize,
    pub height: usize,
    pub ll: Vec<i32>,
    pub lh: Vec<i32>,
    pub hl: Vec<i32>,
    pub hh: Vec<i32>,
}

/// One lifting step on a pair: `(floor((a+b)/2), a-b)`.
#[inline]
pub fn lift_pair(a: i32, b: i32) -> (i32, i32) {
    ((a + b).div_euclid(2), a - b)
}

/// Exact inverse of [`lift_pair`]: `a = h + floor((g+1)/2)`, `b = a - g`.
#[inline]
pub fn unlift_pair(h: i32, g: i32) -> (i32, i32) {
    let a = h + (g + 1).div_euclid(2);
    (a, a - g)
}

/// Forward integer wavelet transform: adjacent rows are lifted first, then
/// adjacent columns of both row outputs.
pub fn iwt_forward(ch: &Channel) -> Result<IntegerBands> {
    check_even(ch.width, ch.height)?;
    let (w, h) = (ch.width, ch.height);
    let hh2 = h / 2;
    // row pass: low and high are (w x h/2)
    let mut low = vec![0i32; w * hh2];
    let mut high = vec![0i32; w * hh2];
    for j in 0..hh2 {
        for x in 0..w {
            let a = i32::from(ch.data[2 * j * w + x]);
            let b = i32::from(ch.data[(2 * j + 1) * w + x]);
            let (l, g) = lift_pair(a, b);
            low[j * w + x] = l;
            high[j * w + x] = g;
        }
    }
    let w2 = w / 2;
    let col_pass = |src: &[i32]| {
        let mut lo = vec![0i32; w2 * hh2];
        let mut hi = vec![0i32; w2 * hh2];
        for j in 0..hh2 {
            for i in 0..w2 {
                let (l, g) = lift_pair(src[j * w + 2 * i], src[j * w + 2 * i + 1]);
                lo[j * w2 + i] = l;
                hi[j * w2 + i] = g;
            }
        }
        (lo, hi)
    };
    let (ll, lh) = col_pass(&low);
    let (hl, hh) = col_pass(&high);
    Ok(IntegerBands { width: w2, height: hh2, ll, lh, hl, hh })
}

/// Inverse integer transform, returned unclipped so callers can decide how to
/// handle samples pushed outside `[0, 255]`.
pub fn iwt_inverse_raw(bands: &IntegerBands) -> Result<(usize, usize, Vec<i32>)> {
    let (w2, hh2) = (bands.width, bands.height);
    let n = w2 * hh2;
    if n == 0 || [&bands.ll, &bands.lh, &bands.hl, &bands.hh].iter().any(|b| b.len() != n) {
        return Err(Error::DimensionMismatch("integer bands disagree in size".into()));
    }
    let (w, h) = (w2 * 2, hh2 * 2);
    let col_inverse = |lo: &[i32], hi: &[i32]| {
        let mut out = vec![0i32; w * hh2];
        for j in 0..hh2 {
            for i in 0..w2 {
                let (a, b) = unlift_pair(lo[j * w2 + i], hi[j * w2 + i]);
                out[j * w + 2 * i] = a;
                out[j * w + 2 * i + 1] = b;
            }
        }
        out
    };
    let low = col_inverse(&bands.ll, &bands.lh);
    let high = col_inverse(&bands.hl, &bands.hh);
    let mut out = vec![0i32; w * h];
    for j in 0..hh2 {
        for x in 0..w {
            let (a, b) = unlift_pair(low[j * w + x], high[j * w + x]);
            out[2 * j * w + x] = a;
            out[(2 * j + 1) * w + x] = b;
        }
    }
    Ok((w, h, out))
}

/// Inverse integer transform with samples clamped into `[0, 255]`.
pub fn iwt_inverse(bands: &IntegerBands) -> Result<Channel> {
    let (w, h, raw) = iwt_inverse_raw(bands)?;
    Channel::new(w, h, raw.into_iter().map(|v| v.clamp(0, 255) as u8).collect())
}

/// Zig-zag scan order of an 8x8 block as `(u, v)` pairs, lowest frequency first.
pub fn zigzag() -> &'static [(usize, usize); 64] {
    static ORDER: OnceLock<[(usize, usize); 64]> = OnceLock::new();
    ORDER.get_or_init(|| {
        let mut order = [(0, 0); 64];
        let mut k = 0;
        for s in 0..(2 * BLOCK - 1) {
            let lo = s.saturating_sub(BLOCK - 1);
            let hi = s.min(BLOCK - 1);
            // even diagonals run bottom-left to top-right
            let range: Box<dyn Iterator<Item = usize>> =
                if s % 2 == 0 { Box::new((lo..=hi).rev()) } else { Box::new(lo..=hi) };
            for v in range {
                order[k] = (s - v, v);
                k += 1;
            }
        }
        order
    })
}
