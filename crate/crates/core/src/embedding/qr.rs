//! QR symbols as module grids, their placement on a carrier, and decoding.

use qrcode::bits::Bits;
use qrcode::{Color, EcLevel, QrCode, Version};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Light modules drawn around the symbol on every side.
pub const QUIET_ZONE: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EccLevel {
    L,
    #[default]
    M,
    Q,
    H,
}

impl EccLevel {
    fn to_qrcode(self) -> EcLevel {
        match self {
            EccLevel::L => EcLevel::L,
            EccLevel::M => EcLevel::M,
            EccLevel::Q => EcLevel::Q,
            EccLevel::H => EcLevel::H,
        }
    }
}

impl std::str::FromStr for EccLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L" => Ok(EccLevel::L),
            "M" => Ok(EccLevel::M),
            "Q" => Ok(EccLevel::Q),
            "H" => Ok(EccLevel::H),
            other => Err(Error::InvalidParameter(format!("unknown ECC level {other:?}"))),
        }
    }
}

/// A QR symbol without its quiet zone. `true` is a dark module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QrSymbol {
    pub version: u8,
    pub size: usize,
    pub modules: Vec<bool>,
}

impl QrSymbol {
    /// Side length including the quiet zone.
    pub fn total_size(&self) -> usize {
        self.size + 2 * QUIET_ZONE
    }

    /// Module lookup in quiet-zone coordinates; the border is light.
    pub fn dark_at(&self, x: usize, y: usize) -> bool {
        let q = QUIET_ZONE;
        if x < q || y < q || x >= q + self.size || y >= q + self.size {
            return false;
        }
        self.modules[(y - q) * self.size + (x - q)]
    }
}

pub fn version_size(version: u8) -> usize {
    17 + 4 * usize::from(version)
}

/// Encodes `payload` in byte mode at the smallest version that holds it.
pub fn make_qr(payload: &[u8], ecc: EccLevel) -> Result<QrSymbol> {
    let level = ecc.to_qrcode();
    for v in 1..=40i16 {
        let mut bits = Bits::new(Version::Normal(v));
        if bits.push_byte_data(payload).is_err() || bits.push_terminator(level).is_err() {
            continue;
        }
        let code = QrCode::with_bits(bits, level).map_err(|e| Error::QrEncode(e.to_string()))?;
        let size = code.width();
        let modules = code.to_colors().into_iter().map(|c| c == Color::Dark).collect();
        return Ok(QrSymbol { version: v as u8, size, modules });
    }
    Err(Error::Capacity(format!(
        "{} bytes exceed QR version 40 at ECC level {ecc:?}",
        payload.len()
    )))
}

/// Decodes a module grid (no quiet zone, `true` = dark) to its byte payload.
pub fn decode_grid(size: usize, modules: &[bool]) -> Result<Vec<u8>> {
    if size < 21 || modules.len() != size * size {
        return Err(Error::ExtractionFailed(format!("{} modules do not form a {size}x{size} grid", modules.len())));
    }
    let grid = rqrr::SimpleGrid::from_func(size, |x, y| modules[y * size + x]);
    let mut out = Vec::new();
    let meta = rqrr::Grid::new(grid)
        .decode_to(&mut out)
        .map_err(|e| Error::ExtractionFailed(format!("QR decode: {e}")))?;
    if version_size(meta.version.0 as u8) != size {
        return Err(Error::ExtractionFailed(format!("version {} does not match a {size}-module grid", meta.version.0)));
    }
    Ok(out)
}

/// Pixel size of one QR module, `num / den` pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleScale {
    pub num: usize,
    pub den: usize,
}

impl ModuleScale {
    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Module index covering pixel offset `p`.
    pub fn module_of(&self, p: usize) -> usize {
        p * self.den / self.num
    }

    /// Pixels spanned by `modules` modules.
    pub fn span(&self, modules: usize) -> usize {
        (modules * self.num).div_ceil(self.den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
}

/// Corner used for channel `c` (R, G, B).
pub const CHANNEL_CORNERS: [Corner; 3] = [Corner::TopLeft, Corner::TopRight, Corner::BottomLeft];

/// Where and how large a QR symbol is drawn on a carrier grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrPlacement {
    pub scale: ModuleScale,
    /// Modules per side, quiet zone included.
    pub qr_size: usize,
    pub block_hash: usize,
}

impl QrPlacement {
    pub fn b_qr(&self) -> f64 {
        self.scale.as_f64()
    }

    pub fn pixel_span(&self) -> usize {
        self.scale.span(self.qr_size)
    }

    /// Top-left pixel of the symbol when anchored at `corner` on a
    /// `width x height` carrier.
    pub fn origin(&self, corner: Corner, width: usize, height: usize) -> (usize, usize) {
        let s = self.pixel_span();
        match corner {
            Corner::TopLeft => (0, 0),
            Corner::TopRight => (width - s, 0),
            Corner::BottomLeft => (0, height - s),
        }
    }
}

/// Largest module size of the form `n * b_hash` or `b_hash / n` for which
/// `qr_size` modules fit into `image_dim` pixels. Modules never shrink below
/// one pixel.
pub fn choose_qr_scale(qr_size: usize, image_dim: usize, b_hash: usize) -> Result<QrPlacement> {
    if qr_size == 0 || b_hash == 0 || image_dim == 0 {
        return Err(Error::Placement("QR size, image size and hash block must be positive".into()));
    }
    let full = qr_size * b_hash;
    let scale = if full <= image_dim {
        ModuleScale { num: (image_dim / full) * b_hash, den: 1 }
    } else {
        let n = full.div_ceil(image_dim);
        if n > b_hash {
            return Err(Error::Placement(format!(
                "{qr_size} modules do not fit {image_dim} px even at one pixel per module"
            )));
        }
        ModuleScale { num: b_hash, den: n }
    };
    Ok(QrPlacement { scale, qr_size, block_hash: b_hash })
}

/// Write `symbol` into the low `depth` bits of a `width`-wide sample buffer:
/// dark modules clear them, light modules set them.
pub fn write_symbol(
    samples: &mut [i32],
    width: usize,
    height: usize,
    symbol: &QrSymbol,
    placement: &QrPlacement,
    corner: Corner,
    depth: u32,
) {
    let low = (1i32 << depth) - 1;
    let (ox, oy) = placement.origin(corner, width, height);
    let span = placement.pixel_span();
    for py in 0..span {
        let my = placement.scale.module_of(py);
        let row = (oy + py) * width + ox;
        for px in 0..span {
            let mx = placement.scale.module_of(px);
            let v = samples[row + px] & !low;
            samples[row + px] = if symbol.dark_at(mx, my) { v } else { v | low };
        }
    }
}

/// Majority-votes each module from the low `depth` bits of the covered
/// samples and returns the grid without its quiet zone.
pub fn read_modules(
    samples: &[i32],
    width: usize,
    height: usize,
    placement: &QrPlacement,
    corner: Corner,
    depth: u32,
) -> (usize, Vec<bool>) {
    let total = placement.qr_size;
    let mut light = vec![0u32; total * total];
    let mut count = vec![0u32; total * total];
    let (ox, oy) = placement.origin(corner, width, height);
    let span = placement.pixel_span();
    let mask = (1i32 << depth) - 1;
    let half = 1i32 << (depth - 1);
    for py in 0..span {
        let my = placement.scale.module_of(py);
        let row = (oy + py) * width + ox;
        for px in 0..span {
            let mx = placement.scale.module_of(px);
            let k = my * total + mx;
            count[k] += 1;
            if samples[row + px] & mask >= half {
                light[k] += 1;
            }
        }
    }
    let size = total.saturating_sub(2 * QUIET_ZONE);
    let mut modules = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let k = (y + QUIET_ZONE) * total + x + QUIET_ZONE;
            modules.push(2 * light[k] < count[k]);
        }
    }
    (size, modules)
}
