//! Raster images, PNG I/O and pixel arithmetic shared by every other module.
//!
//! Images are stored planar: all samples of channel 0 first, then channel 1,
//! and so on, each plane in row-major order. PNG files are interleaved, so the
//! conversion happens at the I/O boundary only.

use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use crate::error::{Error, Result};

/// An 8-bit grayscale or RGB image with planar storage.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

/// A single 8-bit sample plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// A real-valued sample plane, used for transform-domain work.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    /// Builds an image from planar samples.
    pub fn from_planar(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels (expected 1 or 3)")));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "sample count {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image from channel-interleaved samples (`RGBRGB...`).
    pub fn from_interleaved(width: usize, height: usize, channels: usize, data: &[u8]) -> Result<Self> {
        if channels == 0 || data.len() % channels != 0 {
            return Err(Error::InvalidImage("interleaved buffer length not a multiple of channels".into()));
        }
        let pixels = data.len() / channels;
        let mut planar = vec![0u8; data.len()];
        for (i, px) in data.chunks_exact(channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                planar[c * pixels + i] = v;
            }
        }
        Self::from_planar(width, height, channels, planar)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::from_planar(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// All samples, planar.
    pub fn samples(&self) -> &[u8] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[u8] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [u8] {
        let n = self.pixel_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> u8 {
        self.data[c * self.pixel_count() + y * self.width + x]
    }

    pub fn set(&mut self, c: usize, x: usize, y: usize, v: u8) {
        let n = self.pixel_count();
        self.data[c * n + y * self.width + x] = v;
    }

    pub fn to_interleaved(&self) -> Vec<u8> {
        let n = self.pixel_count();
        let mut out = vec![0u8; self.data.len()];
        for c in 0..self.channels {
            for i in 0..n {
                out[i * self.channels + c] = self.data[c * n + i];
            }
        }
        out
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

impl Channel {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "channel of {} samples cannot be {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn to_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Rounds and clamps every sample back into an 8-bit channel.
    pub fn to_channel(&self) -> Result<Channel> {
        let data = self.data.iter().map(|&v| clip_round(v)).collect::<Result<Vec<_>>>()?;
        Channel::new(self.width, self.height, data)
    }
}

/// Round half away from zero, then clamp to `[0, 255]`.
pub fn clip_round(value: f64) -> Result<u8> {
    if !value.is_finite() {
        return Err(Error::NonFinite(value));
    }
    Ok(value.round().clamp(0.0, 255.0) as u8)
}

pub fn split_channels(img: &RasterImage) -> Vec<Channel> {
    (0..img.channels)
        .map(|c| Channel { width: img.width, height: img.height, data: img.plane(c).to_vec() })
        .collect()
}

pub fn merge_channels(channels: &[Channel]) -> Result<RasterImage> {
    let first = channels
        .first()
        .ok_or_else(|| Error::InvalidImage("no channels to merge".into()))?;
    if channels.iter().any(|c| c.width != first.width || c.height != first.height) {
        return Err(Error::DimensionMismatch("channels differ in size".into()));
    }
    let data = channels.iter().flat_map(|c| c.data.iter().copied()).collect();
    RasterImage::from_planar(first.width, first.height, channels.len(), data)
}

/// BT.601 luminance. Single-channel input is returned unchanged.
pub fn to_grayscale(img: &RasterImage) -> Channel {
    if img.channels == 1 {
        return Channel { width: img.width, height: img.height, data: img.data.clone() };
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..img.pixel_count())
        .map(|i| {
            let y = 0.299 * f64::from(r[i]) + 0.587 * f64::from(g[i]) + 0.114 * f64::from(b[i]);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Channel { width: img.width, height: img.height, data }
}

/// Decodes an 8-bit grayscale, RGB or alpha-free palette PNG.
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let header = decoder.read_header_info().map_err(|e| Error::PngDecode(e.to_string()))?;
    let (color, depth) = (header.color_type, header.bit_depth);
    let has_trns = header.trns.is_some();
    match (color, depth) {
        (png::ColorType::Grayscale | png::ColorType::Rgb, png::BitDepth::Eight) if !has_trns => {}
        (png::ColorType::Indexed, _) if !has_trns => {}
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{color:?} at {depth:?}{}",
                if has_trns { " with transparency" } else { "" }
            )))
        }
    }
    let mut reader = decoder.read_info().map_err(|e| Error::PngDecode(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::PngDecode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::PngDecode(e.to_string()))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(Error::UnsupportedFormat(format!("decoded as {other:?}"))),
    };
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!("decoded bit depth {:?}", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let row = w * channels;
    let mut packed = Vec::with_capacity(row * h);
    for line in buf.chunks(info.line_size).take(h) {
        packed.extend_from_slice(&line[..row]);
    }
    RasterImage::from_interleaved(w, h, channels, &packed)
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(if img.channels == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::PngEncode(e.to_string()))?;
        writer
            .write_image_data(&img.to_interleaved())
            .map_err(|e| Error::PngEncode(e.to_string()))?;
        writer.finish().map_err(|e| Error::PngEncode(e.to_string()))?;
    }
    Ok(out)
}

pub fn load_png(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

pub fn save_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    std::io::Write::write_all(&mut w, &bytes).map_err(|e| Error::io(path, e))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb(w: usize, h: usize, f: impl Fn(usize, usize, usize) -> u8) -> RasterImage {
        let mut data = Vec::with_capacity(w * h * 3);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(c, x, y));
                }
            }
        }
        RasterImage::from_planar(w, h, 3, data).unwrap()
    }

    #[test]
    fn clip_round_rules() {
        assert_eq!(clip_round(255.7).unwrap(), 255);
        assert_eq!(clip_round(-3.2).unwrap(), 0);
        assert_eq!(clip_round(127.5).unwrap(), 128);
        assert_eq!(clip_round(126.5).unwrap(), 127);
        assert!(clip_round(f64::NAN).is_err());
        assert!(clip_round(f64::INFINITY).is_err());
    }

    #[test]
    fn grayscale_weights() {
        let img = RasterImage::from_planar(2, 1, 3, vec![255, 255, 255, 0, 255, 0]).unwrap();
        let g = to_grayscale(&img);
        assert_eq!(g.data, vec![255, 76]);

        let gray = RasterImage::from_planar(2, 1, 1, vec![3, 200]).unwrap();
        assert_eq!(to_grayscale(&gray).data, vec![3, 200]);
    }

    #[test]
    fn split_merge() {
        let img = rgb(5, 3, |c, x, y| (c * 50 + x * 7 + y) as u8);
        let parts = split_channels(&img);
        assert_eq!(parts.len(), 3);
        assert!(parts.iter().all(|p| p.width == 5 && p.height == 3));
        assert_eq!(parts[1].get(2, 1), img.get(1, 2, 1));
        assert_eq!(merge_channels(&parts).unwrap(), img);

        let gray = RasterImage::filled(4, 4, 1, 9).unwrap();
        assert_eq!(split_channels(&gray).len(), 1);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(RasterImage::from_planar(0, 4, 1, vec![]).is_err());
        assert!(RasterImage::from_planar(2, 2, 2, vec![0; 8]).is_err());
        assert!(RasterImage::from_planar(2, 2, 3, vec![0; 11]).is_err());
    }

    #[test]
    fn png_round_trip_minimal_and_uniform() {
        let one = RasterImage::from_planar(1, 1, 1, vec![0]).unwrap();
        assert_eq!(decode_png(&encode_png(&one).unwrap()).unwrap(), one);

        let white = RasterImage::filled(2, 2, 1, 255).unwrap();
        let back = decode_png(&encode_png(&white).unwrap()).unwrap();
        assert_eq!(back.samples(), &[255; 4]);
    }

    #[test]
    fn png_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = rgb(64, 32, |c, x, y| ((x * 3 + y * 5) as u8).wrapping_mul(c as u8 + 1));
        save_png(&img, &path).unwrap();
        let once = load_png(&path).unwrap();
        assert_eq!(once, img);
        save_png(&once, &path).unwrap();
        assert_eq!(load_png(&path).unwrap(), img);
    }

    #[test]
    fn png_rejects_16_bit_and_alpha() {
        for (color, depth, bpp) in [
            (png::ColorType::Grayscale, png::BitDepth::Sixteen, 2),
            (png::ColorType::Rgba, png::BitDepth::Eight, 4),
            (png::ColorType::GrayscaleAlpha, png::BitDepth::Eight, 2),
        ] {
            let mut out = Vec::new();
            {
                let mut enc = png::Encoder::new(&mut out, 2, 2);
                enc.set_color(color);
                enc.set_depth(depth);
                let mut w = enc.write_header().unwrap();
                w.write_image_data(&vec![0u8; 4 * bpp]).unwrap();
            }
            assert!(matches!(decode_png(&out), Err(Error::UnsupportedFormat(_))), "{color:?}");
        }
    }

    #[test]
    fn png_palette_without_alpha_expands() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 2, 1);
            enc.set_color(png::ColorType::Indexed);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_palette(vec![10, 20, 30, 40, 50, 60]);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[1, 0]).unwrap();
        }
        let img = decode_png(&out).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.to_interleaved(), vec![40, 50, 60, 10, 20, 30]);
    }

    #[test]
    fn load_missing_file_is_io_error() {
        assert!(matches!(load_png("/nonexistent/nope.png"), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn png_round_trip_any(w in 1usize..24, h in 1usize..24, gray in any::<bool>(), seed in any::<u64>()) {
            let ch = if gray { 1 } else { 3 };
            let data: Vec<u8> = (0..w * h * ch)
                .map(|i| (seed.wrapping_add(i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 56) as u8)
                .collect();
            let img = RasterImage::from_planar(w, h, ch, data).unwrap();
            prop_assert_eq!(decode_png(&encode_png(&img).unwrap()).unwrap(), img);
        }

        #[test]
        fn clip_round_in_range(v in -1e6f64..1e6) {
            let _ = clip_round(v).unwrap();
        }
    }
}
