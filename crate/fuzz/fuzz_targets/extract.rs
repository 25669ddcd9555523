#![no_main]

use hashmark::embedding::{extract, EmbedderConfig, Scheme};
use hashmark::imagecore::RasterImage;
use libfuzzer_sys::fuzz_target;

// Two header bytes choose an image of up to 64x64 in 8-pixel steps; the rest
// are samples, cycled to fill. Extraction may fail but must not panic.
fuzz_target!(|data: &[u8]| {
    if data.len() < 3 {
        return;
    }
    let w = 8 * (usize::from(data[0] % 8) + 1);
    let h = 8 * (usize::from(data[1] % 8) + 1);
    let body = &data[2..];
    let samples: Vec<u8> = (0..w * h * 3).map(|i| body[i % body.len()]).collect();
    let img = RasterImage::from_interleaved(w, h, 3, &samples).unwrap();
    for scheme in Scheme::ALL {
        let cfg = EmbedderConfig { hash_grid: (2, 2), ..EmbedderConfig::new(scheme) };
        let _ = extract(&img, &cfg);
    }
});
