#![no_main]

use hashmark::embedding::qr::{decode_grid, version_size};
use libfuzzer_sys::fuzz_target;

// First byte picks the version, the rest are module bits (cycled to fill).
fuzz_target!(|data: &[u8]| {
    let Some((&v, bits)) = data.split_first() else { return };
    let size = version_size(v % 40 + 1);
    if bits.is_empty() {
        return;
    }
    let modules: Vec<bool> = (0..size * size).map(|i| bits[(i / 8) % bits.len()] >> (i % 8) & 1 == 1).collect();
    let _ = decode_grid(size, &modules);
    let _ = decode_grid(size, &modules[1..]);
});
