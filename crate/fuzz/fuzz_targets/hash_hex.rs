#![no_main]

use hashmark::perceptual::RobustHash;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&g, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let (rows, cols) = (usize::from(g >> 4) + 1, usize::from(g & 15) + 1);
    if let Ok(h) = RobustHash::from_hex(text, rows, cols) {
        assert_eq!(RobustHash::from_hex(&h.to_hex(), rows, cols).unwrap(), h);
    }
});
