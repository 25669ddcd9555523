#![no_main]

use hashmark::imagecore::{decode_png, encode_png};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_png(data) {
        let again = decode_png(&encode_png(&img).expect("decoded images re-encode")).expect("own output decodes");
        assert_eq!(again, img);
    }
});
