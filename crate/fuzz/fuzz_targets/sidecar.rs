#![no_main]

use hashmark_cli::config::EmbedSidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(side) = EmbedSidecar::parse(text) {
        let _ = side.embedder();
    }
});
