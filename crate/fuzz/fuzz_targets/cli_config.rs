#![no_main]

use hashmark_cli::config::CliConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = CliConfig::parse(text) {
        let _ = cfg.experiment();
        assert_eq!(CliConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
});
