#![no_main]

use hashmark::experiments::{csv_string, read_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_csv(data) {
        let text = csv_string(&records).unwrap();
        let again = read_csv(text.as_bytes()).unwrap();
        assert_eq!(csv_string(&again).unwrap(), text);
    }
});
