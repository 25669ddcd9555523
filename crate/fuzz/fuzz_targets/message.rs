#![no_main]

use hashmark::embedding::Message;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = Message::from_bytes(data) {
        assert_eq!(m.to_bytes(), data);
        assert_eq!(Message::from_thirds(&m.to_thirds()).unwrap(), m);
    }
    let third = data.len() / 3;
    let parts = [data[..third].to_vec(), data[third..2 * third].to_vec(), data[2 * third..].to_vec()];
    let _ = Message::from_thirds(&parts);
});
