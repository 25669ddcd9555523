//! Message records and their split into three per-channel payloads.

use crate::error::{Error, Result};

pub const HASH_LEN: usize = 16;
pub const TIMESTAMP_LEN: usize = 7;
pub const ELEMENT_LEN: usize = HASH_LEN + TIMESTAMP_LEN;
pub const DEFAULT_ELEMENTS: usize = 10;

/// One message record: a 16-byte hash followed by a 7-byte timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Element(pub [u8; ELEMENT_LEN]);

impl Element {
    pub fn new(hash: [u8; HASH_LEN], timestamp_ms: u64) -> Self {
        let mut bytes = [0u8; ELEMENT_LEN];
        bytes[..HASH_LEN].copy_from_slice(&hash);
        bytes[HASH_LEN..].copy_from_slice(&timestamp_bytes(timestamp_ms));
        Self(bytes)
    }

    pub fn hash(&self) -> &[u8] {
        &self.0[..HASH_LEN]
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.0[HASH_LEN..].iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
    }
}

/// Low 7 bytes of the big-endian millisecond epoch.
pub fn timestamp_bytes(ms: u64) -> [u8; TIMESTAMP_LEN] {
    let be = ms.to_be_bytes();
    let mut out = [0u8; TIMESTAMP_LEN];
    out.copy_from_slice(&be[8 - TIMESTAMP_LEN..]);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Message {
    pub elements: Vec<Element>,
}

impl Message {
    pub fn new(elements: Vec<Element>) -> Self {
        Self { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.elements.iter().flat_map(|e| e.0).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() || bytes.len() % ELEMENT_LEN != 0 {
            return Err(Error::InvalidParameter(format!(
                "message of {} bytes is not a positive multiple of {ELEMENT_LEN}",
                bytes.len()
            )));
        }
        let elements = bytes
            .chunks_exact(ELEMENT_LEN)
            .map(|c| {
                let mut e = [0u8; ELEMENT_LEN];
                e.copy_from_slice(c);
                Element(e)
            })
            .collect();
        Ok(Self { elements })
    }

    /// Serializes, zero-pads to a multiple of three and splits into three
    /// payloads. Each payload starts with a one-byte header holding the
    /// padding length.
    pub fn to_thirds(&self) -> [Vec<u8>; 3] {
        let mut bytes = self.to_bytes();
        let pad = (3 - bytes.len() % 3) % 3;
        bytes.resize(bytes.len() + pad, 0);
        let part = bytes.len() / 3;
        std::array::from_fn(|i| {
            let mut p = Vec::with_capacity(part + 1);
            p.push(pad as u8);
            p.extend_from_slice(&bytes[i * part..(i + 1) * part]);
            p
        })
    }

    /// Inverse of [`Message::to_thirds`].
    pub fn from_thirds(parts: &[Vec<u8>]) -> Result<Self> {
        if parts.len() != 3 {
            return Err(Error::ExtractionFailed(format!("expected 3 payloads, got {}", parts.len())));
        }
        let header = parts[0].first().copied();
        let Some(pad) = header else {
            return Err(Error::ExtractionFailed("empty payload".into()));
        };
        if pad > 2 || parts.iter().any(|p| p.first() != Some(&pad)) {
            return Err(Error::ExtractionFailed("payload headers are inconsistent".into()));
        }
        let body_len = parts[0].len() - 1;
        if parts.iter().any(|p| p.len() != body_len + 1) {
            return Err(Error::ExtractionFailed("payload lengths differ".into()));
        }
        let mut bytes: Vec<u8> = parts.iter().flat_map(|p| p[1..].iter().copied()).collect();
        let pad = usize::from(pad);
        if pad > bytes.len() || bytes[bytes.len() - pad..].iter().any(|&b| b != 0) {
            return Err(Error::ExtractionFailed("padding bytes are not zero".into()));
        }
        bytes.truncate(bytes.len() - pad);
        Self::from_bytes(&bytes).map_err(|e| Error::ExtractionFailed(e.to_string()))
    }
}

/// Length of each framed third for a message of `n_elements` records.
pub fn third_len(n_elements: usize) -> usize {
    (n_elements * ELEMENT_LEN).div_ceil(3) + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Message {
        Message::new(
            (0..n)
                .map(|i| Element::new([i as u8; HASH_LEN], 1_700_000_000_000 + i as u64))
                .collect(),
        )
    }

    #[test]
    fn ten_elements_serialize_to_230_bytes() {
        let m = sample(10);
        assert_eq!(m.to_bytes().len(), 230);
        let thirds = m.to_thirds();
        assert!(thirds.iter().all(|t| t.len() == 78 && t[0] == 1));
        assert_eq!(third_len(10), 78);
        assert_eq!(Message::from_thirds(&thirds).unwrap(), m);
    }

    #[test]
    fn thirds_round_trip_for_every_padding() {
        for n in 1..=6 {
            let m = sample(n);
            assert_eq!(Message::from_thirds(&m.to_thirds()).unwrap(), m);
        }
    }

    #[test]
    fn corrupt_headers_rejected() {
        let mut t = sample(10).to_thirds();
        t[1][0] = 2;
        assert!(Message::from_thirds(&t).is_err());
        let mut t = sample(10).to_thirds();
        t[2].pop();
        assert!(Message::from_thirds(&t).is_err());
        let mut t = sample(10).to_thirds();
        *t[2].last_mut().unwrap() = 9;
        assert!(Message::from_thirds(&t).is_err());
    }

    #[test]
    fn timestamp_layout() {
        let e = Element::new([0; HASH_LEN], 0x0102_0304_0506_0708);
        assert_eq!(&e.0[HASH_LEN..], &[2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(e.timestamp_ms(), 0x0002_0304_0506_0708);
    }

    #[test]
    fn from_bytes_requires_whole_elements() {
        assert!(Message::from_bytes(&[0; 22]).is_err());
        assert!(Message::from_bytes(&[]).is_err());
        assert_eq!(Message::from_bytes(&[5; 46]).unwrap().len(), 2);
    }
}
