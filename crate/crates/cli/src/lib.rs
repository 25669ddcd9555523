//! Support code for the `hashmark` binary: configuration, sidecars, charts
//! and test-image acquisition.

pub mod charts;
pub mod config;
pub mod fetch;

/// Bad flags, values or files; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
