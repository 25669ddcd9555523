//! Test-image acquisition with content digests over decoded samples.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hashmark::imagecore::{decode_png, RasterImage};
use sha2::{Digest, Sha256};

pub const MIRROR_ENV: &str = "HASHMARK_TESTIMAGE_MIRROR";

pub struct TestImage {
    pub name: &'static str,
    /// SHA-256 of the decoded image; `None` when no reference copy was available to pin.
    pub digest: Option<&'static str>,
}

pub const TEST_IMAGES: [TestImage; 3] = [
    TestImage { name: "lenna", digest: Some("78e90f990f446a7be7b1611416637bf049f335825d6794cdecb10146cb8fcb48") },
    TestImage { name: "baboon", digest: Some("ef499999f6f28d97b83683cea954a648fc5b7309b669aca3f754a1f119434936") },
    TestImage { name: "peppers", digest: None },
];

/// Failure to obtain or verify a test image; maps to the I/O exit code.
#[derive(Debug)]
pub struct FetchError(pub String);

impl std::fmt::Display for FetchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for FetchError {}

/// Digest over `"{w}x{h}x{c}\n"` followed by the interleaved samples, so
/// re-encoding a PNG does not change it.
pub fn image_digest(img: &RasterImage) -> String {
    let mut h = Sha256::new();
    h.update(format!("{}x{}x{}\n", img.width(), img.height(), img.channels()).as_bytes());
    h.update(img.to_interleaved());
    hex::encode(h.finalize())
}

fn verify(entry: &TestImage, bytes: &[u8], accept_unpinned: bool) -> Result<String> {
    let img = decode_png(bytes).map_err(|e| FetchError(format!("{}: {e}", entry.name)))?;
    if (img.width(), img.height(), img.channels()) != (512, 512, 3) {
        bail!(FetchError(format!(
            "{}: expected 512x512 RGB, got {}x{}x{}",
            entry.name,
            img.width(),
            img.height(),
            img.channels()
        )));
    }
    let got = image_digest(&img);
    match entry.digest {
        Some(want) if want != got => {
            bail!(FetchError(format!("{}: digest mismatch (expected {want}, got {got})", entry.name)))
        }
        None if !accept_unpinned => bail!(FetchError(format!(
            "{}: no pinned digest; rerun with --accept-unpinned to keep it (digest {got})",
            entry.name
        ))),
        _ => Ok(got),
    }
}

fn download(base: &str, name: &str) -> Result<Vec<u8>> {
    let base = base.trim_end_matches('/');
    if let Some(dir) = base.strip_prefix("file://") {
        let p = Path::new(dir).join(format!("{name}.png"));
        return std::fs::read(&p).with_context(|| format!("reading {}", p.display()));
    }
    let url = format!("{base}/{name}.png");
    let mut resp = ureq::get(&url).call().with_context(|| format!("GET {url}"))?;
    resp.body_mut().with_config().limit(64 << 20).read_to_vec().with_context(|| format!("reading body of {url}"))
}

pub struct FetchOptions {
    pub out_dir: PathBuf,
    pub mirrors: Vec<String>,
    pub offline: bool,
    pub accept_unpinned: bool,
    pub only: Vec<String>,
}

/// Verifies local copies, downloading missing ones unless offline. Returns
/// `(name, digest)` for every image in place after the call.
pub fn fetch(opts: &FetchOptions) -> Result<Vec<(String, String)>> {
    std::fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for entry in TEST_IMAGES.iter().filter(|t| opts.only.is_empty() || opts.only.iter().any(|o| o == t.name)) {
        let path = opts.out_dir.join(format!("{}.png", entry.name));
        if path.exists() {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            done.push((entry.name.to_string(), verify(entry, &bytes, opts.accept_unpinned)?));
            continue;
        }
        if opts.offline {
            failures.push(format!("{}: missing and offline", entry.name));
            continue;
        }
        if opts.mirrors.is_empty() {
            failures.push(format!("{}: missing and no mirror configured (--mirror or {MIRROR_ENV})", entry.name));
            continue;
        }
        let mut errors = Vec::new();
        let mut ok = false;
        for m in &opts.mirrors {
            match download(m, entry.name).and_then(|b| verify(entry, &b, opts.accept_unpinned).map(|d| (b, d))) {
                Ok((bytes, digest)) => {
                    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
                    done.push((entry.name.to_string(), digest));
                    ok = true;
                    break;
                }
                Err(e) => errors.push(format!("{m}: {e:#}")),
            }
        }
        if !ok {
            failures.push(format!("{}: {}", entry.name, errors.join("; ")));
        }
    }
    if !failures.is_empty() {
        bail!(FetchError(failures.join("\n")));
    }
    Ok(done)
}
