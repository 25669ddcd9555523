//! The manipulation and compression experiments, their records and CSV output.
//!
//! Every random draw comes from a ChaCha8 generator keyed by SHA-256 of
//! `(seed, purpose, image, scheme, k, repeat)`, so cells are independent and
//! can run in any order.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compression::{Algorithm, CompressionSetting};
use crate::embedding::message::{Element, Message, DEFAULT_ELEMENTS, HASH_LEN};
use crate::embedding::{calibrate_strength, embed, EmbedderConfig, Scheme};
use crate::error::{Error, Result};
use crate::imagecore::RasterImage;
use crate::perceptual::{block_hash, format_db, hamming_distance, psnr, DEFAULT_GRID};

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "image",
    "scheme",
    "param",
    "level_or_k",
    "psnr_db",
    "psnr_std",
    "hamming_mean",
    "hamming_std",
    "n",
    "status",
];

pub const DEFAULT_REPEATS: usize = 20;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// First timestamp handed out by [`generate_message`], 2020-09-13 UTC.
const EPOCH_MS: u64 = 1_600_000_000_000;

#[derive(Clone, Debug)]
pub struct NamedImage {
    pub name: String,
    pub image: RasterImage,
}

impl NamedImage {
    pub fn new(name: impl Into<String>, image: RasterImage) -> Self {
        Self { name: name.into(), image }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub n_elements: usize,
    pub n_repeats: usize,
    pub rng_seed: u64,
    pub hash_grid: (usize, usize),
    /// Strength settings shared by all schemes; the scheme field is ignored.
    pub embedder: EmbedderConfig,
    /// Search each scheme's strength per image before the sweep.
    pub calibrate: bool,
    pub target_db: f64,
    pub tolerance_db: f64,
    pub compression: Vec<CompressionSetting>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            n_elements: DEFAULT_ELEMENTS,
            n_repeats: DEFAULT_REPEATS,
            rng_seed: DEFAULT_SEED,
            hash_grid: DEFAULT_GRID,
            embedder: EmbedderConfig::new(Scheme::Iwt),
            calibrate: false,
            target_db: 36.0,
            tolerance_db: 0.5,
            compression: Algorithm::ALL.iter().flat_map(|&a| CompressionSetting::default_grid(a)).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::InvalidParameter("at least one repeat is required".into()));
        }
        if self.n_elements == 0 {
            return Err(Error::InvalidParameter("messages need at least one element".into()));
        }
        self.embedder.validate()
    }

    fn embedder_for(&self, scheme: Scheme) -> EmbedderConfig {
        EmbedderConfig { scheme, hash_grid: self.hash_grid, ..self.embedder }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub image: String,
    /// Embedding scheme or compression algorithm.
    pub scheme: String,
    pub param: String,
    /// Replaced element count, or retained storage fraction.
    pub level_or_k: f64,
    pub psnr_db: f64,
    pub psnr_std: f64,
    pub hamming_mean: f64,
    pub hamming_std: f64,
    pub n: usize,
    pub status: String,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Value of `key` in the `param` column.
    pub fn param_value(&self, key: &str) -> Option<&str> {
        self.param.split(';').find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }
}

/// Seeded generator for one named purpose within a cell.
pub fn cell_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p.as_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn random_element(rng: &mut ChaCha8Rng, timestamp_ms: u64) -> Element {
    let mut hash = [0u8; HASH_LEN];
    rng.fill(&mut hash);
    Element::new(hash, timestamp_ms)
}

/// `n_elements` records with random hashes and increasing timestamps.
pub fn generate_message(seed: u64, n_elements: usize) -> Result<Message> {
    if n_elements == 0 {
        return Err(Error::InvalidParameter("messages need at least one element".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts = EPOCH_MS + rng.random_range(0..100_000_000_000u64);
    let elements = (0..n_elements)
        .map(|_| {
            ts += rng.random_range(1..=60_000u64);
            random_element(&mut rng, ts)
        })
        .collect();
    Ok(Message::new(elements))
}

/// Replaces `k` distinct, randomly chosen elements with fresh ones.
pub fn manipulate_message(msg: &Message, k: usize, seed: u64) -> Result<Message> {
    if k > msg.len() {
        return Err(Error::InvalidParameter(format!("cannot replace {k} of {} elements", msg.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut elements = msg.elements.clone();
    let mut picked = sample(&mut rng, msg.len(), k).into_vec();
    picked.sort_unstable();
    for i in picked {
        let ts = elements[i].timestamp_ms() + rng.random_range(1..=1_000u64);
        elements[i] = random_element(&mut rng, ts);
    }
    Ok(Message::new(elements))
}

/// Population mean and standard deviation. An infinite sample makes the
/// mean infinite and the deviation undefined.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if xs.iter().all(|x| x.is_infinite() && *x > 0.0) {
        return (f64::INFINITY, 0.0);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return (f64::INFINITY, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `NaN` when either
/// side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeClass {
    CompressionLike,
    ManipulationLike,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: ChangeClass,
    pub caveat: &'static str,
}

pub const CLASSIFY_CAVEAT: &str =
    "threshold rule on hash distance alone; compression at low quality can exceed the manipulation threshold";

/// Calls a hash change compression-like when it stays below the smallest
/// mean distance caused by message manipulation.
pub fn classify_change(hamming: f64, threshold: f64) -> Classification {
    let class = if hamming < threshold { ChangeClass::CompressionLike } else { ChangeClass::ManipulationLike };
    Classification { class, caveat: CLASSIFY_CAVEAT }
}

fn failed(experiment: &str, image: &str, scheme: &str, param: String, level_or_k: f64, err: &Error) -> ExperimentRecord {
    ExperimentRecord {
        experiment: experiment.into(),
        image: image.into(),
        scheme: scheme.into(),
        param,
        level_or_k,
        psnr_db: f64::NAN,
        psnr_std: f64::NAN,
        hamming_mean: f64::NAN,
        hamming_std: f64::NAN,
        n: 0,
        status: format!("failed: {err}"),
    }
}

fn strength_param(cfg: &EmbedderConfig) -> String {
    match cfg.scheme {
        Scheme::QrLsb | Scheme::Iwt => format!("lsb_depth={}", cfg.lsb_depth),
        Scheme::DctQim => format!("qs={}", cfg.qs_dct),
        Scheme::DwtQim => format!("qs={}", cfg.qs_dwt),
    }
}

/// Message embedded as the unmanipulated original for `image`.
pub fn original_message(cfg: &ExperimentConfig, image: &str) -> Result<Message> {
    let seed = cell_rng(cfg.rng_seed, &["original", image]).random();
    generate_message(seed, cfg.n_elements)
}

fn manipulation_cells(
    cfg: &ExperimentConfig,
    img: &NamedImage,
    scheme: Scheme,
) -> Result<(EmbedderConfig, Message, RasterImage)> {
    let msg = original_message(cfg, &img.name)?;
    let mut ecfg = cfg.embedder_for(scheme);
    if cfg.calibrate {
        ecfg = calibrate_strength(&img.image, &msg, &ecfg, cfg.target_db, cfg.tolerance_db)?.config;
    }
    let embedded = embed(&img.image, &msg, &ecfg)?;
    Ok((ecfg, msg, embedded))
}

/// For each image and scheme: the `k = 0` baseline plus one aggregated
/// record per replaced-element count `k = 1..=n_elements`.
pub fn run_manipulation_experiment(cfg: &ExperimentConfig, images: &[NamedImage]) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let pairs: Vec<(&NamedImage, Scheme)> =
        images.iter().flat_map(|img| cfg.schemes.iter().map(move |&s| (img, s))).collect();
    let records: Vec<Vec<ExperimentRecord>> = pairs
        .par_iter()
        .map(|&(img, scheme)| manipulation_for(cfg, img, scheme))
        .collect::<Result<_>>()?;
    Ok(records.into_iter().flatten().collect())
}

fn manipulation_for(cfg: &ExperimentConfig, img: &NamedImage, scheme: Scheme) -> Result<Vec<ExperimentRecord>> {
    const EXP: &str = "manipulation";
    let name = scheme.name();
    let n = cfg.n_elements;
    let (ecfg, msg, embedded) = match manipulation_cells(cfg, img, scheme) {
        Ok(v) => v,
        Err(e) => {
            return Ok((0..=n)
                .map(|k| failed(EXP, &img.name, name, format!("fraction={}", k as f64 / n as f64), k as f64, &e))
                .collect())
        }
    };
    let base_hash = block_hash(&embedded, cfg.hash_grid)?;
    let strength = strength_param(&ecfg);
    let vs_source = psnr(&img.image, &embedded)?;
    let mut out = vec![ExperimentRecord {
        experiment: EXP.into(),
        image: img.name.clone(),
        scheme: name.into(),
        param: format!("fraction=0;{strength};psnr_vs_source={}", format_db(vs_source)),
        level_or_k: 0.0,
        psnr_db: psnr(&embedded, &embedded)?,
        psnr_std: 0.0,
        hamming_mean: hamming_distance(&base_hash, &base_hash)?,
        hamming_std: 0.0,
        n: 1,
        status: "ok".into(),
    }];
    let cells: Vec<usize> = (1..=n).collect();
    let rows = cells
        .par_iter()
        .map(|&k| -> Result<ExperimentRecord> {
            let fraction = k as f64 / n as f64;
            let mut psnrs = Vec::with_capacity(cfg.n_repeats);
            let mut hams = Vec::with_capacity(cfg.n_repeats);
            let mut source = Vec::with_capacity(cfg.n_repeats);
            for r in 0..cfg.n_repeats {
                let seed = cell_rng(cfg.rng_seed, &["manipulate", &img.name, name, &k.to_string(), &r.to_string()])
                    .random();
                let manipulated = manipulate_message(&msg, k, seed)?;
                let other = match embed(&img.image, &manipulated, &ecfg) {
                    Ok(o) => o,
                    Err(e) => return Ok(failed(EXP, &img.name, name, format!("fraction={fraction}"), k as f64, &e)),
                };
                psnrs.push(psnr(&embedded, &other)?);
                hams.push(hamming_distance(&base_hash, &block_hash(&other, cfg.hash_grid)?)?);
                source.push(psnr(&img.image, &other)?);
            }
            let (psnr_db, psnr_std) = mean_std(&psnrs);
            let (hamming_mean, hamming_std) = mean_std(&hams);
            Ok(ExperimentRecord {
                experiment: EXP.into(),
                image: img.name.clone(),
                scheme: name.into(),
                param: {
                    let (m, sd) = mean_std(&source);
                    format!("fraction={fraction};{strength};psnr_vs_source={};psnr_vs_source_std={sd:.6}", format_db(m))
                },
                level_or_k: k as f64,
                psnr_db,
                psnr_std,
                hamming_mean,
                hamming_std,
                n: cfg.n_repeats,
                status: "ok".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.extend(rows);
    Ok(out)
}

/// Smallest positive mean hash distance of IWT manipulation per image.
/// Images where no manipulation moved the hash get no threshold.
pub fn iwt_thresholds(records: &[ExperimentRecord]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for r in records {
        if r.experiment == "manipulation"
            && r.scheme == Scheme::Iwt.name()
            && r.is_ok()
            && r.level_or_k > 0.0
            && r.hamming_mean > 0.0
        {
            let e = out.entry(r.image.clone()).or_insert(f64::INFINITY);
            *e = f64::min(*e, r.hamming_mean);
        }
    }
    out
}

/// One record per image and compression setting. `thresholds` maps image
/// names to the IWT manipulation threshold, echoed in the `param` column.
pub fn run_compression_experiment(
    cfg: &ExperimentConfig,
    images: &[NamedImage],
    thresholds: &BTreeMap<String, f64>,
) -> Result<Vec<ExperimentRecord>> {
    const EXP: &str = "compression";
    let cells: Vec<(&NamedImage, CompressionSetting)> =
        images.iter().flat_map(|img| cfg.compression.iter().map(move |&s| (img, s))).collect();
    let hashes: BTreeMap<&str, _> = images
        .iter()
        .map(|img| Ok((img.name.as_str(), block_hash(&img.image, cfg.hash_grid)?)))
        .collect::<Result<_>>()?;
    cells
        .par_iter()
        .map(|&(img, setting)| {
            let algo = setting.algorithm().name();
            let threshold = thresholds.get(&img.name).map(|t| format!(";iwt_threshold={t:.6}")).unwrap_or_default();
            let result = match setting.apply(&img.image) {
                Ok(r) => r,
                Err(e) => {
                    return Ok(failed(EXP, &img.name, algo, format!("{setting:?}{threshold}"), f64::NAN, &e));
                }
            };
            let hd = hamming_distance(&hashes[img.name.as_str()], &block_hash(&result.image, cfg.hash_grid)?)?;
            Ok(ExperimentRecord {
                experiment: EXP.into(),
                image: img.name.clone(),
                scheme: algo.into(),
                param: format!("{}{threshold}", result.params),
                level_or_k: result.level,
                psnr_db: psnr(&img.image, &result.image)?,
                psnr_std: 0.0,
                hamming_mean: hd,
                hamming_std: 0.0,
                n: 1,
                status: "ok".into(),
            })
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}

fn fmt_level(v: f64) -> String {
    if v.fract() == 0.0 && v.is_finite() {
        format!("{v:.0}")
    } else {
        fmt_num(v)
    }
}

pub fn write_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::InvalidParameter(format!("CSV write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        let psnr = if r.psnr_db.is_infinite() && r.psnr_db > 0.0 { format_db(r.psnr_db) } else { fmt_num(r.psnr_db) };
        w.write_record([
            r.experiment.as_str(),
            &r.image,
            &r.scheme,
            &r.param,
            &fmt_level(r.level_or_k),
            &psnr,
            &fmt_num(r.psnr_std),
            &fmt_num(r.hamming_mean),
            &fmt_num(r.hamming_std),
            &r.n.to_string(),
            &r.status,
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn csv_string(records: &[ExperimentRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn parse_num(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| Error::InvalidParameter(format!("bad number {s:?} in CSV"))),
    }
}

/// Reads records written by [`write_csv`].
pub fn read_csv(input: impl std::io::Read) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidParameter("unexpected CSV header".into()));
    }
    rdr.records()
        .map(|row| {
            let row = row.map_err(|e| Error::InvalidParameter(e.to_string()))?;
            if row.len() != CSV_HEADER.len() {
                return Err(Error::InvalidParameter(format!("row has {} fields", row.len())));
            }
            Ok(ExperimentRecord {
                experiment: row[0].into(),
                image: row[1].into(),
                scheme: row[2].into(),
                param: row[3].into(),
                level_or_k: parse_num(&row[4])?,
                psnr_db: parse_num(&row[5])?,
                psnr_std: parse_num(&row[6])?,
                hamming_mean: parse_num(&row[7])?,
                hamming_std: parse_num(&row[8])?,
                n: row[9].parse().map_err(|_| Error::InvalidParameter(format!("bad count {:?}", &row[9])))?,
                status: row[10].into(),
            })
        })
        .collect()
}
