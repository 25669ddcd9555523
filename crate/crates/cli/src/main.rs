//! `hashmark` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or invalid input, 2 capacity, placement or
//! extraction failure, 3 I/O, PNG or test-image verification failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hashmark::compression::{Algorithm, CompressionSetting, DEFAULT_SPLIT_THRESHOLD};
use hashmark::embedding::{self, calibrate_strength, qr_placement, EccLevel, EmbedderConfig, Message, Scheme};
use hashmark::experiments::{
    csv_string, generate_message, iwt_thresholds, read_csv, run_compression_experiment, run_manipulation_experiment,
    ExperimentRecord, NamedImage,
};
use hashmark::imagecore::{load_png, save_png};
use hashmark::perceptual::{compare, format_db};
use sha2::{Digest, Sha256};

use hashmark_cli::charts::{line_chart, series_by_scheme, Marker};
use hashmark_cli::config::{CliConfig, CompressSidecar, EmbedSidecar, PlacementInfo};
use hashmark_cli::fetch::{self, FetchError, FetchOptions, MIRROR_ENV};
use hashmark_cli::UsageError;

#[derive(Parser)]
#[command(name = "hashmark", version, about = "Embed hashes into images and measure how robust hashes react to compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a message into a PNG.
    Embed(EmbedArgs),
    /// Recover an embedded message.
    Extract(ExtractArgs),
    /// Print PSNR and block-hash Hamming distance between two images.
    Metrics(MetricsArgs),
    /// Apply a lossy compressor and write the reconstruction.
    Compress(CompressArgs),
    /// Run an experiment sweep, writing CSV and SVG charts.
    Experiment(ExperimentArgs),
    /// Download and verify the standard test images.
    FetchTestimages(FetchArgs),
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once('x').ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let r: usize = r.parse().map_err(|_| format!("bad row count in {s:?}"))?;
    let c: usize = c.parse().map_err(|_| format!("bad column count in {s:?}"))?;
    Ok((r, c))
}

#[derive(Args, Clone, Default)]
struct StrengthArgs {
    /// LSB bit depth for qr-lsb and iwt.
    #[arg(long)]
    lsb_depth: Option<u32>,
    /// QIM step for dct-qim.
    #[arg(long)]
    qs_dct: Option<f64>,
    /// QIM step for dwt-qim.
    #[arg(long)]
    qs_dwt: Option<f64>,
    /// QR error-correction level (L, M, Q, H).
    #[arg(long)]
    ecc: Option<EccLevel>,
    /// Hash grid, e.g. 16x16.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
}

impl StrengthArgs {
    fn apply(&self, mut cfg: EmbedderConfig) -> Result<EmbedderConfig> {
        if let Some(v) = self.lsb_depth {
            cfg.lsb_depth = v;
        }
        if let Some(v) = self.qs_dct {
            cfg.qs_dct = v;
        }
        if let Some(v) = self.qs_dwt {
            cfg.qs_dwt = v;
        }
        if let Some(v) = self.ecc {
            cfg.qr_ecc = v;
        }
        if let Some(v) = self.grid {
            cfg.hash_grid = v;
        }
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EmbedArgs {
    image: PathBuf,
    #[arg(long)]
    scheme: Scheme,
    /// Generate the message from this seed.
    #[arg(long, conflicts_with = "message", required_unless_present = "message")]
    seed: Option<u64>,
    /// Raw message file: concatenated 23-byte elements.
    #[arg(long)]
    message: Option<PathBuf>,
    /// Element count for seeded messages.
    #[arg(long, default_value_t = 10)]
    elements: usize,
    #[command(flatten)]
    strength: StrengthArgs,
    /// Search the strength whose PSNR is closest to --target-db.
    #[arg(long)]
    calibrate: bool,
    #[arg(long, default_value_t = 36.0)]
    target_db: f64,
    #[arg(long, default_value_t = 0.5)]
    tolerance_db: f64,
    /// Output PNG; defaults to <stem>.<scheme>.png beside the input.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    image: PathBuf,
    #[arg(long, required_unless_present = "sidecar")]
    scheme: Option<Scheme>,
    /// Embedding sidecar supplying scheme and parameters.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[command(flatten)]
    strength: StrengthArgs,
    /// Write raw message bytes here instead of listing elements on stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_parser = parse_grid, default_value = "16x16")]
    grid: (usize, usize),
}

#[derive(Args)]
struct CompressArgs {
    image: PathBuf,
    #[arg(long)]
    algorithm: Algorithm,
    /// Retained fraction for dct and klt.
    #[arg(long)]
    level: Option<f64>,
    /// Decomposition levels for dwt.
    #[arg(long)]
    levels: Option<usize>,
    /// Maximum depth for quadtree.
    #[arg(long)]
    depth: Option<usize>,
    /// Split threshold for quadtree.
    #[arg(long, default_value_t = DEFAULT_SPLIT_THRESHOLD)]
    threshold: u8,
    /// Knot spacing for spline.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long, value_parser = parse_grid, default_value = "16x16")]
    grid: (usize, usize),
    /// Output PNG; defaults to <stem>.<algorithm>.png beside the input.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Manipulation,
    Compression,
}

impl ExperimentKind {
    fn name(self) -> &'static str {
        match self {
            ExperimentKind::Manipulation => "manipulation",
            ExperimentKind::Compression => "compression",
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    kind: ExperimentKind,
    /// Input images; names are the file stems.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    images: Vec<PathBuf>,
    /// Directory holding lenna.png, baboon.png and peppers.png.
    #[arg(long, env = "HASHMARK_TESTIMAGES", default_value = "testimages")]
    image_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    calibrate: bool,
    /// Manipulation CSV providing the IWT thresholds for the compression run.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Skip SVG output.
    #[arg(long)]
    no_charts: bool,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(default_value = "testimages")]
    out_dir: PathBuf,
    /// Base URLs serving <name>.png; file:// directories are accepted.
    #[arg(long, env = MIRROR_ENV, value_delimiter = ',')]
    mirror: Vec<String>,
    /// Only verify files already present.
    #[arg(long)]
    offline: bool,
    /// Keep images that have no pinned digest.
    #[arg(long)]
    accept_unpinned: bool,
    /// Restrict to these images.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use hashmark::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<FetchError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParameter(_) | E::DimensionMismatch(_) | E::InvalidImage(_) | E::NonFinite(_) => 1,
                E::Capacity(_) | E::Placement(_) | E::ExtractionFailed(_) | E::QrEncode(_) => 2,
                E::Io { .. } | E::PngDecode(_) | E::PngEncode(_) | E::UnsupportedFormat(_) => 3,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<ureq::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Embed(a) => cmd_embed(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Compress(a) => cmd_compress(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::FetchTestimages(a) => cmd_fetch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}

fn derived_path(input: &Path, suffix: &str) -> PathBuf {
    input.with_file_name(format!("{}.{suffix}.png", stem(input)))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_embed(a: EmbedArgs) -> Result<()> {
    let img = load_png(&a.image)?;
    let msg = match (&a.message, a.seed) {
        (Some(p), _) => {
            let bytes = std::fs::read(p).map_err(|e| hashmark::Error::Io { path: p.clone(), source: e })?;
            Message::from_bytes(&bytes)?
        }
        (None, Some(seed)) => generate_message(seed, a.elements)?,
        (None, None) => unreachable!("clap requires a message source"),
    };
    let mut cfg = a.strength.apply(EmbedderConfig::new(a.scheme))?;
    if a.calibrate {
        let cal = calibrate_strength(&img, &msg, &cfg, a.target_db, a.tolerance_db)?;
        if !cal.within_tolerance {
            eprintln!("warning: no strength within {} dB of {} dB; using closest", a.tolerance_db, a.target_db);
        }
        cfg = cal.config;
    }
    let out = embedding::embed(&img, &msg, &cfg)?;
    let psnr = hashmark::perceptual::psnr(&img, &out)?;
    let output = a.output.clone().unwrap_or_else(|| derived_path(&a.image, a.scheme.name()));
    save_png(&out, &output)?;
    let placement = match a.scheme {
        Scheme::QrLsb => Some(PlacementInfo::new("pixels", &qr_placement(&img, &msg, &cfg)?)),
        Scheme::Iwt => Some(PlacementInfo::new("ll", &qr_placement(&img, &msg, &cfg)?)),
        _ => None,
    };
    let sidecar = EmbedSidecar {
        source: a.image.display().to_string(),
        output: output.display().to_string(),
        scheme: a.scheme.name().into(),
        lsb_depth: cfg.lsb_depth,
        qs_dct: cfg.qs_dct,
        qs_dwt: cfg.qs_dwt,
        ecc: cfg.qr_ecc,
        hash_grid: [cfg.hash_grid.0, cfg.hash_grid.1],
        psnr_db: format_db(psnr),
        message_elements: msg.len(),
        message_sha256: sha256_hex(&msg.to_bytes()),
        seed: if a.message.is_none() { a.seed } else { None },
        placement,
    };
    write_text(&output.with_extension("toml"), &toml::to_string(&sidecar)?)?;
    println!("{} psnr={}", output.display(), format_db(psnr));
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let base = match &a.sidecar {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| hashmark::Error::Io { path: p.clone(), source: e })?;
            let mut cfg = EmbedSidecar::parse(&text)?.embedder()?;
            if let Some(s) = a.scheme {
                cfg.scheme = s;
            }
            cfg
        }
        None => EmbedderConfig::new(a.scheme.expect("clap requires a scheme")),
    };
    let cfg = a.strength.apply(base)?;
    let img = load_png(&a.image)?;
    let msg = embedding::extract(&img, &cfg)?;
    match &a.output {
        Some(p) => std::fs::write(p, msg.to_bytes()).map_err(|e| hashmark::Error::Io { path: p.clone(), source: e })?,
        None => {
            for e in &msg.elements {
                println!("{} {}", hex::encode(e.hash()), e.timestamp_ms());
            }
        }
    }
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let x = load_png(&a.a)?;
    let y = load_png(&a.b)?;
    let r = compare(&x, &y, a.grid)?;
    println!("psnr={} hamming={:?}", format_db(r.psnr_db), r.hamming);
    Ok(())
}

fn cmd_compress(a: CompressArgs) -> Result<()> {
    let missing = |flag: &str| UsageError(format!("--algorithm {} requires {flag}", a.algorithm.name()));
    let setting = match a.algorithm {
        Algorithm::Dct => CompressionSetting::Dct { level: a.level.ok_or_else(|| missing("--level"))? },
        Algorithm::Klt => CompressionSetting::Klt { level: a.level.ok_or_else(|| missing("--level"))? },
        Algorithm::Dwt => CompressionSetting::Dwt { levels: a.levels.ok_or_else(|| missing("--levels"))? },
        Algorithm::Quadtree => {
            CompressionSetting::Quadtree { depth: a.depth.ok_or_else(|| missing("--depth"))?, threshold: a.threshold }
        }
        Algorithm::Spline => CompressionSetting::Spline { step: a.step.ok_or_else(|| missing("--step"))? },
    };
    let img = load_png(&a.image)?;
    let result = setting.apply(&img)?;
    let report = compare(&img, &result.image, a.grid)?;
    let output = a.output.clone().unwrap_or_else(|| derived_path(&a.image, a.algorithm.name()));
    save_png(&result.image, &output)?;
    let sidecar = CompressSidecar {
        source: a.image.display().to_string(),
        output: output.display().to_string(),
        algorithm: a.algorithm,
        params: result.params.clone(),
        level: result.level,
        psnr_db: format_db(report.psnr_db),
        hamming: report.hamming,
        hash_grid: [a.grid.0, a.grid.1],
    };
    write_text(&output.with_extension("toml"), &toml::to_string(&sidecar)?)?;
    println!(
        "{} level={:.4} psnr={} hamming={:?}",
        output.display(),
        result.level,
        format_db(report.psnr_db),
        report.hamming
    );
    Ok(())
}

fn load_images(a: &ExperimentArgs) -> Result<Vec<NamedImage>> {
    let paths: Vec<PathBuf> = if a.images.is_empty() {
        let found: Vec<PathBuf> = fetch::TEST_IMAGES
            .iter()
            .map(|t| a.image_dir.join(format!("{}.png", t.name)))
            .filter(|p| {
                let ok = p.exists();
                if !ok {
                    eprintln!("warning: {} not found, skipping", p.display());
                }
                ok
            })
            .collect();
        if found.is_empty() {
            return Err(UsageError(format!(
                "no test images in {}; run fetch-testimages or pass --images",
                a.image_dir.display()
            ))
            .into());
        }
        found
    } else {
        a.images.clone()
    };
    paths.iter().map(|p| Ok(NamedImage::new(stem(p), load_png(p)?))).collect()
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut file_cfg = CliConfig::load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        file_cfg.seed = s;
    }
    if let Some(r) = a.repeats {
        file_cfg.repeats = r;
    }
    if let Some(s) = &a.schemes {
        file_cfg.schemes = s.split(',').map(|x| x.trim().to_string()).collect();
    }
    if a.calibrate {
        file_cfg.calibrate = true;
    }
    let cfg = file_cfg.experiment()?;
    let images = load_images(&a)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let kind = a.kind.name();

    let (records, thresholds) = match a.kind {
        ExperimentKind::Manipulation => {
            let records = run_manipulation_experiment(&cfg, &images)?;
            let t = iwt_thresholds(&records);
            (records, t)
        }
        ExperimentKind::Compression => {
            let thresholds: BTreeMap<String, f64> = match &a.thresholds {
                Some(p) => {
                    let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                    iwt_thresholds(&read_csv(f)?)
                }
                None => {
                    let mut iwt_cfg = cfg.clone();
                    iwt_cfg.schemes = vec![Scheme::Iwt];
                    iwt_thresholds(&run_manipulation_experiment(&iwt_cfg, &images)?)
                }
            };
            (run_compression_experiment(&cfg, &images, &thresholds)?, thresholds)
        }
    };

    let csv_path = a.out_dir.join(format!("{kind}.csv"));
    write_text(&csv_path, &csv_string(&records)?)?;
    write_text(&a.out_dir.join(format!("{kind}.effective-config.toml")), &file_cfg.to_toml())?;
    if !a.no_charts {
        for img in &images {
            write_charts(a.kind, &a.out_dir, &img.name, &records, thresholds.get(&img.name).copied(), cfg.n_elements)?;
        }
    }
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} cells failed; see the status column", records.len());
    }
    println!("{} ({} records)", csv_path.display(), records.len());
    Ok(())
}

fn write_charts(
    kind: ExperimentKind,
    dir: &Path,
    image: &str,
    records: &[ExperimentRecord],
    threshold: Option<f64>,
    n_elements: usize,
) -> Result<()> {
    let x_label = match kind {
        ExperimentKind::Manipulation => "manipulated elements (%)",
        ExperimentKind::Compression => "retained storage (%)",
    };
    let x_of = |r: &ExperimentRecord| match kind {
        ExperimentKind::Manipulation => 100.0 * r.level_or_k / n_elements as f64,
        ExperimentKind::Compression => 100.0 * r.level_or_k,
    };
    let name = kind.name();
    let psnr = series_by_scheme(records, image, |r| (x_of(r), r.psnr_db));
    let psnr_marker = Marker { y: 36.0, label: "36 dB".into() };
    let svg = line_chart(&format!("{image}: {name} PSNR"), x_label, "PSNR (dB)", &psnr, Some(&psnr_marker));
    write_text(&dir.join(format!("{name}_{image}_psnr.svg")), &svg)?;

    let ham = series_by_scheme(records, image, |r| (x_of(r), r.hamming_mean));
    let marker = threshold.map(|y| Marker { y, label: "IWT min".into() });
    let svg = line_chart(&format!("{image}: {name} hash distance"), x_label, "Hamming distance", &ham, marker.as_ref());
    write_text(&dir.join(format!("{name}_{image}_hamming.svg")), &svg)?;
    Ok(())
}

fn cmd_fetch(a: FetchArgs) -> Result<()> {
    let done = fetch::fetch(&FetchOptions {
        out_dir: a.out_dir,
        mirrors: a.mirror,
        offline: a.offline,
        accept_unpinned: a.accept_unpinned,
        only: a.only,
    })?;
    for (name, digest) in done {
        println!("{name} {digest}");
    }
    Ok(())
}
