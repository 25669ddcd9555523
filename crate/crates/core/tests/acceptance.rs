//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria that reproduce published measurements are reported, not asserted.
//! The process exits non-zero only when an implementation invariant (exact
//! round trips, QIM identity, IWT reconstruction, determinism, full-basis KLT)
//! breaks on data that is present.

// Negated comparisons are deliberate: a NaN PSNR must count as failing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use hashmark::compression::klt_reconstruct_plane;
use hashmark::embedding::{embed, extract, qim_embed, qim_extract, EmbedderConfig, Scheme};
use hashmark::experiments::{
    csv_string, iwt_thresholds, original_message, run_compression_experiment, run_manipulation_experiment, spearman,
    ExperimentConfig, ExperimentRecord, NamedImage,
};
use hashmark::imagecore::{decode_png, encode_png, load_png, split_channels, RasterImage};
use hashmark::perceptual::psnr;
use hashmark::transforms::{iwt_forward, iwt_inverse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IMAGES: [&str; 3] = ["lenna", "baboon", "peppers"];

struct Report {
    hard_failures: Vec<String>,
}

impl Report {
    fn line(&self, n: usize, title: &str, pass: bool, detail: &str) {
        println!("criterion {n:>2} {}: {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn hard(&mut self, what: String) {
        eprintln!("invariant broken: {what}");
        self.hard_failures.push(what);
    }
}

fn load_images() -> (Vec<NamedImage>, Vec<&'static str>) {
    let dir = std::env::var_os("HASHMARK_TESTIMAGES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testimages"));
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for name in IMAGES {
        match load_png(dir.join(format!("{name}.png"))) {
            Ok(img) => found.push(NamedImage::new(name, img)),
            Err(_) => missing.push(name),
        }
    }
    (found, missing)
}

fn get<'a>(images: &'a [NamedImage], name: &str) -> Option<&'a RasterImage> {
    images.iter().find(|i| i.name == name).map(|i| &i.image)
}

fn unavailable(missing: &[&str]) -> String {
    if missing.is_empty() {
        String::new()
    } else {
        format!("; image unavailable: {}", missing.join(", "))
    }
}

fn param_f64(r: &ExperimentRecord, key: &str) -> f64 {
    r.param_value(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn criterion_1(rep: &Report, cfg: &ExperimentConfig, images: &[NamedImage]) {
    let targets = [
        (Scheme::DctQim, "peppers", 35.92),
        (Scheme::DwtQim, "baboon", 35.84),
        (Scheme::Iwt, "lenna", 35.68),
        (Scheme::QrLsb, "peppers", 35.80),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (scheme, name, target) in targets {
        let Some(img) = get(images, name) else {
            pass = false;
            parts.push(format!("{scheme}/{name} image unavailable"));
            continue;
        };
        let msg = original_message(cfg, name).unwrap();
        let db = embed(img, &msg, &EmbedderConfig::new(scheme)).and_then(|out| psnr(img, &out));
        match db {
            Ok(db) => {
                let ok = (db - target).abs() <= 1.0;
                pass &= ok;
                parts.push(format!("{scheme}/{name} {db:.2} dB (ref {target}, {})", if ok { "ok" } else { "off" }));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{scheme}/{name} error {e}"));
            }
        }
    }
    rep.line(1, "embedding PSNR within 1 dB of reference", pass, &parts.join("; "));
}

fn criterion_2(rep: &mut Report, cfg: &ExperimentConfig, images: &[NamedImage], missing: &[&str]) {
    let mut ok = 0;
    let mut total = 0;
    for img in images {
        let msg = original_message(cfg, &img.name).unwrap();
        for scheme in Scheme::ALL {
            total += 1;
            let ecfg = EmbedderConfig::new(scheme);
            let good = embed(&img.image, &msg, &ecfg)
                .and_then(|out| decode_png(&encode_png(&out)?))
                .and_then(|back| extract(&back, &ecfg))
                .is_ok_and(|m| m == msg);
            if good {
                ok += 1;
            } else {
                rep.hard(format!("round trip {scheme}/{}", img.name));
            }
        }
    }
    let pass = ok == total && missing.is_empty();
    rep.line(2, "round trip through PNG", pass, &format!("{ok}/{total} bit-exact{}", unavailable(missing)));
}

fn criterion_3(rep: &mut Report) {
    let mut checked = 0usize;
    let mut failures = 0usize;
    let mut max_ratio: f64 = 0.0;
    for q in 10..=80 {
        let q = f64::from(q);
        let steps = (2000.0 / 0.37) as usize;
        for i in 0..=steps {
            let x = -1000.0 + i as f64 * 0.37;
            for bit in [false, true] {
                checked += 1;
                let y = qim_embed(x, bit, q).unwrap();
                max_ratio = max_ratio.max((y - x).abs() / q);
                if qim_extract(y, q).unwrap() != bit || (y - x).abs() >= q {
                    failures += 1;
                }
            }
        }
    }
    if failures > 0 {
        rep.hard(format!("{failures} QIM grid failures"));
    }
    rep.line(
        3,
        "QIM identity and displacement",
        failures == 0,
        &format!("{checked} cases, {failures} failures, max |x'-x|/q = {max_ratio:.3}"),
    );
}

fn criterion_4(rep: &mut Report, images: &[NamedImage], missing: &[&str]) {
    let mut bad = 0;
    for img in images {
        for ch in split_channels(&img.image) {
            if iwt_inverse(&iwt_forward(&ch).unwrap()).unwrap() != ch {
                bad += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut random_bad = 0;
    for _ in 0..1000 {
        let (w, h) = (2 * rng.random_range(1..=32usize), 2 * rng.random_range(1..=32usize));
        let data: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
        let img = RasterImage::from_interleaved(w, h, 3, &data).unwrap();
        for ch in split_channels(&img) {
            if iwt_inverse(&iwt_forward(&ch).unwrap()).unwrap() != ch {
                random_bad += 1;
            }
        }
    }
    if bad + random_bad > 0 {
        rep.hard(format!("IWT reconstruction failed on {bad} test-image and {random_bad} random channels"));
    }
    let pass = bad + random_bad == 0 && missing.is_empty();
    rep.line(
        4,
        "IWT perfect reconstruction",
        pass,
        &format!(
            "{} test images exact, 1000 random even-size images exact: {}{}",
            images.len(),
            random_bad == 0,
            unavailable(missing)
        ),
    );
}

fn iwt_curve(records: &[ExperimentRecord], image: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.image == image && r.scheme == "iwt" && r.level_or_k > 0.0 && r.is_ok())
        .map(|r| (param_f64(r, "fraction"), r.hamming_mean))
        .collect()
}

fn criterion_5(rep: &Report, manip: &[ExperimentRecord], missing: &[&str]) {
    let mut pass = missing.is_empty();
    let mut parts = Vec::new();
    let mut maxima = BTreeMap::new();
    for name in IMAGES.iter().filter(|n| !missing.contains(n)) {
        let curve = iwt_curve(manip, name);
        let (xs, ys): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
        let rho = spearman(&xs, &ys);
        let max = ys.iter().copied().fold(0.0, f64::max);
        let ok = rho >= 0.8 && (0.03..=0.09).contains(&max);
        pass &= ok;
        maxima.insert(*name, max);
        parts.push(format!("{name} rho={rho:.3} max={max:.4}"));
    }
    match (maxima.get("baboon"), maxima.get("lenna")) {
        (Some(b), Some(l)) => {
            pass &= b > l;
            parts.push(format!("baboon>lenna: {}", b > l));
        }
        _ => pass = false,
    }
    rep.line(5, "IWT manipulation trend", pass, &format!("{}{}", parts.join("; "), unavailable(missing)));
}

fn criterion_6(rep: &Report, manip: &[ExperimentRecord]) {
    let cells: Vec<&ExperimentRecord> = manip
        .iter()
        .filter(|r| (r.scheme == "dct-qim" || r.scheme == "dwt-qim") && r.level_or_k > 0.0 && r.is_ok())
        .collect();
    let worst = cells.iter().max_by(|a, b| a.psnr_std.total_cmp(&b.psnr_std));
    let over = cells.iter().filter(|r| r.psnr_std >= 0.05).count();
    let source_std = cells.iter().map(|r| param_f64(r, "psnr_vs_source_std")).fold(0.0, f64::max);
    let detail = match worst {
        Some(w) => format!(
            "{over}/{} cells with psnr_std >= 0.05 dB, worst {:.3} dB ({}/{} k={}); against the source image the worst std is {source_std:.4} dB",
            cells.len(),
            w.psnr_std,
            w.scheme,
            w.image,
            w.level_or_k
        ),
        None => "no cells".into(),
    };
    rep.line(6, "frequency-scheme PSNR spread", !cells.is_empty() && over == 0, &detail);
}

fn criterion_7(rep: &Report, comp: &[ExperimentRecord], missing: &[&str]) {
    let mut pass = true;
    let mut parts = Vec::new();
    if missing.contains(&"baboon") {
        pass = false;
    } else {
        let above: Vec<String> = comp
            .iter()
            .filter(|r| r.image == "baboon" && !(r.psnr_db < 30.0))
            .map(|r| format!("{}@{:.3}={:.2}", r.scheme, r.level_or_k, r.psnr_db))
            .collect();
        pass &= above.is_empty();
        parts.push(if above.is_empty() {
            "baboon all < 30 dB".to_string()
        } else {
            format!("baboon >= 30 dB at {}", above.join(", "))
        });
    }
    for name in ["lenna", "peppers"] {
        if missing.contains(&name) {
            pass = false;
            continue;
        }
        let low: Vec<String> = comp
            .iter()
            .filter(|r| r.image == name && (r.scheme == "dct" || r.scheme == "klt") && r.level_or_k >= 0.2)
            .filter(|r| !(r.psnr_db > 30.0))
            .map(|r| format!("{}@{:.3}={:.2}", r.scheme, r.level_or_k, r.psnr_db))
            .collect();
        pass &= low.is_empty();
        parts.push(if low.is_empty() {
            format!("{name} dct/klt > 30 dB at levels >= 20%")
        } else {
            format!("{name} <= 30 dB at {}", low.join(", "))
        });
    }
    rep.line(7, "compression PSNR bands", pass, &format!("{}{}", parts.join("; "), unavailable(missing)));
}

fn criterion_8(rep: &Report, comp: &[ExperimentRecord], thresholds: &BTreeMap<String, f64>, missing: &[&str]) {
    let mut pass = true;
    let mut parts = Vec::new();
    match thresholds.get("baboon") {
        Some(&t) => {
            let klt: Vec<&ExperimentRecord> =
                comp.iter().filter(|r| r.image == "baboon" && r.scheme == "klt").collect();
            let worst = klt.iter().map(|r| r.hamming_mean).fold(0.0, f64::max);
            let ok = !klt.is_empty() && klt.iter().all(|r| r.hamming_mean < t);
            pass &= ok;
            parts.push(format!("baboon threshold {t:.4}, max klt hamming {worst:.4} (separable: {ok})"));
        }
        None => {
            pass = false;
            parts.push("baboon has no IWT threshold".into());
        }
    }
    match thresholds.get("peppers") {
        Some(&t) => {
            let exceed = comp
                .iter()
                .filter(|r| r.image == "peppers" && (0.1 - 1e-9..=0.7 + 0.01).contains(&r.level_or_k))
                .any(|r| r.hamming_mean > t);
            pass &= exceed;
            parts.push(format!("peppers threshold {t:.4}, some compressor exceeds it: {exceed}"));
        }
        None => pass = false,
    }
    rep.line(8, "compression vs manipulation separability", pass, &format!("{}{}", parts.join("; "), unavailable(missing)));
}

fn criterion_9(rep: &mut Report, cfg: &ExperimentConfig, images: &[NamedImage], first: (&str, &str)) {
    let thresholds = {
        let iwt_only = ExperimentConfig { schemes: vec![Scheme::Iwt], ..cfg.clone() };
        iwt_thresholds(&run_manipulation_experiment(&iwt_only, images).unwrap())
    };
    let manip = csv_string(&run_manipulation_experiment(cfg, images).unwrap()).unwrap();
    let comp = csv_string(&run_compression_experiment(cfg, images, &thresholds).unwrap()).unwrap();
    let same = (manip.as_str(), comp.as_str()) == first;
    if !same {
        rep.hard("experiment re-run changed the CSV".into());
    }
    rep.line(
        9,
        "deterministic CSV",
        same && !images.is_empty(),
        &format!("manipulation {} bytes, compression {} bytes, identical: {same}", manip.len(), comp.len()),
    );
}

fn criterion_10(rep: &mut Report, images: &[NamedImage], comp: &[ExperimentRecord]) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut planes: Vec<(String, hashmark::imagecore::Plane)> = Vec::new();
    let noise: Vec<u8> = (0..64 * 64).map(|_| rng.random()).collect();
    let noise = RasterImage::from_interleaved(64, 64, 1, &noise).unwrap();
    planes.push(("random".into(), split_channels(&noise)[0].to_plane()));
    if let Some(l) = get(images, "lenna") {
        planes.extend(split_channels(l).iter().enumerate().map(|(c, ch)| (format!("lenna/{c}"), ch.to_plane())));
    }
    let mut worst: f64 = 0.0;
    for (_, p) in &planes {
        let r = klt_reconstruct_plane(p, 64).unwrap();
        worst = p.data.iter().zip(&r.data).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    let exact = worst < 1e-6;
    if !exact {
        rep.hard(format!("full-basis KLT error {worst:e}"));
    }
    let mut parts = vec![format!("full-basis max error {worst:.2e} over {} planes", planes.len())];
    let mut pass = exact;
    if get(images, "lenna").is_some() {
        let by = |alg: &str| -> BTreeMap<String, f64> {
            comp.iter()
                .filter(|r| r.image == "lenna" && r.scheme == alg)
                .map(|r| (format!("{:.6}", r.level_or_k), r.psnr_db))
                .collect()
        };
        let (dct, klt) = (by("dct"), by("klt"));
        let mut losses = Vec::new();
        for (level, d) in &dct {
            match klt.get(level) {
                Some(k) if k >= d => {}
                Some(k) => losses.push(format!("{level}: klt {k:.2} < dct {d:.2}")),
                None => losses.push(format!("{level}: no klt cell")),
            }
        }
        pass &= losses.is_empty() && !dct.is_empty();
        parts.push(if losses.is_empty() {
            format!("lenna klt >= dct at all {} matched levels", dct.len())
        } else {
            losses.join(", ")
        });
    } else {
        pass = false;
        parts.push("image unavailable: lenna".into());
    }
    rep.line(10, "KLT sanity", pass, &parts.join("; "));
}

fn main() {
    let start = Instant::now();
    let mut rep = Report { hard_failures: Vec::new() };
    let (images, missing) = load_images();
    let cfg = ExperimentConfig::default();

    criterion_1(&rep, &cfg, &images);
    criterion_2(&mut rep, &cfg, &images, &missing);
    criterion_3(&mut rep);
    criterion_4(&mut rep, &images, &missing);

    let manip = run_manipulation_experiment(&cfg, &images).unwrap();
    let thresholds = iwt_thresholds(&manip);
    let comp = run_compression_experiment(&cfg, &images, &thresholds).unwrap();
    criterion_5(&rep, &manip, &missing);
    criterion_6(&rep, &manip);
    criterion_7(&rep, &comp, &missing);
    criterion_8(&rep, &comp, &thresholds, &missing);
    let first = (csv_string(&manip).unwrap(), csv_string(&comp).unwrap());
    criterion_9(&mut rep, &cfg, &images, (&first.0, &first.1));
    criterion_10(&mut rep, &images, &comp);

    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if !rep.hard_failures.is_empty() {
        std::process::exit(1);
    }
}
