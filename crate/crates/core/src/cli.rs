//! Command-line front end. Every command writes a `config.json` echo of its
//! effective parameters next to its outputs; all files are written atomically.
//!
//! Exit codes: 0 success, 1 user or data error, 2 internal error.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    correlation_matrix, crop_border, distort, register_translation, scatter_export, Distortion,
    MetricReport,
};
use crate::distdist::{
    baseline_delta, fid_timed, kid_subsampled, DistConfig, DistMetric, KidConfig, Precision,
};
use crate::error::{Error, Result};
use crate::features::{load_activations, toy_extract, write_activations, Dtype, MultiLayerSet};
use crate::fsutil;
use crate::fullref::{self, cw_ssim, fsim, ssim, CwSsimParams, FsimParams, SsimParams};
use crate::imagecore::{read_image, sidecar_path, write_image, BitDepth, Image};
use crate::preprocess::{run_pipeline, write_patches, PatchManifest, PipelineConfig};

pub const CONFIG_ECHO: &str = "config.json";

#[derive(Debug, Parser)]
#[command(
    name = "i2ieval",
    version,
    about = "Evaluate unpaired image-to-image translation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment, orient, pad and split source images into equalised patches.
    Preprocess(PreprocessArgs),
    /// Full-reference content metrics between filename-matched image pairs.
    EvalFullref(FullrefArgs),
    /// FID and KID between activation sets, optionally against a source baseline.
    EvalDist(DistArgs),
    /// Integer-shift registration of moving images onto fixed images.
    Register(RegisterArgs),
    /// Spearman correlation matrix of a metric report.
    Correlate(CorrelateArgs),
    /// Apply a synthetic distortion to every image in a directory.
    Distort(DistortArgs),
    /// Deterministic toy activations for a directory of images.
    ExtractToy(ExtractToyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 246)]
    pub step: usize,
    #[arg(long, default_value_t = 0.99)]
    pub nonzero_frac: f64,
    #[arg(long, default_value_t = 2224)]
    pub canvas: usize,
    /// Skip Otsu background removal.
    #[arg(long)]
    pub no_segment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FullrefMetric {
    Mse,
    Psnr,
    Ssim,
    Cwssim,
    Fsim,
    Dists,
}

impl FullrefMetric {
    fn name(self) -> &'static str {
        match self {
            FullrefMetric::Mse => "mse",
            FullrefMetric::Psnr => "psnr",
            FullrefMetric::Ssim => "ssim",
            FullrefMetric::Cwssim => "cwssim",
            FullrefMetric::Fsim => "fsim",
            FullrefMetric::Dists => "dists",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FullrefArgs {
    /// Directory of unadapted source images.
    #[arg(long)]
    pub source: PathBuf,
    /// Directory of adapted images, paired with the source by filename.
    #[arg(long)]
    pub adapted: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "mse,psnr,ssim,cwssim,fsim"
    )]
    pub metrics: Vec<FullrefMetric>,
    /// CSV with `source,adapted` filename columns, replacing filename pairing.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Evaluate the matched pairs even when some files have no partner.
    #[arg(long)]
    pub allow_partial: bool,
    /// Multi-layer activation directory for the source images (needed for dists).
    #[arg(long)]
    pub source_layers: Option<PathBuf>,
    /// Multi-layer activation directory for the adapted images (needed for dists).
    #[arg(long)]
    pub adapted_layers: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistChoice {
    Fid,
    Kid,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::Single,
            PrecisionArg::F64 => Precision::Double,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DistArgs {
    #[arg(long)]
    pub adapted_acts: PathBuf,
    #[arg(long)]
    pub target_acts: PathBuf,
    /// Unadapted source activations; adds a baseline and an improved flag.
    #[arg(long)]
    pub source_acts: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub metric: DistChoice,
    #[arg(long, default_value_t = 50)]
    pub subsets: usize,
    #[arg(long, default_value_t = 100)]
    pub subset_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: PrecisionArg,
}

#[derive(Debug, Args, Serialize)]
pub struct RegisterArgs {
    #[arg(long)]
    pub fixed: PathBuf,
    /// Images to align, paired with `--fixed` by filename.
    #[arg(long)]
    pub moving: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub max_shift: usize,
    /// Border removed before the before/after SSIM comparison.
    #[arg(long, default_value_t = 5)]
    pub crop: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    /// Metric report (CSV or JSON) from eval-fullref.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Metric pairs `m1:m2` to export as scatter CSVs.
    #[arg(long)]
    pub scatter: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortKind {
    Shift,
    Blur,
    Contrast,
}

#[derive(Debug, Args, Serialize)]
pub struct DistortArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub kind: DistortKind,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub dx: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub dy: i64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractToyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output NPY file of shape (n, dim).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match std::panic::catch_unwind(|| execute(&cli.command)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(_) => {
            eprintln!("internal error: the command panicked");
            2
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::EvalFullref(a) => cmd_eval_fullref(a),
        Command::EvalDist(a) => cmd_eval_dist(a),
        Command::Register(a) => cmd_register(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Distort(a) => cmd_distort(a),
        Command::ExtractToy(a) => cmd_extract_toy(a),
    }
}

fn write_config_echo<A: Serialize>(
    path: &Path,
    command: &str,
    args: &A,
    extra: Value,
) -> Result<()> {
    let echo = json!({
        "tool": "i2ieval",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "effective": extra,
    });
    fsutil::atomic_write_json(path, &echo)
}

/// PNG files in `dir`, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Read {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| Error::Read {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_with_sidecar(path: &Path) -> Result<Image> {
    let side = sidecar_path(path);
    read_image(path, side.is_file().then_some(side.as_path()))
}

fn cmd_preprocess(a: &PreprocessArgs) -> Result<()> {
    let cfg = PipelineConfig {
        patch_size: a.patch_size,
        step: a.step,
        nonzero_frac: a.nonzero_frac,
        canvas: a.canvas,
        segment: !a.no_segment,
    };
    cfg.validate()?;
    let inputs = list_pngs(&a.input)?;
    if inputs.is_empty() {
        return Err(Error::input(format!(
            "no input images in {}",
            a.input.display()
        )));
    }
    let results: Vec<(Image, _)> = inputs
        .par_iter()
        .map(|p| {
            let img = read_with_sidecar(p)?;
            let out = run_pipeline(&img, &cfg)?;
            Ok((img, out))
        })
        .collect::<Result<_>>()?;
    let mut ids = BTreeSet::new();
    for (img, _) in &results {
        if !ids.insert(img.meta.source_id.clone()) {
            return Err(Error::input(format!(
                "duplicate source id {}",
                img.meta.source_id
            )));
        }
    }
    let patch_dir = a.out.join("patches");
    fsutil::create_dir_all(&patch_dir)?;
    let mut manifest = PatchManifest::new(cfg);
    for (img, out) in &results {
        write_patches(&patch_dir, img, out, &mut manifest)?;
    }
    fsutil::atomic_write_json(&a.out.join("manifest.json"), &manifest)?;
    write_config_echo(
        &a.out.join(CONFIG_ECHO),
        "preprocess",
        a,
        json!({ "pipeline": cfg }),
    )
}

/// A source/adapted file pair with its report id.
#[derive(Debug, Clone)]
struct Pair {
    id: String,
    source: PathBuf,
    adapted: PathBuf,
}

fn pair_by_name(a: &FullrefArgs) -> Result<Vec<Pair>> {
    let src: BTreeMap<String, PathBuf> = list_pngs(&a.source)?
        .into_iter()
        .map(|p| (file_name(&p), p))
        .collect();
    let adp: BTreeMap<String, PathBuf> = list_pngs(&a.adapted)?
        .into_iter()
        .map(|p| (file_name(&p), p))
        .collect();
    let unmatched: Vec<String> = src
        .keys()
        .filter(|k| !adp.contains_key(*k))
        .map(|k| format!("source/{k}"))
        .chain(
            adp.keys()
                .filter(|k| !src.contains_key(*k))
                .map(|k| format!("adapted/{k}")),
        )
        .collect();
    if !unmatched.is_empty() {
        if a.allow_partial {
            eprintln!(
                "warning: skipping unmatched files: {}",
                unmatched.join(", ")
            );
        } else {
            return Err(Error::input(format!(
                "unmatched files (use --allow-partial to skip): {}",
                unmatched.join(", ")
            )));
        }
    }
    Ok(src
        .into_iter()
        .filter_map(|(name, s)| {
            adp.get(&name).map(|d| Pair {
                id: file_stem(&s),
                source: s,
                adapted: d.clone(),
            })
        })
        .collect())
}

fn pairs_from_csv(a: &FullrefArgs, csv_path: &Path) -> Result<Vec<Pair>> {
    let mut rdr = csv::Reader::from_path(csv_path)
        .map_err(|e| Error::input(format!("{}: {e}", csv_path.display())))?;
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::input(format!("{}: {e}", csv_path.display())))?;
        let (s, d) = match (rec.get(0), rec.get(1)) {
            (Some(s), Some(d)) => (s.trim(), d.trim()),
            _ => {
                return Err(Error::input(format!(
                    "{}: each row needs source,adapted",
                    csv_path.display()
                )))
            }
        };
        let (sp, dp) = (a.source.join(s), a.adapted.join(d));
        if !sp.is_file() || !dp.is_file() {
            missing.push(format!("{s},{d}"));
            continue;
        }
        pairs.push(Pair {
            id: file_stem(&sp),
            source: sp,
            adapted: dp,
        });
    }
    if !missing.is_empty() && !a.allow_partial {
        return Err(Error::input(format!(
            "pairs with missing files: {}",
            missing.join("; ")
        )));
    }
    Ok(pairs)
}

fn load_layers(path: &Option<PathBuf>, flag: &str) -> Result<MultiLayerSet> {
    let dir = path.as_ref().ok_or_else(|| {
        Error::input(format!(
            "dists needs multi-layer activations: pass {flag} with a directory exported by the extractor's vgg-multilayer step"
        ))
    })?;
    MultiLayerSet::load(dir)
}

fn cmd_eval_fullref(a: &FullrefArgs) -> Result<()> {
    let metrics: Vec<FullrefMetric> = {
        let mut seen = BTreeSet::new();
        a.metrics
            .iter()
            .copied()
            .filter(|m| seen.insert(*m))
            .collect()
    };
    if metrics.is_empty() {
        return Err(Error::param("no metrics requested"));
    }
    let wants_dists = metrics.contains(&FullrefMetric::Dists);
    let layers = if wants_dists {
        Some((
            load_layers(&a.source_layers, "--source-layers")?,
            load_layers(&a.adapted_layers, "--adapted-layers")?,
        ))
    } else {
        None
    };
    let mut pairs = match &a.pairs {
        Some(p) => pairs_from_csv(a, p)?,
        None => pair_by_name(a)?,
    };
    pairs.sort_by(|x, y| x.id.cmp(&y.id));
    if let Some(w) = pairs.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::input(format!("duplicate pair id {}", w[0].id)));
    }
    if pairs.is_empty() {
        return Err(Error::input("no image pairs to evaluate"));
    }

    let ssim_p = SsimParams::default();
    let cw_p = CwSsimParams::default();
    let fsim_p = FsimParams::default();
    let rows: Vec<(String, Vec<f64>)> = pairs
        .par_iter()
        .map(|pair| {
            let s = read_image(&pair.source, None)?;
            let d = read_image(&pair.adapted, None)?;
            let mut values = Vec::with_capacity(metrics.len());
            for m in &metrics {
                let v = match m {
                    FullrefMetric::Mse => fullref::mse(&s, &d)?,
                    FullrefMetric::Psnr => fullref::psnr(&s, &d, 1.0)?,
                    FullrefMetric::Ssim => ssim(&s, &d, &ssim_p)?,
                    FullrefMetric::Cwssim => cw_ssim(&s, &d, &cw_p)?,
                    FullrefMetric::Fsim => fsim(&s, &d, &fsim_p)?,
                    FullrefMetric::Dists => {
                        let (ls, la) = layers.as_ref().expect("loaded above");
                        let (sn, an) = (file_name(&pair.source), file_name(&pair.adapted));
                        let i = ls.position(&sn).ok_or_else(|| {
                            Error::input(format!(
                                "{sn} is not listed in the source activation manifest"
                            ))
                        })?;
                        let j = la.position(&an).ok_or_else(|| {
                            Error::input(format!(
                                "{an} is not listed in the adapted activation manifest"
                            ))
                        })?;
                        crate::features::dists(&ls.image(i), &la.image(j))?
                    }
                };
                values.push(v);
            }
            Ok((pair.id.clone(), values))
        })
        .collect::<Result<_>>()?;

    let mut report = MetricReport::new(metrics.iter().map(|m| m.name()));
    for (id, values) in rows {
        report.push_row(id, values)?;
    }
    report.sort_rows();
    report.params.insert("psnr.data_range".into(), json!(1.0));
    report.params.insert("ssim".into(), json!(ssim_p));
    report.params.insert("cwssim".into(), json!(cw_p));
    report.params.insert("fsim".into(), json!(fsim_p));
    if let Some((ls, la)) = &layers {
        report.params.insert(
            "dists".into(),
            json!({ "c1": crate::features::DISTS_C1, "c2": crate::features::DISTS_C2 }),
        );
        report
            .provenance
            .insert("dists.source_extractor".into(), ls.extractor_id.clone());
        report
            .provenance
            .insert("dists.adapted_extractor".into(), la.extractor_id.clone());
    }
    report.provenance.insert(
        "pairing".into(),
        if a.pairs.is_some() {
            "pairs-csv"
        } else {
            "filename"
        }
        .into(),
    );

    fsutil::create_dir_all(&a.out)?;
    report.write_csv(&a.out.join("report.csv"))?;
    report.write_json(&a.out.join("report.json"))?;
    write_config_echo(
        &a.out.join(CONFIG_ECHO),
        "eval-fullref",
        &FullrefArgs {
            metrics: metrics.clone(),
            ..a.clone()
        },
        json!({ "pairs": report.rows.len(), "params": report.params }),
    )
}

fn cmd_eval_dist(a: &DistArgs) -> Result<()> {
    let kid_cfg = KidConfig {
        subsets: a.subsets,
        subset_size: a.subset_size,
        seed: a.seed,
    };
    kid_cfg.validate()?;
    let precision: Precision = a.precision.into();
    let adapted = load_activations(&a.adapted_acts)?;
    let target = load_activations(&a.target_acts)?;
    let source = a.source_acts.as_deref().map(load_activations).transpose()?;
    let cfg = DistConfig {
        precision,
        kid: kid_cfg,
    };
    let want_fid = matches!(a.metric, DistChoice::Fid | DistChoice::Both);
    let want_kid = matches!(a.metric, DistChoice::Kid | DistChoice::Both);

    let mut results = serde_json::Map::new();
    let mut timing = serde_json::Map::new();
    let mut sets = json!({
        "adapted": { "n": adapted.n(), "d": adapted.d(), "extractor_id": adapted.extractor_id },
        "target": { "n": target.n(), "d": target.d(), "extractor_id": target.extractor_id },
    });
    if let Some(s) = &source {
        sets["source"] = json!({ "n": s.n(), "d": s.d(), "extractor_id": s.extractor_id });
    }
    results.insert("sets".into(), sets);
    results.insert("precision".into(), json!(precision.label()));

    if want_fid {
        let t = fid_timed(&adapted, &target, precision)?;
        timing.insert("fid_adapted_seconds".into(), json!(t.seconds));
        let mut entry = json!({ "adapted": t.value });
        if let Some(s) = &source {
            let b = fid_timed(s, &target, precision)?;
            timing.insert("fid_baseline_seconds".into(), json!(b.seconds));
            entry["baseline"] = json!(b.value);
            entry["improved"] = json!(t.value < b.value);
        }
        results.insert("fid".into(), entry);
    }
    if want_kid {
        let mut entry = match &source {
            Some(s) => {
                let d = baseline_delta(s, &adapted, &target, DistMetric::Kid, &cfg)?;
                json!({
                    "adapted": d.adapted_kid,
                    "baseline": d.baseline_kid,
                    "improved": d.improved,
                })
            }
            None => json!({ "adapted": kid_subsampled(&adapted, &target, &kid_cfg)? }),
        };
        entry["config"] = json!(kid_cfg);
        entry["sampling"] = json!("each set sampled independently without replacement per subset");
        results.insert("kid".into(), entry);
    }

    fsutil::create_dir_all(&a.out)?;
    fsutil::atomic_write_json(&a.out.join("results.json"), &Value::Object(results))?;
    timing.insert("precision".into(), json!(precision.label()));
    fsutil::atomic_write_json(&a.out.join("timing.json"), &Value::Object(timing))?;
    write_config_echo(
        &a.out.join(CONFIG_ECHO),
        "eval-dist",
        a,
        json!({ "kid": kid_cfg, "precision": precision.label() }),
    )
}

fn cmd_register(a: &RegisterArgs) -> Result<()> {
    let fixed: BTreeMap<String, PathBuf> = list_pngs(&a.fixed)?
        .into_iter()
        .map(|p| (file_name(&p), p))
        .collect();
    let moving = list_pngs(&a.moving)?;
    let pairs: Vec<(String, PathBuf, PathBuf)> = moving
        .into_iter()
        .map(|m| {
            let name = file_name(&m);
            let f = fixed.get(&name).cloned().ok_or_else(|| {
                Error::input(format!(
                    "{name} has no fixed image in {}",
                    a.fixed.display()
                ))
            })?;
            Ok((name, f, m))
        })
        .collect::<Result<_>>()?;
    if pairs.is_empty() {
        return Err(Error::input(format!(
            "no moving images in {}",
            a.moving.display()
        )));
    }
    let ssim_p = SsimParams::default();
    let reg_dir = a.out.join("registered");
    fsutil::create_dir_all(&reg_dir)?;
    let records: Vec<Value> = pairs
        .par_iter()
        .map(|(name, f, m)| {
            let fixed = read_image(f, None)?;
            let moving = read_image(m, None)?;
            let (shift, registered) = register_translation(&moving, &fixed, a.max_shift)?;
            let before = ssim(&fixed, &moving, &ssim_p)?;
            let fc = crop_border(&fixed, a.crop)?;
            let after = ssim(&fc, &crop_border(&registered, a.crop)?, &ssim_p)?;
            write_image(&registered, &reg_dir.join(name), BitDepth::Sixteen)?;
            Ok(json!({
                "file": name,
                "dx": shift.dx,
                "dy": shift.dy,
                "ssim_before": before,
                "ssim_after_cropped": after,
            }))
        })
        .collect::<Result<_>>()?;
    fsutil::atomic_write_json(
        &a.out.join("shifts.json"),
        &json!({ "max_shift": a.max_shift, "crop": a.crop, "pairs": records }),
    )?;
    write_config_echo(
        &a.out.join(CONFIG_ECHO),
        "register",
        a,
        json!({ "ssim": ssim_p }),
    )
}

fn cmd_correlate(a: &CorrelateArgs) -> Result<()> {
    let report = MetricReport::load(&a.report)?;
    let scatter: Vec<(String, String)> = a
        .scatter
        .iter()
        .map(|s| {
            s.split_once(':')
                .map(|(x, y)| (x.to_string(), y.to_string()))
                .ok_or_else(|| Error::param(format!("scatter pair {s:?} must look like m1:m2")))
        })
        .collect::<Result<_>>()?;
    let matrix = correlation_matrix(&report)?;
    fsutil::create_dir_all(&a.out)?;
    matrix.write_csv(&a.out.join("correlation.csv"))?;
    for (x, y) in &scatter {
        scatter_export(&report, x, y, &a.out.join(format!("scatter_{x}_{y}.csv")))?;
    }
    write_config_echo(
        &a.out.join(CONFIG_ECHO),
        "correlate",
        a,
        json!({ "method": "spearman, average ranks", "dropped_rows": matrix.dropped_rows, "metrics": matrix.metrics }),
    )
}

fn cmd_distort(a: &DistortArgs) -> Result<()> {
    let kind = match a.kind {
        DistortKind::Shift => Distortion::Shift { dx: a.dx, dy: a.dy },
        DistortKind::Blur => Distortion::Blur { sigma: a.sigma },
        DistortKind::Contrast => Distortion::Contrast { gamma: a.gamma },
    };
    let inputs = list_pngs(&a.input)?;
    if inputs.is_empty() {
        return Err(Error::input(format!(
            "no input images in {}",
            a.input.display()
        )));
    }
    fsutil::create_dir_all(&a.out)?;
    let files: Vec<String> = inputs
        .par_iter()
        .map(|p| {
            let img = read_image(p, None)?;
            let out = distort(&img, &kind)?;
            let name = file_name(p);
            write_image(&out, &a.out.join(&name), BitDepth::Sixteen)?;
            Ok(name)
        })
        .collect::<Result<_>>()?;
    fsutil::atomic_write_json(
        &a.out.join("distortions.json"),
        &json!({ "distortion": kind, "files": files }),
    )?;
    write_config_echo(
        &a.out.join(CONFIG_ECHO),
        "distort",
        a,
        json!({ "distortion": kind }),
    )
}

fn cmd_extract_toy(a: &ExtractToyArgs) -> Result<()> {
    let inputs = list_pngs(&a.input)?;
    if inputs.is_empty() {
        return Err(Error::input(format!(
            "no input images in {}",
            a.input.display()
        )));
    }
    let images: Vec<Image> = inputs
        .par_iter()
        .map(|p| read_image(p, None))
        .collect::<Result<_>>()?;
    let acts = toy_extract(&images, a.seed, a.dim)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fsutil::create_dir_all(parent)?;
    }
    write_activations(&a.out, &acts, Dtype::F64)?;
    let mut echo = a.out.clone().into_os_string();
    echo.push(".config.json");
    write_config_echo(
        Path::new(&echo),
        "extract-toy",
        a,
        json!({
            "extractor_id": acts.extractor_id,
            "images": inputs.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        for args in [
            vec![
                "i2ieval",
                "preprocess",
                "--input",
                "a",
                "--out",
                "b",
                "--no-segment",
            ],
            vec![
                "i2ieval",
                "eval-fullref",
                "--source",
                "a",
                "--adapted",
                "b",
                "--out",
                "c",
                "--metrics",
                "ssim,psnr",
            ],
            vec![
                "i2ieval",
                "eval-dist",
                "--adapted-acts",
                "a",
                "--target-acts",
                "b",
                "--out",
                "c",
                "--precision",
                "f32",
            ],
            vec![
                "i2ieval", "register", "--fixed", "a", "--moving", "b", "--out", "c",
            ],
            vec![
                "i2ieval",
                "correlate",
                "--report",
                "a.csv",
                "--out",
                "c",
                "--scatter",
                "ssim:psnr",
            ],
            vec![
                "i2ieval", "distort", "--input", "a", "--out", "b", "--kind", "shift", "--dx", "3",
                "--dy", "-2",
            ],
            vec!["i2ieval", "extract-toy", "--input", "a", "--out", "b.npy"],
        ] {
            Cli::try_parse_from(&args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["i2ieval", "no-such-command"]), 1);
        assert_eq!(run(["i2ieval", "preprocess", "--input", "x"]), 1);
    }

    #[test]
    fn invalid_config_fails_before_io() {
        let code = run([
            "i2ieval",
            "preprocess",
            "--input",
            "/definitely/missing",
            "--out",
            "/definitely/missing/out",
            "--step",
            "300",
        ]);
        assert_eq!(code, 1);
        assert!(!Path::new("/definitely/missing/out").exists());
    }
}
