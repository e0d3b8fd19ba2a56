//! Mammogram-to-patch pipeline.
//!
//! The stages run in a fixed order:
//! segment → invert MONOCHROME1 → flip right laterality → normalise →
//! pad to canvas → sliding-window patches → per-patch histogram equalisation.
//!
//! Intensity histograms use 256 bins centred on `k/255`.

use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::imagecore::{normalize_unit, write_image, BitDepth, Image, Laterality, Photometric};

pub const HIST_BINS: usize = 256;

#[inline]
pub(crate) fn intensity_bin(v: f64) -> usize {
    (v.clamp(0.0, 1.0) * 255.0).round() as usize
}

fn histogram(img: &Image) -> [u64; HIST_BINS] {
    let mut hist = [0u64; HIST_BINS];
    for &v in img.data() {
        hist[intensity_bin(v)] += 1;
    }
    hist
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub patch_size: usize,
    pub step: usize,
    pub nonzero_frac: f64,
    pub canvas: usize,
    /// Otsu background removal. Off for sources that arrive pre-segmented.
    pub segment: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            patch_size: 256,
            step: 246,
            nonzero_frac: 0.99,
            canvas: 2224,
            segment: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.step > self.patch_size {
            return Err(Error::param(format!(
                "step must satisfy 0 < step <= patch_size (step {}, patch_size {})",
                self.step, self.patch_size
            )));
        }
        if self.patch_size > self.canvas {
            return Err(Error::param(format!(
                "patch_size {} exceeds canvas {}",
                self.patch_size, self.canvas
            )));
        }
        if !(self.nonzero_frac > 0.0 && self.nonzero_frac <= 1.0) {
            return Err(Error::param(format!(
                "nonzero_frac must lie in (0, 1], got {}",
                self.nonzero_frac
            )));
        }
        Ok(())
    }

    /// Window origins along one axis of length `len`.
    pub fn positions(&self, len: usize) -> Vec<usize> {
        if len < self.patch_size {
            return Vec::new();
        }
        (0..=len - self.patch_size).step_by(self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: Image,
    /// (row, col) of the top-left corner in the padded source.
    pub origin: (usize, usize),
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtsuResult {
    /// Lower edge of the first foreground bin.
    pub threshold: f64,
    /// Last histogram bin assigned to the background, `None` for a single-bin image.
    pub split_bin: Option<usize>,
    /// `true` for foreground (above-threshold) pixels.
    pub mask: Vec<bool>,
}

/// Otsu's method over the 256-bin histogram.
///
/// Ties in between-class variance resolve to the floor of the mean of the
/// maximising bins. The score comparison is exact: for a split after bin `t`
/// the between-class variance is proportional to `(S0*N - S*W0)^2 / (W0*W1)`
/// with integer counts `W0, W1` and bin-index sums `S0, S`.
pub fn otsu_threshold(img: &Image) -> OtsuResult {
    let hist = histogram(img);
    let n: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(k, &h)| k as u64 * h).sum();

    let mut best: Vec<usize> = Vec::new();
    let mut best_num = BigUint::from(0u32);
    let mut best_den = BigUint::from(1u32);
    let (mut w0, mut s0) = (0u64, 0u64);
    for (t, &h) in hist.iter().enumerate().take(HIST_BINS - 1) {
        w0 += h;
        s0 += t as u64 * h;
        let w1 = n - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let d = (s0 as i128 * n as i128 - total_sum as i128 * w0 as i128).unsigned_abs();
        let num = BigUint::from(d) * BigUint::from(d);
        let den = BigUint::from(w0) * BigUint::from(w1);
        // num/den vs best_num/best_den
        let lhs = &num * &best_den;
        let rhs = &best_num * &den;
        if best.is_empty() || lhs > rhs {
            best.clear();
            best.push(t);
            best_num = num;
            best_den = den;
        } else if lhs == rhs {
            best.push(t);
        }
    }

    if best.is_empty() {
        // one occupied bin: nothing to separate
        let threshold = img.min_max().map(|(_, hi)| hi).unwrap_or(0.0);
        return OtsuResult {
            threshold,
            split_bin: None,
            mask: vec![false; img.len()],
        };
    }
    let split = best.iter().sum::<usize>() / best.len();
    let mask = img
        .data()
        .iter()
        .map(|&v| intensity_bin(v) > split)
        .collect();
    OtsuResult {
        threshold: (split as f64 + 0.5) / 255.0,
        split_bin: Some(split),
        mask,
    }
}

/// Zeroes the background found by Otsu's method.
///
/// For MONOCHROME1 sources tissue is the dark class, so the below-threshold
/// pixels are kept and the background is set to full scale; the later
/// inversion then takes it to 0.
pub fn segment_background(img: &Image) -> Image {
    let otsu = otsu_threshold(img);
    if otsu.split_bin.is_none() {
        return img.clone();
    }
    let mono1 = img.meta.photometric == Photometric::Monochrome1;
    let fill = if mono1 { 1.0 } else { 0.0 };
    let data = img
        .data()
        .iter()
        .zip(&otsu.mask)
        .map(|(&v, &above)| if above != mono1 { v } else { fill })
        .collect();
    img.with_data(data)
}

pub fn invert_monochrome1(img: &Image) -> Image {
    if img.meta.photometric != Photometric::Monochrome1 {
        return img.clone();
    }
    let mut out = img.with_data(img.data().iter().map(|&v| 1.0 - v).collect());
    out.meta.photometric = Photometric::Monochrome2;
    out
}

pub fn flip_right_laterality(img: &Image) -> Image {
    if img.meta.laterality != Laterality::Right {
        return img.clone();
    }
    let w = img.width();
    let mut data = Vec::with_capacity(img.len());
    for row in img.data().chunks_exact(w.max(1)) {
        data.extend(row.iter().rev());
    }
    let mut out = img.with_data(data);
    out.meta.laterality = Laterality::Left;
    out
}

/// Zero-pads to `canvas x canvas`, keeping the content at the top-left.
pub fn pad_to_canvas(img: &Image, cfg: &PipelineConfig) -> Result<Image> {
    let c = cfg.canvas;
    if img.width() > c || img.height() > c {
        return Err(Error::input(format!(
            "{}x{} image ({}) exceeds the {c}x{c} canvas",
            img.width(),
            img.height(),
            img.meta.source_id
        )));
    }
    if img.width() == c && img.height() == c {
        return Ok(img.clone());
    }
    let mut data = vec![0.0; c * c];
    for (r, row) in img.data().chunks_exact(img.width().max(1)).enumerate() {
        data[r * c..r * c + img.width()].copy_from_slice(row);
    }
    Ok(img.resized_with(c, c, data))
}

/// Number of window positions tried by [`extract_patches`].
pub fn candidate_count(width: usize, height: usize, cfg: &PipelineConfig) -> usize {
    cfg.positions(width).len() * cfg.positions(height).len()
}

/// Sliding-window patches that are at least `nonzero_frac` strictly positive.
pub fn extract_patches(img: &Image, cfg: &PipelineConfig) -> Vec<Patch> {
    let p = cfg.patch_size;
    let needed = p * p;
    let mut out = Vec::new();
    for row in cfg.positions(img.height()) {
        for col in cfg.positions(img.width()) {
            let mut data = Vec::with_capacity(needed);
            for r in row..row + p {
                let start = r * img.width() + col;
                data.extend_from_slice(&img.data()[start..start + p]);
            }
            let nonzero = data.iter().filter(|&&v| v > 0.0).count();
            if (nonzero as f64) / (needed as f64) >= cfg.nonzero_frac {
                out.push(Patch {
                    image: img.resized_with(p, p, data),
                    origin: (row, col),
                    source_id: img.meta.source_id.clone(),
                });
            }
        }
    }
    out
}

/// 256-bin histogram equalisation on the image's own histogram, then an
/// affine rescale to [0,1]. Constant images come back unchanged.
pub fn equalize_image(img: &Image) -> Image {
    let Some((lo, hi)) = img.min_max() else {
        return img.clone();
    };
    if lo == hi {
        return img.clone();
    }
    let hist = histogram(img);
    if hist.iter().filter(|&&h| h > 0).count() < 2 {
        // spread below histogram resolution
        return normalize_unit(img).expect("non-empty");
    }
    let total = img.len() as f64;
    let mut cdf = [0.0; HIST_BINS];
    let mut acc = 0u64;
    for (k, &h) in hist.iter().enumerate() {
        acc += h;
        cdf[k] = acc as f64 / total;
    }
    let mapped = img.with_data(img.data().iter().map(|&v| cdf[intensity_bin(v)]).collect());
    normalize_unit(&mapped).expect("non-empty")
}

pub fn hist_equalize(p: &Patch) -> Patch {
    Patch {
        image: equalize_image(&p.image),
        origin: p.origin,
        source_id: p.source_id.clone(),
    }
}

/// Per-image outcome of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub patches: Vec<Patch>,
    pub candidates: usize,
}

/// Runs every stage on one source image.
pub fn run_pipeline(img: &Image, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let mut cur = if cfg.segment {
        segment_background(img)
    } else {
        img.clone()
    };
    cur = invert_monochrome1(&cur);
    cur = flip_right_laterality(&cur);
    cur = normalize_unit(&cur)?;
    let padded = pad_to_canvas(&cur, cfg)?;
    let candidates = candidate_count(padded.width(), padded.height(), cfg);
    let patches = extract_patches(&padded, cfg)
        .iter()
        .map(hist_equalize)
        .collect();
    Ok(PipelineOutput {
        patches,
        candidates,
    })
}

pub fn patch_file_name(p: &Patch) -> String {
    format!("{}_r{}_c{}.png", p.source_id, p.origin.0, p.origin.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub file: String,
    pub source_id: String,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub source_id: String,
    pub width: usize,
    pub height: usize,
    pub photometric: Photometric,
    pub laterality: Laterality,
    pub candidates: usize,
    pub kept: usize,
}

/// Settings that are fixed by this implementation but recorded so runs can be compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConventions {
    pub padding: String,
    pub equalization_bins: usize,
    pub equalization_scope: String,
    pub nonzero_rule: String,
    pub otsu_tie_break: String,
    pub bit_depth: u32,
}

impl Default for PipelineConventions {
    fn default() -> Self {
        Self {
            padding: "top-left, zero fill".into(),
            equalization_bins: HIST_BINS,
            equalization_scope: "patch".into(),
            nonzero_rule: "intensity > 0".into(),
            otsu_tie_break: "floor(mean(maximising bins))".into(),
            bit_depth: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchManifest {
    pub config: PipelineConfig,
    pub conventions: PipelineConventions,
    pub sources: Vec<SourceEntry>,
    pub patches: Vec<PatchEntry>,
}

impl PatchManifest {
    pub fn new(config: PipelineConfig) -> Self {
        Self {
            config,
            conventions: PipelineConventions::default(),
            sources: Vec::new(),
            patches: Vec::new(),
        }
    }
}

/// Writes each patch as a 16-bit PNG under `dir` and records it in `manifest`.
pub fn write_patches(
    dir: &Path,
    source: &Image,
    out: &PipelineOutput,
    manifest: &mut PatchManifest,
) -> Result<()> {
    fsutil::create_dir_all(dir)?;
    for p in &out.patches {
        let file = patch_file_name(p);
        write_image(&p.image, &dir.join(&file), BitDepth::Sixteen)?;
        manifest.patches.push(PatchEntry {
            file,
            source_id: p.source_id.clone(),
            row: p.origin.0,
            col: p.origin.1,
        });
    }
    manifest.sources.push(SourceEntry {
        source_id: source.meta.source_id.clone(),
        width: source.width(),
        height: source.height(),
        photometric: source.meta.photometric,
        laterality: source.meta.laterality,
        candidates: out.candidates,
        kept: out.patches.len(),
    });
    Ok(())
}
