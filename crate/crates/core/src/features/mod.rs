//! Activation sets: NPY interchange, a deterministic toy extractor and DISTS
//! over multi-layer feature maps.

mod dists;
pub mod npy;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::Image;

pub use dists::{dists, LayerSpec, MultiLayerActivations, MultiLayerSet, DISTS_C1, DISTS_C2};
pub use npy::Dtype;

/// Side length of the toy extractor's downsampled grid.
pub const TOY_GRID: usize = 16;
pub const TOY_EXTRACTOR_ID: &str = "toy-projection-16x16";

/// `n` feature vectors of length `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    n: usize,
    d: usize,
    data: Vec<f64>,
    pub extractor_id: String,
}

impl ActivationSet {
    pub fn new(
        n: usize,
        d: usize,
        data: Vec<f64>,
        extractor_id: impl Into<String>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::input("activation dimensionality must be at least 1"));
        }
        if data.len() != n * d {
            return Err(Error::dims(format!(
                "{} values cannot form {n} rows of {d}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite activation in row {} column {}",
                i / d,
                i % d
            )));
        }
        Ok(Self {
            n,
            d,
            data,
            extractor_id: extractor_id.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], extractor_id: impl Into<String>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::dims(format!("row {bad} has a different length")));
        }
        Self::new(rows.len(), d, rows.concat(), extractor_id)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Requires at least `min` rows, as distribution metrics do.
    pub(crate) fn require_rows(&self, min: usize, what: &str) -> Result<()> {
        if self.n < min {
            return Err(Error::input(format!(
                "{what} needs at least {min} rows, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Loads a 2-D `(n, d)` NPY file. Single precision is widened to double.
/// The extractor id defaults to the file stem.
pub fn load_activations(path: &Path) -> Result<ActivationSet> {
    let arr = npy::read(path)?;
    if arr.shape.len() != 2 {
        return Err(Error::Npy(format!(
            "{}: expected a 2-D (n, d) array, found shape {:?}",
            path.display(),
            arr.shape
        )));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ActivationSet::new(arr.shape[0], arr.shape[1], arr.data, id)
}

pub fn write_activations(path: &Path, acts: &ActivationSet, dtype: Dtype) -> Result<()> {
    npy::write(path, &[acts.n, acts.d], &acts.data, dtype)
}

/// Area-average downsampling to `TOY_GRID x TOY_GRID`. Every output cell
/// covers at least one input pixel, so images smaller than the grid work too.
fn downsample(img: &Image) -> Vec<f64> {
    let bounds = |i: usize, len: usize| {
        let lo = i * len / TOY_GRID;
        let hi = ((i + 1) * len / TOY_GRID).max(lo + 1);
        (lo.min(len - 1), hi.min(len))
    };
    let mut out = Vec::with_capacity(TOY_GRID * TOY_GRID);
    for i in 0..TOY_GRID {
        let (r0, r1) = bounds(i, img.height());
        for j in 0..TOY_GRID {
            let (c0, c1) = bounds(j, img.width());
            let mut sum = 0.0;
            for r in r0..r1 {
                sum += img.data()[r * img.width() + c0..r * img.width() + c1]
                    .iter()
                    .sum::<f64>();
            }
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    out
}

/// Deterministic stand-in feature extractor: 16x16 area downsample, a fixed
/// seeded random projection to `d` dimensions, then a rectifier.
pub fn toy_extract(images: &[Image], seed: u64, d: usize) -> Result<ActivationSet> {
    let first = images
        .first()
        .ok_or_else(|| Error::input("toy extraction needs at least one image"))?;
    if d == 0 {
        return Err(Error::param("feature dimensionality must be at least 1"));
    }
    if first.is_empty() {
        return Err(Error::input("images must be non-empty"));
    }
    if let Some(bad) = images.iter().position(|im| !im.same_shape(first)) {
        return Err(Error::dims(format!(
            "image {bad} is {}x{}, expected {}x{}",
            images[bad].width(),
            images[bad].height(),
            first.width(),
            first.height()
        )));
    }
    let k = TOY_GRID * TOY_GRID;
    let scale = (3.0 / k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj: Vec<f64> = (0..d * k)
        .map(|_| rng.random_range(-scale..scale))
        .collect();

    let rows: Vec<Vec<f64>> = images
        .par_iter()
        .map(|img| {
            let x = downsample(img);
            proj.chunks_exact(k)
                .map(|w| w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0))
                .collect()
        })
        .collect();
    ActivationSet::new(
        images.len(),
        d,
        rows.concat(),
        format!("{TOY_EXTRACTOR_ID}-seed{seed}"),
    )
}
