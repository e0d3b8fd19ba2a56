use std::path::Path;

use serde::{Deserialize, Serialize};

use super::npy::{self, Dtype};
use crate::error::{Error, Result};
use crate::fsutil;

pub const DISTS_C1: f64 = 1e-6;
pub const DISTS_C2: f64 = 1e-6;

const MANIFEST: &str = "manifest.json";
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Shape and per-channel texture (`alpha`) and structure (`beta`) weights of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerSpec {
    fn map_len(&self) -> usize {
        self.height * self.width
    }

    fn image_len(&self) -> usize {
        self.channels * self.map_len()
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::input("at least one layer is required"));
    }
    let mut total = 0.0;
    for l in layers {
        if l.channels == 0 || l.height == 0 || l.width == 0 {
            return Err(Error::input(format!("layer {} has an empty shape", l.name)));
        }
        if l.alpha.len() != l.channels || l.beta.len() != l.channels {
            return Err(Error::dims(format!(
                "layer {}: {} channels but {} alpha and {} beta weights",
                l.name,
                l.channels,
                l.alpha.len(),
                l.beta.len()
            )));
        }
        if l.alpha
            .iter()
            .chain(&l.beta)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::input(format!(
                "layer {}: weights must be finite and non-negative",
                l.name
            )));
        }
        total += l.alpha.iter().chain(&l.beta).sum::<f64>();
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::input(format!(
            "DISTS weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Feature maps of a single image, one `channels x height x width` block per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerActivations {
    pub layers: Vec<LayerSpec>,
    pub maps: Vec<Vec<f64>>,
}

impl MultiLayerActivations {
    pub fn new(layers: Vec<LayerSpec>, maps: Vec<Vec<f64>>) -> Result<Self> {
        validate_layers(&layers)?;
        if maps.len() != layers.len() {
            return Err(Error::dims(format!(
                "{} maps for {} layers",
                maps.len(),
                layers.len()
            )));
        }
        for (l, m) in layers.iter().zip(&maps) {
            if m.len() != l.image_len() {
                return Err(Error::dims(format!(
                    "layer {}: expected {} values, got {}",
                    l.name,
                    l.image_len(),
                    m.len()
                )));
            }
        }
        Ok(Self { layers, maps })
    }
}

/// Population mean, variance and covariance of two equally sized maps.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    (mx, my, vx / n, vy / n, cxy / n)
}

/// DISTS between two images' multi-layer activations, in [0,1].
///
/// The weighted sum is divided by the total weight, which is 1 up to
/// rounding, so identical inputs give exactly 0.
pub fn dists(x: &MultiLayerActivations, y: &MultiLayerActivations) -> Result<f64> {
    if x.layers != y.layers {
        return Err(Error::dims(
            "layer shapes or weights differ between the two inputs",
        ));
    }
    let (mut acc, mut total) = (0.0, 0.0);
    for (l, (mx, my)) in x.layers.iter().zip(x.maps.iter().zip(&y.maps)) {
        let hw = l.map_len();
        for c in 0..l.channels {
            let (a, b) = (&mx[c * hw..(c + 1) * hw], &my[c * hw..(c + 1) * hw]);
            let (ux, uy, vx, vy, cxy) = moments(a, b);
            let t = (2.0 * ux * uy + DISTS_C1) / (ux * ux + uy * uy + DISTS_C1);
            let s = (2.0 * cxy + DISTS_C2) / (vx + vy + DISTS_C2);
            acc += l.alpha[c] * t + l.beta[c] * s;
            total += l.alpha[c] + l.beta[c];
        }
    }
    Ok((1.0 - acc / total).clamp(0.0, 1.0))
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLayer {
    #[serde(flatten)]
    spec: LayerSpec,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    extractor_id: String,
    images: Vec<String>,
    layers: Vec<ManifestLayer>,
}

/// Multi-layer activations for a set of images, as exchanged on disk: a
/// directory holding `manifest.json` and one `(n, channels, height, width)`
/// NPY file per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerSet {
    pub extractor_id: String,
    pub images: Vec<String>,
    pub layers: Vec<LayerSpec>,
    arrays: Vec<Vec<f64>>,
}

impl MultiLayerSet {
    pub fn new(
        extractor_id: impl Into<String>,
        images: Vec<String>,
        layers: Vec<LayerSpec>,
        arrays: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_layers(&layers)?;
        if arrays.len() != layers.len() {
            return Err(Error::dims(format!(
                "{} arrays for {} layers",
                arrays.len(),
                layers.len()
            )));
        }
        for (l, a) in layers.iter().zip(&arrays) {
            if a.len() != images.len() * l.image_len() {
                return Err(Error::dims(format!(
                    "layer {}: expected {} values for {} images, got {}",
                    l.name,
                    images.len() * l.image_len(),
                    images.len(),
                    a.len()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "layer {} has non-finite activations",
                    l.name
                )));
            }
        }
        Ok(Self {
            extractor_id: extractor_id.into(),
            images,
            layers,
            arrays,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn position(&self, image: &str) -> Option<usize> {
        self.images.iter().position(|n| n == image)
    }

    pub fn image(&self, i: usize) -> MultiLayerActivations {
        let maps = self
            .layers
            .iter()
            .zip(&self.arrays)
            .map(|(l, a)| a[i * l.image_len()..(i + 1) * l.image_len()].to_vec())
            .collect();
        MultiLayerActivations {
            layers: self.layers.clone(),
            maps,
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Read {
            path: path.clone(),
            source,
        })?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let mut layers = Vec::new();
        let mut arrays = Vec::new();
        for ml in manifest.layers {
            let arr = npy::read(&dir.join(&ml.file))?;
            let expected = [
                manifest.images.len(),
                ml.spec.channels,
                ml.spec.height,
                ml.spec.width,
            ];
            if arr.shape != expected {
                return Err(Error::Manifest {
                    path: path.clone(),
                    reason: format!(
                        "layer {} file {} has shape {:?}, manifest implies {:?}",
                        ml.spec.name, ml.file, arr.shape, expected
                    ),
                });
            }
            layers.push(ml.spec);
            arrays.push(arr.data);
        }
        Self::new(manifest.extractor_id, manifest.images, layers, arrays).map_err(|e| {
            Error::Manifest {
                path,
                reason: e.to_string(),
            }
        })
    }

    pub fn write(&self, dir: &Path, dtype: Dtype) -> Result<()> {
        fsutil::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (l, a) in self.layers.iter().zip(&self.arrays) {
            let file = format!("{}.npy", l.name);
            npy::write(
                &dir.join(&file),
                &[self.len(), l.channels, l.height, l.width],
                a,
                dtype,
            )?;
            entries.push(ManifestLayer {
                spec: l.clone(),
                file,
            });
        }
        let manifest = Manifest {
            extractor_id: self.extractor_id.clone(),
            images: self.images.clone(),
            layers: entries,
        };
        fsutil::atomic_write_json(&dir.join(MANIFEST), &manifest)
    }
}
