//! Grayscale raster representation, PNG I/O and intensity normalisation.
//!
//! Intensities are held as `f64` in row-major order. Quantisation to 8 or 16
//! bits only happens when an image is written to disk.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

/// Acquisition convention for stored intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Photometric {
    /// Low stored values display bright.
    Monochrome1,
    Monochrome2,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Laterality {
    Left,
    Right,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ImageMeta {
    pub photometric: Photometric,
    pub laterality: Laterality,
    pub source_id: String,
}

/// Row-major grayscale raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
    pub meta: ImageMeta,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            meta: ImageMeta::default(),
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
            meta: ImageMeta::default(),
        }
    }

    /// Builds an image by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
            meta: ImageMeta::default(),
        }
    }

    pub fn with_meta(mut self, meta: ImageMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Same metadata, new pixels. Panics if `data` has the wrong length.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.width * self.height);
        Self {
            width: self.width,
            height: self.height,
            data,
            meta: self.meta.clone(),
        }
    }

    pub(crate) fn resized_with(&self, width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
            meta: self.meta.clone(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut it = self.data.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::dims(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

/// Bits per sample used when writing PNG files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    photometric: Option<String>,
    laterality: Option<String>,
    source_id: Option<String>,
}

fn parse_sidecar(path: &Path) -> Result<ImageMeta> {
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let sidecar_err = |reason: String| Error::Sidecar {
        path: path.to_path_buf(),
        reason,
    };
    let raw: Sidecar = serde_json::from_slice(&bytes).map_err(|e| sidecar_err(e.to_string()))?;
    let photometric = match raw.photometric.as_deref() {
        None => Photometric::Unknown,
        Some("MONOCHROME1") => Photometric::Monochrome1,
        Some("MONOCHROME2") => Photometric::Monochrome2,
        Some(other) => return Err(sidecar_err(format!("unknown photometric {other:?}"))),
    };
    let laterality = match raw.laterality.as_deref() {
        None => Laterality::Unknown,
        Some("L") => Laterality::Left,
        Some("R") => Laterality::Right,
        Some(other) => return Err(sidecar_err(format!("unknown laterality {other:?}"))),
    };
    Ok(ImageMeta {
        photometric,
        laterality,
        source_id: raw.source_id.unwrap_or_default(),
    })
}

/// Conventional sidecar location: the image path with a `.json` extension.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("json")
}

/// Reads a single-channel 8- or 16-bit PNG and scales it into [0,1].
///
/// When no sidecar is given the metadata stays `Unknown`; the source id
/// falls back to the file stem.
pub fn read_image(path: &Path, sidecar: Option<&Path>) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (width, height, data) = match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            let data = buf
                .into_raw()
                .into_iter()
                .map(|v| v as f64 / 255.0)
                .collect();
            (w as usize, h as usize, data)
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            let data = buf
                .into_raw()
                .into_iter()
                .map(|v| v as f64 / 65535.0)
                .collect();
            (w as usize, h as usize, data)
        }
        other => {
            return Err(Error::MultiChannel {
                path: path.to_path_buf(),
                found: format!("{:?}", other.color()),
            })
        }
    };
    let mut meta = match sidecar {
        Some(p) => parse_sidecar(p)?,
        None => ImageMeta::default(),
    };
    if meta.source_id.is_empty() {
        meta.source_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(Image::new(width, height, data)?.with_meta(meta))
}

/// Encodes the image as a grayscale PNG in memory.
pub fn encode_png(img: &Image, depth: BitDepth) -> Result<Vec<u8>> {
    let (w, h) = (img.width as u32, img.height as u32);
    let max = depth.max_value();
    let quantise = |v: f64| (v.clamp(0.0, 1.0) * max).round();
    let mut out = Cursor::new(Vec::new());
    let res = match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = img.data.iter().map(|&v| quantise(v) as u8).collect();
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
                .expect("buffer length matches dimensions")
                .write_to(&mut out, ImageFormat::Png)
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = img.data.iter().map(|&v| quantise(v) as u16).collect();
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw)
                .expect("buffer length matches dimensions")
                .write_to(&mut out, ImageFormat::Png)
        }
    };
    res.map_err(|e| Error::input(format!("png encoding failed: {e}")))?;
    Ok(out.into_inner())
}

/// Writes `img` as a PNG. Values outside [0,1] are clamped before quantisation.
pub fn write_image(img: &Image, path: &Path, depth: BitDepth) -> Result<()> {
    let bytes = encode_png(img, depth)?;
    fsutil::atomic_write(path, &bytes)
}

/// Affine rescale so the minimum maps to 0 and the maximum to 1.
///
/// A constant image maps to all zeros.
pub fn normalize_unit(img: &Image) -> Result<Image> {
    let (lo, hi) = img
        .min_max()
        .ok_or_else(|| Error::input("cannot normalise an empty image"))?;
    let span = hi - lo;
    let data = if span > 0.0 {
        img.data
            .iter()
            .map(|&v| ((v - lo) / span).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; img.len()]
    };
    Ok(img.with_data(data))
}
