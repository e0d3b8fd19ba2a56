use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{gaussian_kernel, separable_reflect};
use crate::imagecore::{normalize_unit, Image};

/// Integer pixel offset. Positive `dx` moves content right, positive `dy` down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Shift {
    pub dx: i64,
    pub dy: i64,
}

impl Shift {
    pub fn new(dx: i64, dy: i64) -> Self {
        Self { dx, dy }
    }

    pub fn inverse(self) -> Self {
        Self::new(-self.dx, -self.dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distortion {
    Shift {
        dx: i64,
        dy: i64,
    },
    /// Gaussian blur with reflective borders.
    Blur {
        sigma: f64,
    },
    /// Pointwise `v^gamma` followed by renormalisation to [0,1].
    Contrast {
        gamma: f64,
    },
}

/// Translates by `(dx, dy)` with zero fill.
pub fn translate(img: &Image, dx: i64, dy: i64) -> Image {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut data = vec![0.0; img.len()];
    for r in 0..h {
        let sr = r - dy;
        if sr < 0 || sr >= h {
            continue;
        }
        for c in 0..w {
            let sc = c - dx;
            if sc >= 0 && sc < w {
                data[(r * w + c) as usize] = img.data()[(sr * w + sc) as usize];
            }
        }
    }
    img.with_data(data)
}

pub fn distort(img: &Image, kind: &Distortion) -> Result<Image> {
    match *kind {
        Distortion::Shift { dx, dy } => {
            if dx.unsigned_abs() as usize >= img.width().max(1)
                || dy.unsigned_abs() as usize >= img.height().max(1)
            {
                return Err(Error::param(format!(
                    "shift ({dx}, {dy}) out of bounds for {}x{} image",
                    img.width(),
                    img.height()
                )));
            }
            Ok(translate(img, dx, dy))
        }
        Distortion::Blur { sigma } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::param(format!("blur sigma must be > 0, got {sigma}")));
            }
            let radius = (4.0 * sigma).ceil() as usize;
            let kernel = gaussian_kernel(sigma, radius);
            Ok(img.with_data(separable_reflect(
                img.data(),
                img.width(),
                img.height(),
                &kernel,
            )))
        }
        Distortion::Contrast { gamma } => {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::param(format!(
                    "contrast gamma must be > 0, got {gamma}"
                )));
            }
            let powed = img.with_data(img.data().iter().map(|v| v.max(0.0).powf(gamma)).collect());
            normalize_unit(&powed)
        }
    }
}

/// Removes `margin` pixels from each side.
pub fn crop_border(img: &Image, margin: usize) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if w <= 2 * margin || h <= 2 * margin {
        return Err(Error::input(format!(
            "{w}x{h} image too small to crop {margin} pixels per side"
        )));
    }
    let (ow, oh) = (w - 2 * margin, h - 2 * margin);
    let mut data = Vec::with_capacity(ow * oh);
    for r in margin..h - margin {
        data.extend_from_slice(&img.data()[r * w + margin..r * w + margin + ow]);
    }
    Ok(img.resized_with(ow, oh, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::textured;

    #[test]
    fn null_shift_is_identity() {
        let a = textured(20, 20, 1);
        assert_eq!(distort(&a, &Distortion::Shift { dx: 0, dy: 0 }).unwrap(), a);
    }

    #[test]
    fn inverse_shift_restores_interior() {
        let a = textured(30, 25, 2);
        let there = distort(&a, &Distortion::Shift { dx: 3, dy: -2 }).unwrap();
        let back = distort(&there, &Distortion::Shift { dx: -3, dy: 2 }).unwrap();
        for r in 2..25 - 2 {
            for c in 3..30 - 3 {
                assert_eq!(back.at(r, c), a.at(r, c));
            }
        }
    }

    #[test]
    fn shift_direction() {
        let a = textured(10, 10, 3);
        let s = translate(&a, 2, 1);
        assert_eq!(s.at(1, 2), a.at(0, 0));
        assert_eq!(s.at(0, 0), 0.0);
    }

    #[test]
    fn blur_preserves_interior_mean() {
        let a = textured(64, 64, 4);
        let b = distort(&a, &Distortion::Blur { sigma: 1.5 }).unwrap();
        // a constant field is a fixed point of the normalised kernel
        let flat = Image::filled(32, 32, 0.37);
        let fb = distort(&flat, &Distortion::Blur { sigma: 2.0 }).unwrap();
        assert!(fb.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
        // symmetric normalised kernels leave a linear ramp unchanged away from the border
        let ramp = Image::from_fn(64, 64, |r, c| (r + 2 * c) as f64 / 200.0);
        let rb = distort(&ramp, &Distortion::Blur { sigma: 1.5 }).unwrap();
        let interior = |img: &Image| {
            let mut s = 0.0;
            for r in 16..48 {
                for c in 16..48 {
                    s += img.at(r, c);
                }
            }
            s / 1024.0
        };
        assert!((interior(&ramp) - interior(&rb)).abs() < 1e-6);
        let full_a: f64 = a.data().iter().sum::<f64>() / a.len() as f64;
        let full_b: f64 = b.data().iter().sum::<f64>() / b.len() as f64;
        assert!((full_a - full_b).abs() < 1e-3);
    }

    #[test]
    fn contrast_renormalises() {
        let a = textured(16, 16, 5);
        let c = distort(&a, &Distortion::Contrast { gamma: 2.0 }).unwrap();
        assert_eq!(c.min_max().unwrap(), (0.0, 1.0));
    }

    #[test]
    fn invalid_params() {
        let a = textured(8, 8, 6);
        assert!(distort(&a, &Distortion::Blur { sigma: 0.0 }).is_err());
        assert!(distort(&a, &Distortion::Contrast { gamma: -1.0 }).is_err());
        assert!(distort(&a, &Distortion::Shift { dx: 8, dy: 0 }).is_err());
    }

    #[test]
    fn crop_cases() {
        let a = textured(256, 256, 7);
        let c = crop_border(&a, 5).unwrap();
        assert_eq!((c.width(), c.height()), (246, 246));
        assert_eq!(c.at(0, 0), a.at(5, 5));
        assert_eq!(crop_border(&a, 0).unwrap(), a);
        let twice = crop_border(&crop_border(&a, 3).unwrap(), 4).unwrap();
        assert_eq!(twice, crop_border(&a, 7).unwrap());
        assert!(crop_border(&Image::filled(10, 10, 0.0), 5).is_err());
    }
}
