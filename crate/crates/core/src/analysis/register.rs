//! Integer-pixel translation registration by phase correlation.
//!
//! No interpolation is performed: the registered image is the moving image
//! translated by a whole number of pixels, with zero fill at the margins.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::distort::{translate, Shift};
use crate::error::{Error, Result};
use crate::filter::Fft2d;
use crate::imagecore::Image;

/// Relative floor added to cross-power magnitudes before normalisation, so
/// bands with no signal energy do not turn rounding noise into peaks.
const REGULARIZATION: f64 = 1e-3;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * (i as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Phase-correlation surface value for every candidate shift in the window.
fn correlation_surface(moving: &Image, fixed: &Image) -> Vec<f64> {
    let (w, h) = (fixed.width(), fixed.height());
    let (wx, wy) = (hann(w), hann(h));
    // mean-centred and tapered so the periodic wrap and the zero-filled
    // margins of a shifted image do not dominate the spectrum
    let prepared = |img: &Image| {
        let mean = img.data().iter().sum::<f64>() / img.len() as f64;
        img.data()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - mean) * wx[i % w] * wy[i / w])
            .collect::<Vec<_>>()
    };
    let fft = Fft2d::new(w, h);
    let f = fft.forward_real(&prepared(fixed));
    let m = fft.forward_real(&prepared(moving));
    let products: Vec<Complex64> = f.iter().zip(&m).map(|(a, b)| a * b.conj()).collect();
    let eps = REGULARIZATION * products.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut cross: Vec<Complex64> = products
        .iter()
        .map(|z| {
            let n = z.norm() + eps;
            if n > 1e-300 {
                z / n
            } else {
                Complex64::default()
            }
        })
        .collect();
    fft.inverse(&mut cross);
    cross.into_iter().map(|z| z.re).collect()
}

/// Finds the integer shift that best aligns `moving` onto `fixed`, searching
/// `|dx|, |dy| <= max_shift`, and returns it with the shifted moving image.
///
/// Peak ties go to the smallest shift norm, then the smallest `(dx, dy)`.
pub fn register_translation(
    moving: &Image,
    fixed: &Image,
    max_shift: usize,
) -> Result<(Shift, Image)> {
    moving.check_same_shape(fixed)?;
    if max_shift == 0 {
        return Err(Error::param("max_shift must be at least 1"));
    }
    let (w, h) = (fixed.width(), fixed.height());
    if 2 * max_shift + 1 > w || 2 * max_shift + 1 > h {
        return Err(Error::param(format!(
            "max_shift {max_shift} too large for {w}x{h} images"
        )));
    }
    for (name, img) in [("moving", moving), ("fixed", fixed)] {
        let (lo, hi) = img.min_max().unwrap_or((0.0, 0.0));
        if lo == hi {
            return Err(Error::input(format!(
                "{name} image is constant; registration is undefined"
            )));
        }
    }

    let surface = correlation_surface(moving, fixed);
    let m = max_shift as i64;
    let mut best: Option<(f64, Shift)> = None;
    for dy in -m..=m {
        for dx in -m..=m {
            let r = dy.rem_euclid(h as i64) as usize;
            let c = dx.rem_euclid(w as i64) as usize;
            let v = surface[r * w + c];
            let cand = Shift::new(dx, dy);
            let better = match best {
                None => true,
                Some((bv, bs)) => v > bv || (v == bv && tie_key(cand) < tie_key(bs)),
            };
            if better {
                best = Some((v, cand));
            }
        }
    }
    let (_, shift) = best.expect("search window is non-empty");
    Ok((shift, translate(moving, shift.dx, shift.dy)))
}

fn tie_key(s: Shift) -> (i64, i64, i64) {
    (s.dx * s.dx + s.dy * s.dy, s.dx, s.dy)
}
