use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::loggabor::{LogGaborBank, LogGaborParams};
use crate::error::{Error, Result};
use crate::filter::box_sums_valid;
use crate::imagecore::Image;

/// Complex-wavelet SSIM settings.
///
/// The subbands come from a log-Gabor bank evaluated in the frequency
/// domain; `min_wavelength`, `mult` and `sigma_on_f` shape that bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwSsimParams {
    pub scales: usize,
    pub orientations: usize,
    pub window: usize,
    pub stabilizer: f64,
    pub min_wavelength: f64,
    pub mult: f64,
    pub sigma_on_f: f64,
}

impl Default for CwSsimParams {
    fn default() -> Self {
        Self {
            scales: 2,
            orientations: 4,
            window: 7,
            stabilizer: 1e-4,
            min_wavelength: 16.0,
            mult: 2.0,
            sigma_on_f: 0.75,
        }
    }
}

impl CwSsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.orientations == 0 {
            return Err(Error::param(
                "cw-ssim needs at least one scale and orientation",
            ));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::param(format!(
                "cw-ssim window must be odd, got {}",
                self.window
            )));
        }
        if self.stabilizer.is_nan() || self.stabilizer < 0.0 {
            return Err(Error::param("cw-ssim stabilizer must be non-negative"));
        }
        Ok(())
    }

    pub fn bank(&self) -> LogGaborParams {
        LogGaborParams {
            scales: self.scales,
            orientations: self.orientations,
            min_wavelength: self.min_wavelength,
            mult: self.mult,
            sigma_on_f: self.sigma_on_f,
            ..LogGaborParams::default()
        }
    }
}

/// Mean over subbands and windows of
/// `(2|Σ ca·conj(cb)| + K) / (Σ|ca|² + Σ|cb|² + K)`.
///
/// Any raster size works; the FFT does not require power-of-two sides.
pub fn cw_ssim(a: &Image, b: &Image, p: &CwSsimParams) -> Result<f64> {
    p.validate()?;
    a.check_same_shape(b)?;
    let (w, h) = (a.width(), a.height());
    if w < p.window || h < p.window {
        return Err(Error::input(format!(
            "{w}x{h} image is smaller than the {0}x{0} cw-ssim window",
            p.window
        )));
    }
    let bank = LogGaborBank::new(p.bank(), w, h)?;
    let ra = bank.responses(a.data());
    let rb = bank.responses(b.data());
    let k = p.stabilizer;

    let mut total = 0.0;
    let mut bands = 0usize;
    for (ba, bb) in ra.iter().flatten().zip(rb.iter().flatten()) {
        let cross: Vec<Complex64> = ba.iter().zip(bb).map(|(x, y)| x * y.conj()).collect();
        let energy: Vec<f64> = ba
            .iter()
            .zip(bb)
            .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
            .collect();
        let cross_sums = box_sums_valid(&cross, w, h, p.window);
        let energy_sums = box_sums_valid(&energy, w, h, p.window);
        let band_mean = cross_sums
            .iter()
            .zip(&energy_sums)
            .map(|(c, e)| (2.0 * c.norm() + k) / (e + k))
            .sum::<f64>()
            / cross_sums.len() as f64;
        total += band_mean;
        bands += 1;
    }
    Ok(total / bands as f64)
}
