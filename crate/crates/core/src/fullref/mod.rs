//! Full-reference content-preservation metrics.
//!
//! Every metric compares a source image with its adapted counterpart and
//! requires the two rasters to have identical dimensions.

mod cwssim;
mod fsim;
pub mod loggabor;
mod ssim;

pub use cwssim::{cw_ssim, CwSsimParams};
pub use fsim::{fsim, phase_congruency, scharr_gradient, FsimParams};
pub use ssim::{ssim, ssim_map, SsimParams};

use crate::error::Result;
use crate::imagecore::Image;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB. Identical images give `+inf`.
pub fn psnr(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, data_range))
}

pub fn psnr_from_mse(mse: f64, data_range: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (data_range * data_range / mse).log10()
    }
}
