use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{gaussian_kernel, separable_valid};
use crate::imagecore::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            gaussian_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::param(format!(
                "ssim window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.gaussian_sigma > 0.0 && self.data_range > 0.0) {
            return Err(Error::param(
                "ssim k1, k2, sigma and data_range must be positive",
            ));
        }
        Ok(())
    }
}

/// Per-window SSIM values over every Gaussian window that fits in the image.
///
/// Returns the map and its `(width, height)`.
pub fn ssim_map(a: &Image, b: &Image, p: &SsimParams) -> Result<(Vec<f64>, usize, usize)> {
    p.validate()?;
    a.check_same_shape(b)?;
    let (w, h) = (a.width(), a.height());
    if w < p.window || h < p.window {
        return Err(Error::input(format!(
            "{w}x{h} image is smaller than the {0}x{0} ssim window",
            p.window
        )));
    }
    let kernel = gaussian_kernel(p.gaussian_sigma, p.window / 2);
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(u, v)| u * v).collect();

    let (mu_x, ow, oh) = separable_valid(x, w, h, &kernel);
    let (mu_y, _, _) = separable_valid(y, w, h, &kernel);
    let (e_xx, _, _) = separable_valid(&xx, w, h, &kernel);
    let (e_yy, _, _) = separable_valid(&yy, w, h, &kernel);
    let (e_xy, _, _) = separable_valid(&xy, w, h, &kernel);

    let c1 = (p.k1 * p.data_range).powi(2);
    let c2 = (p.k2 * p.data_range).powi(2);
    let map = (0..ow * oh)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .collect();
    Ok((map, ow, oh))
}

/// Mean SSIM with a Gaussian-weighted sliding window.
pub fn ssim(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    let (map, _, _) = ssim_map(a, b, p)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}
