//! Frequency-domain log-Gabor filter bank.
//!
//! Each filter is a radial log-Gabor times an angular Gaussian over one half
//! of the frequency plane, so the inverse transform of a filtered spectrum is
//! a complex response whose real part is the even-symmetric and whose
//! imaginary part is the odd-symmetric filter output.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{fft_freq, Fft2d};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGaborParams {
    pub scales: usize,
    pub orientations: usize,
    /// Wavelength in pixels of the finest scale.
    pub min_wavelength: f64,
    /// Wavelength ratio between successive scales.
    pub mult: f64,
    /// Ratio of the radial Gaussian's standard deviation to the centre frequency.
    pub sigma_on_f: f64,
    /// Ratio of orientation spacing to the angular Gaussian's standard deviation.
    pub d_theta_on_sigma: f64,
}

impl Default for LogGaborParams {
    fn default() -> Self {
        Self {
            scales: 4,
            orientations: 4,
            min_wavelength: 6.0,
            mult: 2.0,
            sigma_on_f: 0.55,
            d_theta_on_sigma: 1.2,
        }
    }
}

impl LogGaborParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.orientations == 0 {
            return Err(Error::param(
                "log-Gabor bank needs at least one scale and orientation",
            ));
        }
        if !(self.min_wavelength >= 2.0
            && self.mult > 0.0
            && self.sigma_on_f > 0.0
            && self.sigma_on_f < 1.0
            && self.d_theta_on_sigma > 0.0)
        {
            return Err(Error::param(format!(
                "invalid log-Gabor parameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// Transfer function value at frequency `(fx, fy)` in cycles/pixel.
pub fn transfer(p: &LogGaborParams, scale: usize, orient: usize, fx: f64, fy: f64) -> f64 {
    let radius = (fx * fx + fy * fy).sqrt();
    if radius == 0.0 {
        return 0.0;
    }
    let f0 = 1.0 / (p.min_wavelength * p.mult.powi(scale as i32));
    let log_sigma = p.sigma_on_f.ln();
    let radial = (-(radius / f0).ln().powi(2) / (2.0 * log_sigma * log_sigma)).exp();
    // suppress the spectrum corners beyond 0.45 cycles/pixel
    let lowpass = 1.0 / (1.0 + (radius / 0.45).powi(30));

    let theta = (-fy).atan2(fx);
    let angle0 = orient as f64 * PI / p.orientations as f64;
    let d = (theta - angle0).sin().atan2((theta - angle0).cos()).abs();
    let theta_sigma = PI / p.orientations as f64 / p.d_theta_on_sigma;
    let angular = (-(d * d) / (2.0 * theta_sigma * theta_sigma)).exp();
    radial * lowpass * angular
}

/// A bank precomputed for one raster size.
pub struct LogGaborBank {
    params: LogGaborParams,
    width: usize,
    height: usize,
    fft: Fft2d,
    /// Indexed by `orient * scales + scale`.
    filters: Vec<Vec<f64>>,
}

impl LogGaborBank {
    pub fn new(params: LogGaborParams, width: usize, height: usize) -> Result<Self> {
        params.validate()?;
        let mut filters = Vec::with_capacity(params.scales * params.orientations);
        for o in 0..params.orientations {
            for s in 0..params.scales {
                let mut f = Vec::with_capacity(width * height);
                for v in 0..height {
                    let fy = fft_freq(v, height);
                    for u in 0..width {
                        f.push(transfer(&params, s, o, fft_freq(u, width), fy));
                    }
                }
                filters.push(f);
            }
        }
        Ok(Self {
            params,
            width,
            height,
            fft: Fft2d::new(width, height),
            filters,
        })
    }

    pub fn params(&self) -> &LogGaborParams {
        &self.params
    }

    /// Complex responses for every subband, indexed `[orient][scale]`.
    pub fn responses(&self, data: &[f64]) -> Vec<Vec<Vec<Complex64>>> {
        assert_eq!(data.len(), self.width * self.height);
        let spectrum = self.fft.forward_real(data);
        let (ns, no) = (self.params.scales, self.params.orientations);
        (0..no)
            .map(|o| {
                (0..ns)
                    .map(|s| {
                        let filter = &self.filters[o * ns + s];
                        let mut buf: Vec<Complex64> =
                            spectrum.iter().zip(filter).map(|(z, &g)| z * g).collect();
                        self.fft.inverse(&mut buf);
                        buf
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dc_and_peak_at_centre_frequency() {
        let p = LogGaborParams::default();
        assert_eq!(transfer(&p, 0, 0, 0.0, 0.0), 0.0);
        let peak = transfer(&p, 0, 0, 1.0 / 6.0, 0.0);
        assert!((peak - 1.0).abs() < 1e-6);
        // opposite half-plane is strongly suppressed
        assert!(transfer(&p, 0, 0, -1.0 / 6.0, 0.0) < 1e-4);
    }

    #[test]
    fn constant_input_has_no_response() {
        let bank = LogGaborBank::new(LogGaborParams::default(), 16, 16).unwrap();
        let r = bank.responses(&vec![0.7; 256]);
        for band in r.iter().flatten() {
            assert!(band.iter().all(|z| z.norm() < 1e-12));
        }
    }
}
