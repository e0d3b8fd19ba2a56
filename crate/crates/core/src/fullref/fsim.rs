use serde::{Deserialize, Serialize};

use super::loggabor::{LogGaborBank, LogGaborParams};
use crate::error::{Error, Result};
use crate::filter::reflect;
use crate::imagecore::Image;

/// Added to the summed amplitude in the phase-congruency denominator.
pub const PC_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsimParams {
    pub pc_scales: usize,
    pub pc_orientations: usize,
    pub t1: f64,
    /// Gradient constant for intensities on the [0,255] scale.
    pub t2: f64,
}

impl Default for FsimParams {
    fn default() -> Self {
        Self {
            pc_scales: 4,
            pc_orientations: 4,
            t1: 0.85,
            t2: 160.0,
        }
    }
}

impl FsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.pc_scales == 0
            || self.pc_orientations == 0
            || self.t1.is_nan()
            || self.t1 <= 0.0
            || self.t2.is_nan()
            || self.t2 <= 0.0
        {
            return Err(Error::param(format!(
                "fsim parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    fn bank(&self) -> LogGaborParams {
        LogGaborParams {
            scales: self.pc_scales,
            orientations: self.pc_orientations,
            ..LogGaborParams::default()
        }
    }
}

/// Local-energy phase congruency:
/// `Σ_o |Σ_s e_{s,o}| / (ε + Σ_o Σ_s |e_{s,o}|)`, no noise compensation.
pub fn phase_congruency(bank: &LogGaborBank, data: &[f64]) -> Vec<f64> {
    let responses = bank.responses(data);
    let n = data.len();
    let mut energy = vec![0.0; n];
    let mut amplitude = vec![0.0; n];
    for orient in &responses {
        for i in 0..n {
            let mut sum = rustfft::num_complex::Complex64::default();
            for band in orient {
                sum += band[i];
                amplitude[i] += band[i].norm();
            }
            energy[i] += sum.norm();
        }
    }
    energy
        .iter()
        .zip(&amplitude)
        .map(|(e, a)| e / (PC_EPSILON + a))
        .collect()
}

/// Gradient magnitude from 3x3 Scharr operators with reflected borders.
pub fn scharr_gradient(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    const K: [[f64; 3]; 3] = [[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]];
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let (mut gx, mut gy) = (0.0, 0.0);
            for (i, krow) in K.iter().enumerate() {
                for (j, &kv) in krow.iter().enumerate() {
                    let rr = reflect(r as isize + i as isize - 1, h);
                    let cc = reflect(c as isize + j as isize - 1, w);
                    let v = data[rr * w + cc];
                    gx += kv * v;
                    gy += K[j][i] * v;
                }
            }
            out[r * w + c] = (gx * gx + gy * gy).sqrt() / 16.0;
        }
    }
    out
}

/// Feature similarity index. Inputs in [0,1] are rescaled to [0,255] so the
/// canonical `t1`/`t2` apply. Values above 1 are returned as computed.
pub fn fsim(a: &Image, b: &Image, p: &FsimParams) -> Result<f64> {
    p.validate()?;
    a.check_same_shape(b)?;
    let (w, h) = (a.width(), a.height());
    if w < 3 || h < 3 {
        return Err(Error::input(format!("{w}x{h} image is too small for fsim")));
    }
    let x: Vec<f64> = a.data().iter().map(|v| v * 255.0).collect();
    let y: Vec<f64> = b.data().iter().map(|v| v * 255.0).collect();
    let bank = LogGaborBank::new(p.bank(), w, h)?;
    let pc_a = phase_congruency(&bank, &x);
    let pc_b = phase_congruency(&bank, &y);
    let g_a = scharr_gradient(&x, w, h);
    let g_b = scharr_gradient(&y, w, h);

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..x.len() {
        let s_pc = (2.0 * pc_a[i] * pc_b[i] + p.t1) / (pc_a[i].powi(2) + pc_b[i].powi(2) + p.t1);
        let s_g = (2.0 * g_a[i] * g_b[i] + p.t2) / (g_a[i].powi(2) + g_b[i].powi(2) + p.t2);
        let pc_m = pc_a[i].max(pc_b[i]);
        num += s_pc * s_g * pc_m;
        den += pc_m;
    }
    Ok(if den > 0.0 { num / den } else { 1.0 })
}
