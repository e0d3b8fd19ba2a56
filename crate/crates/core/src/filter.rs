//! Separable convolution, Gaussian kernels and a cached 2-D FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Normalised 1-D Gaussian of length `2*radius + 1`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Correlates with `kernel` along both axes keeping only positions where the
/// kernel fits entirely. Output is `(w - k + 1) x (h - k + 1)`.
pub fn separable_valid(
    data: &[f64],
    w: usize,
    h: usize,
    kernel: &[f64],
) -> (Vec<f64>, usize, usize) {
    let k = kernel.len();
    debug_assert!(k <= w && k <= h);
    let ow = w + 1 - k;
    let oh = h + 1 - k;
    let mut tmp = vec![0.0; ow * h];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            tmp[r * ow + c] = row[c..c + k].iter().zip(kernel).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                acc += tmp[(r + i) * ow + c] * kv;
            }
            out[r * ow + c] = acc;
        }
    }
    (out, ow, oh)
}

/// Symmetric (half-sample) reflection of an out-of-range index.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Same-size separable correlation with reflective borders.
pub fn separable_reflect(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let cc = reflect(c as isize + i as isize - radius, w);
                acc += data[r * w + cc] * kv;
            }
            tmp[r * w + c] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let rr = reflect(r as isize + i as isize - radius, h);
                acc += tmp[rr * w + c] * kv;
            }
            out[r * w + c] = acc;
        }
    }
    out
}

/// Sum over every `k x k` window that fits inside a `w x h` grid.
pub fn box_sums_valid<T>(data: &[T], w: usize, h: usize, k: usize) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let ow = w + 1 - k;
    let oh = h + 1 - k;
    let mut tmp = vec![T::default(); ow * h];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            let mut acc = T::default();
            for &v in &row[c..c + k] {
                acc = acc + v;
            }
            tmp[r * ow + c] = acc;
        }
    }
    let mut out = vec![T::default(); ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = T::default();
            for i in 0..k {
                acc = acc + tmp[(r + i) * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

/// Forward/inverse 2-D FFT over row-major `width x height` buffers.
pub struct Fft2d {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform including the `1/(w*h)` normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_inv, &self.col_inv);
        let scale = 1.0 / (self.width * self.height) as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        assert_eq!(buf.len(), w * h);
        rows.process(buf);
        let mut col = vec![Complex64::default(); h];
        for c in 0..w {
            for r in 0..h {
                col[r] = buf[r * w + c];
            }
            cols.process(&mut col);
            for r in 0..h {
                buf[r * w + c] = col[r];
            }
        }
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}

/// Signed FFT frequency (cycles per sample) of bin `i` in a length-`n` transform.
#[inline]
pub fn fft_freq(i: usize, n: usize) -> f64 {
    let signed = if i <= n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    };
    signed as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_kernel_is_normalised_and_symmetric() {
        let k = gaussian_kernel(1.5, 5);
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..5 {
            assert_eq!(k[i], k[10 - i]);
        }
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(6, 5), 3);
        assert_eq!(reflect(2, 5), 2);
    }

    #[test]
    fn fft_round_trip() {
        let data: Vec<f64> = (0..6 * 5).map(|i| (i as f64 * 0.37).sin()).collect();
        let fft = Fft2d::new(6, 5);
        let mut buf = fft.forward_real(&data);
        fft.inverse(&mut buf);
        for (a, b) in data.iter().zip(&buf) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn box_sums_match_direct() {
        let data: Vec<f64> = (0..7 * 6).map(|i| i as f64).collect();
        let sums = box_sums_valid(&data, 7, 6, 3);
        assert_eq!(sums.len(), 5 * 4);
        let mut direct = 0.0;
        for r in 1..4 {
            for c in 2..5 {
                direct += data[r * 7 + c];
            }
        }
        assert_eq!(sums[5 + 2], direct);
    }
}
