//! Distribution distances between activation sets: FID and KID, with the
//! subset protocol used for KID error bars and a single/double precision study.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, RealField};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ActivationSet;

/// Negative FID values down to this magnitude are treated as rounding noise.
pub const FID_NEGATIVE_TOLERANCE: f64 = 1e-8;
const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl Precision {
    pub fn label(self) -> &'static str {
        match self {
            Precision::Single => "f32",
            Precision::Double => "f64",
        }
    }
}

/// Floating-point types the FID pipeline can run in.
pub trait Float: RealField + Copy {
    fn of(v: f64) -> Self;
    fn widen(self) -> f64;
}

impl Float for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn widen(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn widen(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn cast<T: Float>(&self) -> (DVector<T>, DMatrix<T>) {
        (self.mean.map(T::of), self.cov.map(T::of))
    }
}

fn stats_in<T: Float>(a: &ActivationSet) -> Result<(DVector<T>, DMatrix<T>)> {
    a.require_rows(2, "gaussian statistics")?;
    let (n, d) = (a.n(), a.d());
    let x = DMatrix::<T>::from_row_iterator(n, d, a.data().iter().map(|&v| T::of(v)));
    let inv_n = T::of(1.0 / n as f64);
    let mean: DVector<T> = x.row_sum().transpose() * inv_n;
    let mut centred = x;
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centred.transpose() * &centred * T::of(1.0 / (n - 1) as f64);
    let sym = (&cov + cov.transpose()) * T::of(0.5);
    Ok((mean, sym))
}

/// Sample mean and unbiased (`1/(n-1)`) covariance, symmetrised.
pub fn gaussian_stats(a: &ActivationSet) -> Result<GaussianStats> {
    let (mean, cov) = stats_in::<f64>(a)?;
    Ok(GaussianStats {
        mean,
        cov,
        n: a.n(),
    })
}

fn sqrtm_in<T: Float>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(T::zero()).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Principal square root of a symmetric positive semi-definite matrix.
/// Negative eigenvalues from rounding are clamped to zero.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::dims(format!(
            "sqrtm needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = 1.0 + m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::input(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(sqrtm_in(m))
}

fn fid_in<T: Float>(mu1: &DVector<T>, s1: &DMatrix<T>, mu2: &DVector<T>, s2: &DMatrix<T>) -> T {
    let diff = mu1 - mu2;
    let r = sqrtm_in(s1);
    let p = &r * s2 * &r;
    let p = (&p + p.transpose()) * T::of(0.5);
    let tr_sqrt = p
        .symmetric_eigenvalues()
        .iter()
        .fold(T::zero(), |acc, &l| acc + l.max(T::zero()).sqrt());
    diff.dot(&diff) + s1.trace() + s2.trace() - tr_sqrt * T::of(2.0)
}

fn clamp_fid(v: f64) -> f64 {
    if (-FID_NEGATIVE_TOLERANCE..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::dims(format!(
            "feature dimensions differ: {a} vs {b}"
        )));
    }
    Ok(())
}

/// Fréchet distance between two Gaussian fits, evaluated in `prec`.
pub fn fid(a: &GaussianStats, b: &GaussianStats, prec: Precision) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let v = match prec {
        Precision::Single => {
            let ((m1, s1), (m2, s2)) = (a.cast::<f32>(), b.cast::<f32>());
            fid_in(&m1, &s1, &m2, &s2).widen()
        }
        Precision::Double => fid_in(&a.mean, &a.cov, &b.mean, &b.cov),
    };
    Ok(clamp_fid(v))
}

fn fid_acts_in<T: Float>(x: &ActivationSet, y: &ActivationSet) -> Result<f64> {
    let (m1, s1) = stats_in::<T>(x)?;
    let (m2, s2) = stats_in::<T>(y)?;
    Ok(clamp_fid(fid_in(&m1, &s1, &m2, &s2).widen()))
}

/// FID straight from activations, with statistics also computed in `prec`.
pub fn fid_activations(x: &ActivationSet, y: &ActivationSet, prec: Precision) -> Result<f64> {
    check_dims(x.d(), y.d())?;
    match prec {
        Precision::Single => fid_acts_in::<f32>(x, y),
        Precision::Double => fid_acts_in::<f64>(x, y),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedFid {
    pub value: f64,
    pub precision: Precision,
    pub seconds: f64,
}

pub fn fid_timed(x: &ActivationSet, y: &ActivationSet, prec: Precision) -> Result<TimedFid> {
    let start = Instant::now();
    let value = fid_activations(x, y, prec)?;
    Ok(TimedFid {
        value,
        precision: prec,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionStudy {
    pub single: TimedFid,
    pub double: TimedFid,
    pub abs_difference: f64,
}

/// Runs FID in both precisions on the same sets and records wall time.
pub fn precision_study(x: &ActivationSet, y: &ActivationSet) -> Result<PrecisionStudy> {
    let single = fid_timed(x, y, Precision::Single)?;
    let double = fid_timed(x, y, Precision::Double)?;
    Ok(PrecisionStudy {
        single,
        double,
        abs_difference: (single.value - double.value).abs(),
    })
}

#[inline]
fn kernel(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    (dot / a.len() as f64 + 1.0).powi(3)
}

/// Cubic polynomial kernel `((a·b)/d + 1)^3`.
pub fn poly_kernel(alpha: &[f64], omega: &[f64]) -> Result<f64> {
    if alpha.len() != omega.len() || alpha.is_empty() {
        return Err(Error::dims(format!(
            "kernel arguments have lengths {} and {}",
            alpha.len(),
            omega.len()
        )));
    }
    Ok(kernel(alpha, omega))
}

/// Unbiased MMD² over the rows `xi` of `x` and `yi` of `y`.
fn kid_rows(x: &ActivationSet, xi: &[usize], y: &ActivationSet, yi: &[usize]) -> f64 {
    let within = |s: &ActivationSet, idx: &[usize]| {
        let mut sum = 0.0;
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                if p != q {
                    sum += kernel(s.row(i), s.row(j));
                }
            }
        }
        let m = idx.len() as f64;
        sum / (m * (m - 1.0))
    };
    let mut cross = 0.0;
    for &i in xi {
        for &j in yi {
            cross += kernel(x.row(i), y.row(j));
        }
    }
    within(x, xi) + within(y, yi) - 2.0 * cross / (xi.len() * yi.len()) as f64
}

/// Unbiased KID estimate over the full sets. May be negative.
pub fn kid_unbiased(x: &ActivationSet, y: &ActivationSet) -> Result<f64> {
    x.require_rows(2, "kid")?;
    y.require_rows(2, "kid")?;
    check_dims(x.d(), y.d())?;
    let xi: Vec<usize> = (0..x.n()).collect();
    let yi: Vec<usize> = (0..y.n()).collect();
    Ok(kid_rows(x, &xi, y, &yi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KidConfig {
    pub subsets: usize,
    pub subset_size: usize,
    pub seed: u64,
}

impl Default for KidConfig {
    fn default() -> Self {
        Self {
            subsets: 50,
            subset_size: 100,
            seed: 0,
        }
    }
}

impl KidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subsets == 0 {
            return Err(Error::param("kid subsets must be at least 1"));
        }
        if self.subset_size < 2 {
            return Err(Error::param("kid subset size must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KidResult {
    pub mean: f64,
    /// Population standard deviation over subsets.
    pub std: f64,
    pub per_subset: Vec<f64>,
    /// Set when a single subset makes the spread meaningless.
    pub degenerate: bool,
}

/// KID over `cfg.subsets` rounds of `cfg.subset_size` rows drawn without
/// replacement from each set. Round `r` uses its own stream of the seeded
/// generator, so results do not depend on the number of worker threads.
pub fn kid_subsampled(x: &ActivationSet, y: &ActivationSet, cfg: &KidConfig) -> Result<KidResult> {
    cfg.validate()?;
    check_dims(x.d(), y.d())?;
    for (name, s) in [("first", x), ("second", y)] {
        if s.n() < cfg.subset_size {
            return Err(Error::param(format!(
                "subset size {} exceeds the {name} set's {} rows",
                cfg.subset_size,
                s.n()
            )));
        }
    }
    let per_subset: Vec<f64> = (0..cfg.subsets)
        .into_par_iter()
        .map(|round| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(round as u64);
            let xi = sample(&mut rng, x.n(), cfg.subset_size).into_vec();
            let yi = sample(&mut rng, y.n(), cfg.subset_size).into_vec();
            kid_rows(x, &xi, y, &yi)
        })
        .collect();
    let k = per_subset.len() as f64;
    let mean = per_subset.iter().sum::<f64>() / k;
    let std = (per_subset.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k).sqrt();
    Ok(KidResult {
        mean,
        std,
        degenerate: cfg.subsets == 1,
        per_subset,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistMetric {
    Fid,
    Kid,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistConfig {
    pub precision: Precision,
    pub kid: KidConfig,
}

/// Scores of one metric for the unadapted baseline and the adapted set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDelta {
    pub metric: DistMetric,
    pub baseline: f64,
    pub adapted: f64,
    pub improved: bool,
    /// Full subset results when the metric is KID.
    pub baseline_kid: Option<KidResult>,
    pub adapted_kid: Option<KidResult>,
}

/// Compares `metric(source, target)` against `metric(adapted, target)`.
pub fn baseline_delta(
    source: &ActivationSet,
    adapted: &ActivationSet,
    target: &ActivationSet,
    metric: DistMetric,
    cfg: &DistConfig,
) -> Result<BaselineDelta> {
    let (baseline, adapted_score, bk, ak) = match metric {
        DistMetric::Fid => (
            fid_activations(source, target, cfg.precision)?,
            fid_activations(adapted, target, cfg.precision)?,
            None,
            None,
        ),
        DistMetric::Kid => {
            let b = kid_subsampled(source, target, &cfg.kid)?;
            let a = kid_subsampled(adapted, target, &cfg.kid)?;
            (b.mean, a.mean, Some(b), Some(a))
        }
    };
    Ok(BaselineDelta {
        metric,
        baseline,
        adapted: adapted_score,
        improved: adapted_score < baseline,
        baseline_kid: bk,
        adapted_kid: ak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn acts(rows: &[&[f64]]) -> ActivationSet {
        ActivationSet::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), "t").unwrap()
    }

    fn random_acts(n: usize, d: usize, shift: f64, seed: u64) -> ActivationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0 + shift)
            .collect();
        ActivationSet::new(n, d, data, "rand").unwrap()
    }

    fn naive_kid(x: &ActivationSet, y: &ActivationSet) -> f64 {
        let d = x.d() as f64;
        let k = |a: &[f64], b: &[f64]| {
            let mut dot = 0.0;
            for t in 0..a.len() {
                dot += a[t] * b[t];
            }
            (dot / d + 1.0).powi(3)
        };
        let (m, n) = (x.n() as f64, y.n() as f64);
        let mut t1 = 0.0;
        for i in 0..x.n() {
            for j in 0..x.n() {
                if i != j {
                    t1 += k(x.row(i), x.row(j));
                }
            }
        }
        let mut t2 = 0.0;
        for i in 0..y.n() {
            for j in 0..y.n() {
                if i != j {
                    t2 += k(y.row(i), y.row(j));
                }
            }
        }
        let mut t3 = 0.0;
        for i in 0..x.n() {
            for j in 0..y.n() {
                t3 += k(x.row(i), y.row(j));
            }
        }
        t1 / (m * (m - 1.0)) + t2 / (n * (n - 1.0)) - 2.0 * t3 / (m * n)
    }

    #[test]
    fn stats_hand_case() {
        let s = gaussian_stats(&acts(&[&[0.0], &[2.0]])).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.cov[(0, 0)], 2.0);
        let flat = gaussian_stats(&acts(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]])).unwrap();
        assert!(flat.cov.iter().all(|&v| v == 0.0));
        assert!(gaussian_stats(&acts(&[&[1.0]])).is_err());
    }

    #[test]
    fn stats_permutation_invariant() {
        let a = random_acts(30, 4, 0.0, 1);
        let mut rows: Vec<Vec<f64>> = a.rows().map(<[f64]>::to_vec).collect();
        rows.reverse();
        let b = ActivationSet::from_rows(&rows, "r").unwrap();
        let (sa, sb) = (gaussian_stats(&a).unwrap(), gaussian_stats(&b).unwrap());
        assert!((sa.mean - sb.mean).amax() < 1e-14);
        assert!((sa.cov - sb.cov).amax() < 1e-14);
    }

    #[test]
    fn sqrtm_cases() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((sqrtm_psd(&i).unwrap() - &i).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = sqrtm_psd(&d).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).amax() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(sqrtm_psd(&bad).is_err());
    }

    #[test]
    fn fid_one_dimensional_closed_form() {
        let stats = |m: f64, v: f64| GaussianStats {
            mean: DVector::from_vec(vec![m]),
            cov: DMatrix::from_element(1, 1, v),
            n: 10,
        };
        let f = fid(&stats(0.0, 1.0), &stats(1.0, 4.0), Precision::Double).unwrap();
        assert!((f - 2.0).abs() < 1e-12);
        assert_eq!(
            fid(&stats(3.0, 2.0), &stats(3.0, 2.0), Precision::Double).unwrap(),
            0.0
        );
    }

    #[test]
    fn fid_dimension_mismatch() {
        let a = gaussian_stats(&random_acts(10, 3, 0.0, 1)).unwrap();
        let b = gaussian_stats(&random_acts(10, 2, 0.0, 1)).unwrap();
        assert!(fid(&a, &b, Precision::Double).is_err());
    }

    #[test]
    fn precision_study_agrees() {
        let x = random_acts(200, 8, 0.0, 2);
        let y = random_acts(200, 8, 0.3, 3);
        let s = precision_study(&x, &y).unwrap();
        assert!(s.abs_difference < 1e-2, "{s:?}");
        assert!(s.double.value > 0.1);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(poly_kernel(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 8.0);
        assert_eq!(poly_kernel(&[0.0, 0.0], &[5.0, -3.0]).unwrap(), 1.0);
        assert_eq!(
            poly_kernel(&[1.0, 0.0, 0.0], &[3.0, 0.0, 0.0]).unwrap(),
            8.0
        );
        assert!(poly_kernel(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kid_hand_cases() {
        let z = acts(&[&[0.0], &[0.0]]);
        assert_eq!(kid_unbiased(&z, &z).unwrap(), 0.0);
        let x = acts(&[&[1.0], &[-1.0]]);
        assert_eq!(kid_unbiased(&x, &z).unwrap(), -1.0);
        assert!(kid_unbiased(&acts(&[&[1.0]]), &z).is_err());
    }

    #[test]
    fn kid_subsampled_contract() {
        let x = random_acts(150, 6, 0.0, 4);
        let y = random_acts(120, 6, 0.2, 5);
        let cfg = KidConfig {
            subsets: 10,
            subset_size: 50,
            seed: 9,
        };
        let a = kid_subsampled(&x, &y, &cfg).unwrap();
        assert_eq!(a, kid_subsampled(&x, &y, &cfg).unwrap());
        assert_eq!(a.per_subset.len(), 10);
        let one = kid_subsampled(&x, &y, &KidConfig { subsets: 1, ..cfg }).unwrap();
        assert!(one.degenerate && one.std == 0.0);
        assert!(kid_subsampled(
            &x,
            &y,
            &KidConfig {
                subset_size: 121,
                ..cfg
            }
        )
        .is_err());
        let single_thread = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = single_thread.install(|| kid_subsampled(&x, &y, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn baseline_cases() {
        let source = random_acts(120, 4, 0.5, 6);
        let target = random_acts(120, 4, 0.0, 7);
        let cfg = DistConfig {
            kid: KidConfig {
                subsets: 5,
                subset_size: 40,
                seed: 1,
            },
            ..Default::default()
        };
        let perfect = baseline_delta(&source, &target, &target, DistMetric::Fid, &cfg).unwrap();
        assert!(perfect.improved && perfect.adapted == 0.0);
        for metric in [DistMetric::Fid, DistMetric::Kid] {
            let same = baseline_delta(&source, &source, &target, metric, &cfg).unwrap();
            assert_eq!(same.baseline, same.adapted);
            assert!(!same.improved);
        }
        let shifted = random_acts(120, 4, 0.2, 8);
        let d = baseline_delta(&source, &shifted, &target, DistMetric::Kid, &cfg).unwrap();
        assert_eq!(
            d.baseline,
            kid_subsampled(&source, &target, &cfg.kid).unwrap().mean
        );
        assert_eq!(
            d.adapted,
            kid_subsampled(&shifted, &target, &cfg.kid).unwrap().mean
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kid_matches_naive_and_is_symmetric(m in 2usize..12, n in 2usize..12, d in 1usize..6, seed in any::<u64>()) {
            let x = random_acts(m, d, 0.0, seed);
            let y = random_acts(n, d, 0.1, seed.wrapping_add(1));
            let fast = kid_unbiased(&x, &y).unwrap();
            prop_assert!((fast - naive_kid(&x, &y)).abs() <= 1e-12);
            prop_assert!((fast - kid_unbiased(&y, &x).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn fid_symmetric_and_non_negative(seed in any::<u64>()) {
            let a = gaussian_stats(&random_acts(40, 5, 0.0, seed)).unwrap();
            let b = gaussian_stats(&random_acts(30, 5, 0.4, seed ^ 0xabc)).unwrap();
            let ab = fid(&a, &b, Precision::Double).unwrap();
            let ba = fid(&b, &a, Precision::Double).unwrap();
            prop_assert!((ab - ba).abs() < 1e-8);
            prop_assert!(ab >= 0.0);
            prop_assert!(fid(&a, &a, Precision::Double).unwrap().abs() < 1e-8);
        }

        #[test]
        fn sqrtm_reconstructs(seed in any::<u64>(), d in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = DMatrix::from_fn(d, d + 2, |_, _| rng.random::<f64>() - 0.5);
            let m = &g * g.transpose();
            let b = sqrtm_psd(&m).unwrap();
            prop_assert!((&b * &b - &m).norm() <= 1e-6 * (1.0 + m.norm()));
        }
    }
}
