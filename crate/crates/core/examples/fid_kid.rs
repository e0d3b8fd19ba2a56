//! FID and KID on toy activations, a baseline comparison and the
//! single versus double precision study.

use i2ieval::distdist::{
    baseline_delta, fid_activations, kid_subsampled, precision_study, DistConfig, DistMetric,
    KidConfig, Precision,
};
use i2ieval::features::{toy_extract, ActivationSet};
use i2ieval::synth::noise;
use i2ieval::Image;

fn acts(count: u64, seed: u64, bias: f64) -> i2ieval::Result<ActivationSet> {
    let images: Vec<Image> = (0..count)
        .map(|i| {
            let n = noise(32, 32, seed * 100_003 + i);
            Image::from_fn(32, 32, |r, c| (n.at(r, c) + bias).min(1.0))
        })
        .collect();
    toy_extract(&images, 0, 64)
}

fn main() -> i2ieval::Result<()> {
    let target = acts(400, 1, 0.0)?;
    let adapted = acts(400, 2, 0.05)?;
    let source = acts(400, 3, 0.25)?;

    println!(
        "fid(adapted, target) = {:.6}",
        fid_activations(&adapted, &target, Precision::Double)?
    );
    let kid = kid_subsampled(&adapted, &target, &KidConfig::default())?;
    println!(
        "kid(adapted, target) = {:.3e} +- {:.3e} over {} subsets",
        kid.mean,
        kid.std,
        kid.per_subset.len()
    );

    let cfg = DistConfig::default();
    for metric in [DistMetric::Fid, DistMetric::Kid] {
        let d = baseline_delta(&source, &adapted, &target, metric, &cfg)?;
        println!(
            "{metric:?}: baseline {:.4e}, adapted {:.4e}, improved {}",
            d.baseline, d.adapted, d.improved
        );
    }

    let study = precision_study(&adapted, &target)?;
    println!(
        "f64 {:.8} ({:.4}s) vs f32 {:.8} ({:.4}s), |diff| {:.2e}",
        study.double.value,
        study.double.seconds,
        study.single.value,
        study.single.seconds,
        study.abs_difference
    );
    Ok(())
}
