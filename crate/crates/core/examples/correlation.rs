//! Spearman correlation between metrics across a small report, with the
//! PSNR-vs-SSIM scatter export.

use i2ieval::analysis::{correlation_matrix, distort, scatter_csv, Distortion, MetricReport};
use i2ieval::fullref::{mse, psnr, ssim, SsimParams};
use i2ieval::synth::textured;

fn main() -> i2ieval::Result<()> {
    let mut report = MetricReport::new(["mse", "psnr", "ssim"]);
    let p = SsimParams::default();
    for i in 0..12u64 {
        let a = textured(64, 64, i);
        let b = distort(
            &a,
            &Distortion::Blur {
                sigma: 0.5 + i as f64 * 0.2,
            },
        )?;
        report.push_row(
            format!("pair{i:02}"),
            vec![mse(&a, &b)?, psnr(&a, &b, 1.0)?, ssim(&a, &b, &p)?],
        )?;
    }
    let cm = correlation_matrix(&report)?;
    print!("{}", cm.to_csv()?);
    println!();
    print!("{}", scatter_csv(&report, "psnr", "ssim")?);
    Ok(())
}
