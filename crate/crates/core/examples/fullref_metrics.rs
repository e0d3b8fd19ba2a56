//! Scores a reference image against common distortions with every
//! full-reference metric.

use i2ieval::analysis::{distort, Distortion};
use i2ieval::fullref::{cw_ssim, fsim, mse, psnr, ssim, CwSsimParams, FsimParams, SsimParams};
use i2ieval::synth::textured;

fn main() -> i2ieval::Result<()> {
    let reference = textured(128, 128, 3);
    let cases = [
        ("identity", Distortion::Shift { dx: 0, dy: 0 }),
        ("shift 2px", Distortion::Shift { dx: 2, dy: 0 }),
        ("blur 1.5", Distortion::Blur { sigma: 1.5 }),
        ("gamma 0.7", Distortion::Contrast { gamma: 0.7 }),
    ];
    let (sp, cp, fp) = (
        SsimParams::default(),
        CwSsimParams::default(),
        FsimParams::default(),
    );
    println!(
        "{:<10} {:>9} {:>8} {:>7} {:>8} {:>7}",
        "case", "mse", "psnr", "ssim", "cw_ssim", "fsim"
    );
    for (name, kind) in cases {
        let d = distort(&reference, &kind)?;
        println!(
            "{name:<10} {:>9.5} {:>8.2} {:>7.4} {:>8.4} {:>7.4}",
            mse(&reference, &d)?,
            psnr(&reference, &d, 1.0)?,
            ssim(&reference, &d, &sp)?,
            cw_ssim(&reference, &d, &cp)?,
            fsim(&reference, &d, &fp)?
        );
    }
    Ok(())
}
