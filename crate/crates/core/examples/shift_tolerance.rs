//! SSIM collapses under small translations while CW-SSIM barely moves.

use i2ieval::analysis::translate;
use i2ieval::fullref::{cw_ssim, ssim, CwSsimParams, SsimParams};
use i2ieval::synth::textured;

fn main() -> i2ieval::Result<()> {
    let img = textured(256, 256, 11);
    let (sp, cp) = (SsimParams::default(), CwSsimParams::default());
    for s in 0..=4 {
        let moved = translate(&img, s, 0);
        println!(
            "shift {s}px: ssim {:.4}  cw_ssim {:.4}",
            ssim(&img, &moved, &sp)?,
            cw_ssim(&img, &moved, &cp)?
        );
    }
    Ok(())
}
