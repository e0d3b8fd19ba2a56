//! Recovers an imposed offset by phase correlation, then compares SSIM
//! before and after registration with the border cropped.

use i2ieval::analysis::{crop_border, register_translation, translate};
use i2ieval::fullref::{ssim, SsimParams};
use i2ieval::synth::textured;

fn main() -> i2ieval::Result<()> {
    let fixed = textured(256, 256, 5);
    let moving = translate(&fixed, 4, -3);
    let (shift, registered) = register_translation(&moving, &fixed, 10)?;
    println!("recovered shift ({}, {})", shift.dx, shift.dy);

    let p = SsimParams::default();
    let before = ssim(&fixed, &moving, &p)?;
    let (a, b) = (crop_border(&fixed, 5)?, crop_border(&registered, 5)?);
    println!(
        "ssim before {before:.4}, after {:.4} on {}x{}",
        ssim(&a, &b, &p)?,
        a.width(),
        a.height()
    );
    Ok(())
}
