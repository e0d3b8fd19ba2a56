//! Runs the mammography patch pipeline on a synthetic right-side MONOCHROME1
//! image and reports what each stage kept.

use i2ieval::preprocess::{otsu_threshold, run_pipeline, PipelineConfig};
use i2ieval::{Image, ImageMeta, Laterality, Photometric};

fn main() -> i2ieval::Result<()> {
    // breast tissue hugs the right edge; stored dark-is-bright
    let img = Image::from_fn(900, 1200, |r, c| {
        let d = ((r as f64 - 600.0).powi(2) + (c as f64 - 900.0).powi(2)).sqrt();
        if d < 700.0 {
            0.35 - 0.1 * ((r * 3 + c * 7) % 13) as f64 / 13.0
        } else {
            1.0
        }
    })
    .with_meta(ImageMeta {
        photometric: Photometric::Monochrome1,
        laterality: Laterality::Right,
        source_id: "demo".into(),
    });

    let otsu = otsu_threshold(&img);
    println!(
        "otsu split bin {:?}, threshold {:.4}",
        otsu.split_bin, otsu.threshold
    );

    let cfg = PipelineConfig {
        canvas: 1280,
        ..Default::default()
    };
    let out = run_pipeline(&img, &cfg)?;
    println!(
        "{} of {} windows passed the {:.0}% non-zero rule",
        out.patches.len(),
        out.candidates,
        cfg.nonzero_frac * 100.0
    );
    if let Some(p) = out.patches.first() {
        let (lo, hi) = p.image.min_max().unwrap_or((0.0, 0.0));
        println!("first patch at {:?}, range [{lo}, {hi}]", p.origin);
    }
    Ok(())
}
