//! Writes a multi-layer activation manifest, reads it back and scores
//! DISTS between two of its images.

use i2ieval::features::{dists, Dtype, LayerSpec, MultiLayerSet};

fn main() -> i2ieval::Result<()> {
    let layer = |name: &str, c: usize, hw: usize| LayerSpec {
        name: name.into(),
        channels: c,
        height: hw,
        width: hw,
        alpha: vec![0.125; c],
        beta: vec![0.125; c],
    };
    let layers = vec![layer("stage1", 2, 8), layer("stage2", 2, 4)];
    let images = vec![
        "a.png".to_string(),
        "b.png".to_string(),
        "c.png".to_string(),
    ];
    let arrays: Vec<Vec<f64>> = layers
        .iter()
        .map(|l| {
            (0..images.len() * l.channels * l.height * l.width)
                .map(|k| {
                    let img = k / (l.channels * l.height * l.width);
                    1.0 + ((k * 31 + img * img * 17) % 19) as f64 / 19.0
                })
                .collect()
        })
        .collect();
    let set = MultiLayerSet::new("demo-layers", images, layers, arrays)?;

    let dir = std::env::temp_dir().join("i2ieval_dists_demo");
    set.write(&dir, Dtype::F32)?;
    let back = MultiLayerSet::load(&dir)?;
    println!("loaded {} images from {}", back.len(), dir.display());
    for j in 0..back.len() {
        println!(
            "dists(a, {}) = {:.6}",
            back.images[j],
            dists(&back.image(0), &back.image(j))?
        );
    }
    Ok(())
}
