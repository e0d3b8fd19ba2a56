//! Round-trips an activation set through the NPY format used by the
//! external feature extractor.

use i2ieval::features::{load_activations, npy, write_activations, ActivationSet, Dtype};

fn main() -> i2ieval::Result<()> {
    let acts = ActivationSet::new(4, 3, (0..12).map(|v| v as f64 * 0.25).collect(), "demo")?;
    let path = std::env::temp_dir().join("i2ieval_demo_acts.npy");
    write_activations(&path, &acts, Dtype::F32)?;

    let raw = npy::read(&path)?;
    println!("shape {:?}, dtype {:?}", raw.shape, raw.dtype);
    let back = load_activations(&path)?;
    println!(
        "{} rows of {}, id {:?}",
        back.n(),
        back.d(),
        back.extractor_id
    );
    println!("row 2: {:?}", back.row(2));
    Ok(())
}
