pub mod analysis;
pub mod cli;
pub mod distdist;
pub mod error;
pub mod features;
pub mod filter;
pub mod fsutil;
pub mod fullref;
pub mod imagecore;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
pub use imagecore::{
    normalize_unit, read_image, write_image, BitDepth, Image, ImageMeta, Laterality, Photometric,
};
