//! On-disk formats.
//!
//! * SFM1 feature containers ([`sfm1`]), shared with the feature exporter.
//! * Fixation JSON ([`fixations`]).
//! * Saliency maps as raw `.f32` or 16-bit grayscale PNG ([`maps`]).
//! * RGB images and heatmap overlays ([`images`]).

pub mod fixations;
pub mod images;
pub mod maps;
pub mod sfm1;

pub use fixations::{read_fixations, write_fixations, FixationFile};
pub use images::{load_image, render_heatmap, save_image};
pub use maps::{load_dataset, read_map, write_map};
pub use sfm1::{decode_sfm1, encode_sfm1, read_sfm1, write_sfm1, Sfm1Header, Sfm1Layer};
