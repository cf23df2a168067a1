//! Image → detuning encoding: area downsampling, patch extraction, PCA,
//! min–max detuning map and patch-averaged reservoir embedding.

pub mod detuning;
pub mod image;
pub mod patches;
pub mod pca;
pub mod pipeline;

pub use detuning::DetuningMap;
pub use image::{area_weights, downsample, ImageTensor};
pub use patches::{extract_patches, PatchSet};
pub use pca::{fit_pca, ComponentSelection, PcaModel};
pub use pipeline::{EncodingConfig, EncodingPipeline, PipelineTape};
