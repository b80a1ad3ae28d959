//! Desk-scale stand-ins: procedural hand glyphs, a small trainable
//! pixel-space denoiser with a depth control branch, and mocked detectors.

mod glyph;
mod model;
pub mod nn;
mod probe;
mod scenario;
mod train;

pub use glyph::{
    generate_glyph_dataset, glyph_camera, glyph_foreground, glyph_train_sample, structure_error, write_glyph_dataset,
    GlyphGeometry, GlyphSample, Prong, BACKGROUND, FOREGROUND_THRESHOLD, GLYPH_DILATION, GLYPH_SIZE,
};
pub use model::{ToyBase, ToyConfig, ToyControl, ToyModel, CONTROL_BLOCKS};
pub use probe::{radial_keypoints, GlyphDetector, GlyphPoseProbe, MockErrorDetector};
pub use scenario::{ToyPipeline, ToyScenario, TOY_SAMPLING_STEPS};
pub use train::{toy_encoder, toy_training_data, train_base, train_toy_end_to_end, window_mean, ToyTrainConfig, ToyTrained};
