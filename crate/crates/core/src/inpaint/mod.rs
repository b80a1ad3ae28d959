//! Masked inpainting of hand regions.

mod codec;
mod mask;
mod pipeline;

pub use codec::{AvgPoolCodec, Codec, IdentityCodec};
pub use mask::{blank_region, downsample_mask, masked_compose, RegionMask, DEFAULT_DILATION};
pub use pipeline::{
    init_noise, rectify, rectify_at, rectify_sweep, InpaintModels, InpaintRequest, RectifiedResult, RectifyMetadata,
};

use crate::error::Result;
use crate::grid::{Image, Mask};
use crate::hand::{hand_keypoints_2d, HandMesh, KeypointRegressor, Keypoints2D, Mesh, MeshProvider, PinholeCamera};

/// Supplies the conditioning keypoints of each hand and re-detects keypoints
/// on a generated image, so pose error can drive strength selection.
pub trait PoseProbe: Sync {
    fn reference(&self, meshes: &[Mesh], regions: &[Mask], camera: &PinholeCamera) -> Result<Vec<Keypoints2D>>;
    fn detect(&self, image: &Image, regions: &[Mask], camera: &PinholeCamera) -> Vec<Result<Keypoints2D>>;
}

/// Regresses keypoints from full hand meshes. Detection reconstructs meshes
/// from the generated image with `provider`.
pub struct MeshPoseProbe<'a> {
    pub regressor: &'a KeypointRegressor,
    pub provider: &'a dyn MeshProvider,
}

impl MeshPoseProbe<'_> {
    fn keypoints(&self, mesh: Mesh, camera: &PinholeCamera) -> Result<Keypoints2D> {
        hand_keypoints_2d(&HandMesh::new(mesh)?, self.regressor, camera)
    }
}

impl PoseProbe for MeshPoseProbe<'_> {
    fn reference(&self, meshes: &[Mesh], _regions: &[Mask], camera: &PinholeCamera) -> Result<Vec<Keypoints2D>> {
        meshes.iter().map(|m| self.keypoints(m.clone(), camera)).collect()
    }

    fn detect(&self, image: &Image, regions: &[Mask], camera: &PinholeCamera) -> Vec<Result<Keypoints2D>> {
        self.provider
            .reconstruct(image, regions)
            .into_iter()
            .map(|m| m.and_then(|m| self.keypoints(m, camera)))
            .collect()
    }
}
