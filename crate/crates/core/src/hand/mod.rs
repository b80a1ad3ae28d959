//! Hand geometry: meshes, keypoint regression, pinhole projection, depth
//! rendering and pose error.

mod camera;
mod depth;
mod keypoints;
mod mesh;
mod provider;

pub use camera::{project, PinholeCamera};
pub use depth::{rasterize_depth, render_depth, render_hands, DepthMap, DepthRemap, RenderedHands, DEPTH_FAR, DEPTH_NEAR};
pub use keypoints::{
    hand_keypoints_2d, image_mpjpe, mpjpe, regress_keypoints, KeypointRegressor, Keypoints2D, KEYPOINT_COUNT,
};
pub use mesh::{HandMesh, Mesh, HAND_VERTEX_COUNT};
pub use provider::{foreground, BrightRegionLocalizer, FixtureMeshProvider, HandLocalizer, MeshProvider, OverrideLocalizer};
