//! Keypoint regression, projection and MPJPE.
//!
//! cargo run --example pose_error

use handfix::hand::{image_mpjpe, mpjpe, project, KeypointRegressor, PinholeCamera};
use handfix::Result;

fn main() -> Result<()> {
    // Two keypoints, each the mean of two vertices.
    let reg = KeypointRegressor::from_triplets(2, 4, &[(0, 0, 0.5), (0, 1, 0.5), (1, 2, 0.5), (1, 3, 0.5)])?;
    let verts = [[-0.5, 0.0, 2.0], [-0.3, 0.0, 2.0], [0.3, 0.1, 2.0], [0.5, 0.1, 2.0]];
    let joints = reg.apply(&verts)?;
    let camera = PinholeCamera::default_for(128, 128);
    let k = project(&joints, &camera)?;
    println!("projected joints: {k:?}");

    let shifted: Vec<[f64; 2]> = k.iter().map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
    println!("mpjpe after a (3, 4) shift = {}", mpjpe(&k, &shifted)?);
    println!("image mpjpe over hands with errors 2 and 4 = {:?}", image_mpjpe(&[2.0, 4.0]));
    Ok(())
}
