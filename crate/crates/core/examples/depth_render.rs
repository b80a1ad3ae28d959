//! Renders two overlapping meshes to a normalized depth map and writes a
//! 16-bit PNG.
//!
//! cargo run --example depth_render -- [out.png]

use handfix::hand::{render_hands, Mesh, PinholeCamera};
use handfix::Result;

/// A tilted square patch centered at `(x, y)` in camera space.
fn patch(x: f64, y: f64, z: f64, half: f64, tilt: f64) -> Result<Mesh> {
    let v = |dx: f64, dy: f64| [x + dx, y + dy, z + tilt * dx];
    Mesh::new(
        vec![v(-half, -half), v(half, -half), v(half, half), v(-half, half)],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "depth.png".into());
    let camera = PinholeCamera::default_for(64, 64);
    let meshes = [patch(-0.3, 0.0, 4.0, 0.8, 0.5)?, patch(0.5, 0.2, 3.0, 0.5, -0.2)?];
    let r = render_hands(&meshes, &camera)?;

    for (i, s) in r.silhouettes.iter().enumerate() {
        let owned = r.owner.iter().filter(|o| **o == Some(i)).count();
        println!("hand {i}: {} pixels covered, {owned} visible", s.count());
    }
    let v = r.depth.values();
    let lit: Vec<f64> = v.iter().copied().filter(|&d| d > 0.0).collect();
    println!(
        "depth range over covered pixels: [{:.3}, {:.3}]",
        lit.iter().copied().fold(f64::INFINITY, f64::min),
        lit.iter().copied().fold(0.0, f64::max)
    );
    r.depth.save_png16(out.as_ref())?;
    println!("wrote {out}");
    Ok(())
}
