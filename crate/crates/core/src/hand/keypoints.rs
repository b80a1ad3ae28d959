use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{project, HandMesh, PinholeCamera, HAND_VERTEX_COUNT};

pub const KEYPOINT_COUNT: usize = 21;

/// Sparse `21 x 778` regressor from mesh vertices to 3-D joints; each row is a
/// convex combination of vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointRegressor {
    rows: Vec<Vec<(usize, f64)>>,
    cols: usize,
}

/// On-disk form: `{"rows": 21, "cols": 778, "entries": [[row, col, value], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegressorFile {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl KeypointRegressor {
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut out = vec![Vec::new(); rows];
        for &(r, c, v) in entries {
            if r >= rows || c >= cols {
                return Err(Error::InvalidRegressor(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidRegressor(format!("non-finite weight at ({r}, {c})")));
            }
            out[r].push((c, v));
        }
        let j = Self { rows: out, cols };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row.iter().map(|&(_, v)| v).sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidRegressor(format!("row {i} sums to {s}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: RegressorFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_triplets(f.rows, f.cols, &f.entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = RegressorFile {
            rows: self.rows(),
            cols: self.cols,
            entries: self.triplets(),
        };
        crate::io::write_atomic(path, serde_json::to_string(&f)?.as_bytes())
    }

    /// `J V` for an arbitrary vertex list of matching length.
    pub fn apply(&self, vertices: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
        if vertices.len() != self.cols {
            return Err(Error::shape(self.cols, vertices.len()));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| {
                let mut acc = [0.0; 3];
                for &(c, w) in row {
                    for k in 0..3 {
                        acc[k] += w * vertices[c][k];
                    }
                }
                acc
            })
            .collect())
    }
}

/// 3-D joints `J V` of a hand mesh.
pub fn regress_keypoints(mesh: &HandMesh, regressor: &KeypointRegressor) -> Result<Vec<[f64; 3]>> {
    if regressor.cols() != HAND_VERTEX_COUNT || regressor.rows() != KEYPOINT_COUNT {
        return Err(Error::shape((KEYPOINT_COUNT, HAND_VERTEX_COUNT), (regressor.rows(), regressor.cols())));
    }
    regressor.apply(&mesh.mesh().vertices)
}

/// Exactly 21 image-space joints in pixels. Serialized as `[[x, y], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Keypoints2D(Vec<[f64; 2]>);

impl Keypoints2D {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() != KEYPOINT_COUNT {
            return Err(Error::shape(KEYPOINT_COUNT, points.len()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite keypoint".into()));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.0
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self(self.0.iter().map(|p| [p[0] + dx, p[1] + dy]).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

impl TryFrom<Vec<[f64; 2]>> for Keypoints2D {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Keypoints2D> for Vec<[f64; 2]> {
    fn from(k: Keypoints2D) -> Self {
        k.0
    }
}

/// `K = Pi(J V)`.
pub fn hand_keypoints_2d(mesh: &HandMesh, regressor: &KeypointRegressor, camera: &PinholeCamera) -> Result<Keypoints2D> {
    let joints = regress_keypoints(mesh, regressor)?;
    Keypoints2D::new(project(&joints, camera)?)
}

/// Mean Euclidean distance between corresponding joints.
pub fn mpjpe(k: &[[f64; 2]], k_prime: &[[f64; 2]]) -> Result<f64> {
    if k.len() != k_prime.len() || k.is_empty() {
        return Err(Error::shape(k.len(), k_prime.len()));
    }
    let total: f64 = k
        .iter()
        .zip(k_prime)
        .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
        .sum();
    Ok(total / k.len() as f64)
}

/// Per-image error: the mean over all hands present.
pub fn image_mpjpe(per_hand: &[f64]) -> Option<f64> {
    (!per_hand.is_empty()).then(|| per_hand.iter().sum::<f64>() / per_hand.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(f: impl Fn(usize) -> [f64; 2]) -> Keypoints2D {
        Keypoints2D::new((0..KEYPOINT_COUNT).map(f).collect()).unwrap()
    }

    #[test]
    fn mpjpe_examples() {
        let k = kp(|i| [i as f64 * 3.1, 100.0 - i as f64]);
        assert_eq!(mpjpe(k.points(), k.points()).unwrap(), 0.0);
        assert_eq!(mpjpe(k.points(), k.translated(3.0, 4.0).points()).unwrap(), 5.0);
        assert_eq!(image_mpjpe(&[2.0, 4.0]), Some(3.0));
        assert_eq!(image_mpjpe(&[]), None);
        assert!(mpjpe(k.points(), &k.points()[..20]).is_err());
    }

    #[test]
    fn keypoints_require_21() {
        assert!(Keypoints2D::new(vec![[0.0, 0.0]; 20]).is_err());
        assert!(serde_json::from_str::<Keypoints2D>("[[1,2]]").is_err());
        let k = kp(|i| [i as f64, 0.5]);
        let s = serde_json::to_string(&k).unwrap();
        assert!(s.starts_with("[[0.0,0.5],[1.0,0.5]"));
    }

    #[test]
    fn regressor_rows_must_be_convex() {
        assert!(KeypointRegressor::from_triplets(1, 3, &[(0, 0, 0.5), (0, 1, 0.4)]).is_err());
        assert!(KeypointRegressor::from_triplets(1, 3, &[(0, 3, 1.0)]).is_err());
        let j = KeypointRegressor::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 0.5), (1, 1, 0.5)]).unwrap();
        let out = j.apply(&[[0.0, 0.0, 2.0], [2.0, 4.0, 4.0], [9.0, 8.0, 7.0]]).unwrap();
        assert_eq!(out, vec![[9.0, 8.0, 7.0], [1.0, 2.0, 3.0]]);
    }

    #[test]
    fn regressor_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.json");
        let j = KeypointRegressor::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 0.25), (1, 1, 0.75)]).unwrap();
        j.save(&p).unwrap();
        assert_eq!(KeypointRegressor::load(&p).unwrap(), j);
    }
}
