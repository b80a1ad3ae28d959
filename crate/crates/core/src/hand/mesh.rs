use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertex count of the parametric hand model.
pub const HAND_VERTEX_COUNT: usize = 778;

/// Triangle mesh in camera coordinates (depth positive along the view axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let m = Self { vertices, faces };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some((i, f)) = self.faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v >= n)) {
            return Err(Error::InvalidMesh(format!("face {i} {f:?} indexes past {n} vertices")));
        }
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        Ok(())
    }

    pub fn is_renderable(&self) -> bool {
        self.vertices.iter().all(|v| v[2] > 0.0)
    }

    pub fn translated(&self, offset: [f64; 3]) -> Mesh {
        Mesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + offset[0], v[1] + offset[1], v[2] + offset[2]])
                .collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| [v[0] * s, v[1] * s, v[2] * s]).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Loads `.json` (`{"vertices": [...], "faces": [...]}`) or OBJ-style
    /// `v`/`f` text (1-based faces) for any other extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mesh = if is_json {
            serde_json::from_str::<Mesh>(&text).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
        } else {
            parse_obj(&text).map_err(|reason| Error::Format {
                path: path.to_path_buf(),
                reason,
            })?
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let text = if is_json { serde_json::to_string(self)? } else { self.to_obj() };
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {} {} {}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        s
    }
}

fn parse_obj(text: &str) -> std::result::Result<Mesh, String> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                if c.len() != 3 {
                    return Err(format!("line {}: vertex needs 3 coordinates", lineno + 1));
                }
                vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|t| t.split('/').next().unwrap_or("").parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                if idx.len() < 3 || idx.contains(&0) {
                    return Err(format!("line {}: face needs >= 3 one-based indices", lineno + 1));
                }
                // fan-triangulate polygons
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0] - 1, idx[k] - 1, idx[k + 1] - 1]);
                }
            }
            _ => {}
        }
    }
    Ok(Mesh { vertices, faces })
}

/// A reconstructed hand: a mesh with exactly [`HAND_VERTEX_COUNT`] vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mesh", into = "Mesh")]
pub struct HandMesh(Mesh);

impl HandMesh {
    pub fn new(mesh: Mesh) -> Result<Self> {
        mesh.validate()?;
        if mesh.vertices.len() != HAND_VERTEX_COUNT {
            return Err(Error::InvalidMesh(format!(
                "hand mesh needs {HAND_VERTEX_COUNT} vertices, got {}",
                mesh.vertices.len()
            )));
        }
        Ok(Self(mesh))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.0
    }
}

impl AsRef<Mesh> for HandMesh {
    fn as_ref(&self) -> &Mesh {
        &self.0
    }
}

impl AsRef<Mesh> for Mesh {
    fn as_ref(&self) -> &Mesh {
        self
    }
}

impl TryFrom<Mesh> for HandMesh {
    type Error = Error;
    fn try_from(m: Mesh) -> Result<Self> {
        Self::new(m)
    }
}

impl From<HandMesh> for Mesh {
    fn from(h: HandMesh) -> Mesh {
        h.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Mesh {
        Mesh::new(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.5]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn face_index_out_of_range() {
        assert!(Mesh::new(vec![[0.0, 0.0, 1.0]], vec![[0, 0, 1]]).is_err());
    }

    #[test]
    fn hand_mesh_vertex_count() {
        assert!(HandMesh::new(tri()).is_err());
        let m = Mesh::new(vec![[0.0, 0.0, 1.0]; HAND_VERTEX_COUNT], vec![[0, 1, 2]]).unwrap();
        assert!(HandMesh::new(m).is_ok());
    }

    #[test]
    fn obj_parsing_handles_slashes_and_quads() {
        let m = parse_obj("# c\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\nf 1/1 2/2 3/3 4/4\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(parse_obj("v 1 2\n").is_err());
        assert!(parse_obj("f 0 1 2\n").is_err());
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mesh::new(
            vec![[0.1, -2.0 / 3.0, 1.0 + 1e-13], [1e-300, 0.0, 7.25], [3.0, 1.0 / 7.0, 2.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for name in ["m.json", "m.obj"] {
            let p = dir.path().join(name);
            m.save(&p).unwrap();
            assert_eq!(Mesh::load(&p).unwrap(), m);
        }
    }
}
