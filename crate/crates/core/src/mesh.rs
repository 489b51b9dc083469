use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec2};

/// Vertices within this distance of `y = 0` are clamped.
pub const FIXED_Y_TOL: f64 = 1e-9;

/// Triangle mesh in its rest configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub rest_positions: Vec<Vec2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub fixed_mask: Vec<bool>,
}

impl Mesh {
    /// Build a mesh, deriving the fixed mask from the rest `y` coordinates.
    pub fn new(rest_positions: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let fixed_mask = rest_positions
            .iter()
            .map(|p| p[1].abs() <= FIXED_Y_TOL)
            .collect();
        let mesh = Mesh {
            rest_positions,
            triangles,
            fixed_mask,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.rest_positions.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rest_positions.len();
        if self.fixed_mask.len() != n {
            return Err(Error::Geometry("fixed mask length differs from vertex count".into()));
        }
        if self.rest_positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rest positions"));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::Geometry(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Geometry(format!("triangle {t} repeats a vertex")));
            }
            if self.signed_area(&self.rest_positions, t) <= 0.0 {
                return Err(Error::Geometry(format!("triangle {t} is not counter-clockwise")));
            }
        }
        for (i, (p, &fixed)) in self.rest_positions.iter().zip(&self.fixed_mask).enumerate() {
            if fixed != (p[1].abs() <= FIXED_Y_TOL) {
                return Err(Error::Geometry(format!("vertex {i} fixed flag disagrees with its y")));
            }
        }
        Ok(())
    }

    pub fn corners(&self, positions: &[Vec2], t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [positions[a], positions[b], positions[c]]
    }

    pub fn signed_area(&self, positions: &[Vec2], t: usize) -> f64 {
        let [a, b, c] = self.corners(positions, t);
        0.5 * geom::orient(a, b, c)
    }

    pub fn rest_centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.corners(&self.rest_positions, t);
        geom::centroid(a, b, c)
    }

    /// Number of triangles using each undirected edge `(lo, hi)`.
    pub fn edge_counts(&self) -> BTreeMap<(usize, usize), usize> {
        edge_counts(&self.triangles)
    }

    /// Edges used by exactly one triangle.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        self.edge_counts()
            .into_iter()
            .filter(|&(_, n)| n == 1)
            .map(|(e, _)| e)
            .collect()
    }
}

pub(crate) fn edge_counts(triangles: &[[usize; 3]]) -> BTreeMap<(usize, usize), usize> {
    let mut counts = BTreeMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    counts
}
