//! Delaunay triangulation of mesh nodes, backed by `spade` (exact
//! predicates), plus restriction to the semicircular body domain.

use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geom::{self, Vec2};

/// Delaunay triangulation of `points`, counter-clockwise index triples.
///
/// Fails on fewer than three points, non-finite or duplicate points, and
/// when every point is collinear.
pub fn delaunay_triangulate(points: &[Vec2]) -> Result<Vec<[usize; 3]>> {
    if points.len() < 3 {
        return Err(Error::Geometry(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("triangulation input"));
    }
    let mut keys: Vec<(u64, u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits(), i))
        .collect();
    keys.sort_unstable();
    if let Some(w) = keys.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
        return Err(Error::Geometry(format!("duplicate points {} and {}", w[0].2, w[1].2)));
    }

    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    // spade assigns vertex handles in insertion order
    for p in points {
        dt.insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::Geometry(format!("cannot insert point: {e:?}")))?;
    }
    debug_assert_eq!(dt.num_vertices(), points.len());
    if dt.num_inner_faces() == 0 {
        return Err(Error::Geometry("all points are collinear".into()));
    }

    let mut triangles: Vec<[usize; 3]> = dt
        .inner_faces()
        .map(|face| {
            let [a, b, c] = face.vertices().map(|v| v.index());
            if geom::orient(points[a], points[b], points[c]) < 0.0 {
                [a, c, b]
            } else {
                [a, b, c]
            }
        })
        .collect();
    // Canonical order, independent of spade's internal face numbering.
    for tri in &mut triangles {
        let k = (0..3).min_by_key(|&k| tri[k]).unwrap();
        tri.rotate_left(k);
    }
    triangles.sort_unstable();
    Ok(triangles)
}

/// Keep the triangles whose centroid lies in the upper half-disc of
/// `radius` (plus `slack`).
pub fn restrict_to_semicircle(
    points: &[Vec2],
    triangles: Vec<[usize; 3]>,
    radius: f64,
    slack: f64,
) -> Vec<[usize; 3]> {
    triangles
        .into_iter()
        .filter(|&[a, b, c]| {
            let g = geom::centroid(points[a], points[b], points[c]);
            g[1] > 0.0 && geom::norm(g) < radius + slack
        })
        .collect()
}
