//! Ring probe, point location and nearest-edge penalty contact.
//!
//! Each probe point that lies inside a (deformed) triangle is pushed toward
//! the nearest of the triangle's three edges by a spring of stiffness `κ`.
//! With `d` the distance to that edge and `û` the unit vector from the point
//! to its orthogonal projection on the edge:
//!
//! ```text
//! energy = ½ κ d²      force on probe point = κ d û
//! ```
//!
//! The reaction `-κ d û` is split over the edge endpoints by the barycentric
//! coordinates of the projection, which is exactly `-∂energy/∂vertex`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::config::ProbeConfig;
use crate::geom::{self, Vec2};
use crate::mesh::Mesh;
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// Center of the ring.
    pub pose: Vec2,
    pub radius: f64,
    pub n_points: usize,
    pub stiffness: f64,
    pub noise_sigma: f64,
}

impl Probe {
    pub fn new(config: &ProbeConfig, pose: Vec2) -> Probe {
        Probe {
            pose,
            radius: config.radius,
            n_points: config.n_points,
            stiffness: config.stiffness,
            noise_sigma: config.noise_sigma,
        }
    }

    pub fn at(&self, pose: Vec2) -> Probe {
        Probe { pose, ..*self }
    }

    /// Length of a flattened force reading.
    pub fn reading_len(&self) -> usize {
        2 * self.n_points
    }
}

/// Points equally spaced on the ring, starting at angle 0.
pub fn probe_points(probe: &Probe) -> Vec<Vec2> {
    (0..probe.n_points)
        .map(|i| {
            let a = TAU * i as f64 / probe.n_points as f64;
            [probe.pose[0] + probe.radius * a.cos(), probe.pose[1] + probe.radius * a.sin()]
        })
        .collect()
}

/// Uniform grid over triangle bounding boxes within a region.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl SpatialGrid {
    /// Index every triangle whose bounding box meets `[lo, hi]`.
    pub fn build(positions: &[Vec2], triangles: &[[usize; 3]], cell: f64, lo: Vec2, hi: Vec2) -> Self {
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut grid = SpatialGrid {
            origin: lo,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        };
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| positions[i]);
            let bmin = [a[0].min(b[0]).min(c[0]), a[1].min(b[1]).min(c[1])];
            let bmax = [a[0].max(b[0]).max(c[0]), a[1].max(b[1]).max(c[1])];
            if bmax[0] < lo[0] || bmax[1] < lo[1] || bmin[0] > hi[0] || bmin[1] > hi[1] {
                continue;
            }
            let (i0, j0) = grid.cell_of(bmin);
            let (i1, j1) = grid.cell_of(bmax);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.cells[j * nx + i].push(t);
                }
            }
        }
        grid
    }

    /// Grid covering the whole mesh.
    pub fn over_mesh(positions: &[Vec2], triangles: &[[usize; 3]], cell: f64) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in positions {
            lo = [lo[0].min(p[0]), lo[1].min(p[1])];
            hi = [hi[0].max(p[0]), hi[1].max(p[1])];
        }
        SpatialGrid::build(positions, triangles, cell, lo, hi)
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (
            clampi((p[0] - self.origin[0]) / self.cell, self.nx),
            clampi((p[1] - self.origin[1]) / self.cell, self.ny),
        )
    }

    /// Candidate triangles for `p`, ascending. Points outside the region
    /// map to border cells, so callers must still run the exact test.
    pub fn candidates(&self, p: Vec2) -> &[usize] {
        let (i, j) = self.cell_of(p);
        &self.cells[j * self.nx + i]
    }

    /// Lowest-index triangle containing `p`.
    pub fn locate(&self, p: Vec2, positions: &[Vec2], triangles: &[[usize; 3]]) -> Option<usize> {
        self.candidates(p).iter().copied().find(|&t| {
            let [a, b, c] = triangles[t].map(|i| positions[i]);
            geom::point_in_triangle(p, a, b, c)
        })
    }
}

/// Lowest-index triangle containing `p`, by exhaustive search.
pub fn locate_brute_force(p: Vec2, positions: &[Vec2], triangles: &[[usize; 3]]) -> Option<usize> {
    triangles.iter().position(|tri| {
        let [a, b, c] = tri.map(|i| positions[i]);
        geom::point_in_triangle(p, a, b, c)
    })
}

/// Contact state of one probe point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointContact {
    pub element: Option<usize>,
    pub depth: f64,
    /// Unit push-out direction (zero when not in contact).
    pub direction: Vec2,
    /// Nearest edge `(a, b)` of the containing element.
    pub edge: Option<(usize, usize)>,
    /// Position of the projection along the edge: 0 at `a`, 1 at `b`.
    pub split: f64,
    /// Force on the probe point, `κ d û`.
    pub force: Vec2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactResult {
    pub points: Vec<PointContact>,
    pub energy: f64,
    /// Reaction forces on mesh vertices, two entries per contacting point.
    pub vertex_forces: Vec<(usize, Vec2)>,
}

impl ContactResult {
    pub fn probe_force_sum(&self) -> Vec2 {
        self.points.iter().fold([0.0; 2], |acc, p| geom::add(acc, p.force))
    }

    pub fn reaction_sum(&self) -> Vec2 {
        self.vertex_forces.iter().fold([0.0; 2], |acc, (_, f)| geom::add(acc, *f))
    }

    pub fn in_contact(&self) -> bool {
        self.points.iter().any(|p| p.element.is_some())
    }

    /// Add `-force` of every reaction into a gradient buffer.
    pub fn accumulate_gradient(&self, grad: &mut [Vec2]) {
        for &(v, f) in &self.vertex_forces {
            grad[v][0] -= f[0];
            grad[v][1] -= f[1];
        }
    }
}

/// Penalty contact between the probe ring and the deformed mesh.
pub fn contact_energy_and_forces(mesh: &Mesh, positions: &[Vec2], probe: &Probe) -> ContactResult {
    let pts = probe_points(probe);
    let r = probe.radius;
    let lo = [probe.pose[0] - r, probe.pose[1] - r];
    let hi = [probe.pose[0] + r, probe.pose[1] + r];
    let grid = SpatialGrid::build(positions, &mesh.triangles, 0.5 * r, lo, hi);
    contact_with_grid(mesh, positions, probe, &pts, &grid)
}

pub(crate) fn contact_with_grid(
    mesh: &Mesh,
    positions: &[Vec2],
    probe: &Probe,
    pts: &[Vec2],
    grid: &SpatialGrid,
) -> ContactResult {
    let kappa = probe.stiffness;
    let mut out = ContactResult {
        points: Vec::with_capacity(pts.len()),
        energy: 0.0,
        vertex_forces: Vec::new(),
    };
    for &p in pts {
        let Some(t) = grid.locate(p, positions, &mesh.triangles) else {
            out.points.push(PointContact::default());
            continue;
        };
        let tri = mesh.triangles[t];
        let mut best: Option<(f64, usize, usize, f64, Vec2)> = None;
        for k in 0..3 {
            let (ia, ib) = (tri[k], tri[(k + 1) % 3]);
            let (a, b) = (positions[ia], positions[ib]);
            let e = geom::sub(b, a);
            let len2 = geom::dot(e, e);
            if len2 == 0.0 {
                continue;
            }
            let s = geom::dot(geom::sub(p, a), e) / len2;
            let foot = geom::add(a, geom::scale(e, s));
            let d = geom::dist(p, foot);
            if best.is_none_or(|(bd, ..)| d < bd) {
                best = Some((d, ia, ib, s, foot));
            }
        }
        let Some((d, ia, ib, s, foot)) = best else {
            out.points.push(PointContact { element: Some(t), ..Default::default() });
            continue;
        };
        let mut contact = PointContact {
            element: Some(t),
            depth: d,
            edge: Some((ia, ib)),
            split: s,
            ..Default::default()
        };
        if d > 0.0 {
            let u = geom::scale(geom::sub(foot, p), 1.0 / d);
            let f = geom::scale(u, kappa * d);
            contact.direction = u;
            contact.force = f;
            out.energy += 0.5 * kappa * d * d;
            out.vertex_forces.push((ia, geom::scale(f, -(1.0 - s))));
            out.vertex_forces.push((ib, geom::scale(f, -s)));
        }
        out.points.push(contact);
    }
    out
}

/// Flattened per-point forces `(fx0, fy0, fx1, fy1, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceReading(pub Vec<f64>);

impl ForceReading {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Exact contact forces plus i.i.d. `Normal(0, noise_sigma)` per component.
pub fn read_sensor(contact: &ContactResult, noise_sigma: f64, rng: &mut SimRng) -> ForceReading {
    let mut out = Vec::with_capacity(2 * contact.points.len());
    for p in &contact.points {
        for c in 0..2 {
            out.push(p.force[c] + rng::normal(rng, 0.0, noise_sigma));
        }
    }
    ForceReading(out)
}
