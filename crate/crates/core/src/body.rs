//! Random semicircular bodies: jittered nodes, Delaunay mesh, per-element
//! materials and an optional stiff circular lump.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::BodyGenConfig;
use crate::delaunay;
use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::mesh::{self, Mesh};
use crate::rng::{self, Purpose, SimRng};

/// Boundary triangles flatter than this are trimmed from generated meshes.
const SLIVER_ANGLE: f64 = 15.0 * PI / 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialField {
    pub young: Vec<f64>,
    pub poisson: Vec<f64>,
}

impl MaterialField {
    pub fn uniform(n: usize, young: f64, poisson: f64) -> MaterialField {
        MaterialField {
            young: vec![young; n],
            poisson: vec![poisson; n],
        }
    }

    pub fn len(&self) -> usize {
        self.young.len()
    }

    pub fn is_empty(&self) -> bool {
        self.young.is_empty()
    }

    pub fn validate(&self, n_triangles: usize) -> Result<()> {
        if self.young.len() != n_triangles || self.poisson.len() != n_triangles {
            return Err(Error::ShapeMismatch(format!(
                "{} young / {} poisson values for {n_triangles} triangles",
                self.young.len(),
                self.poisson.len()
            )));
        }
        if self.young.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput("young modulus must be positive".into()));
        }
        if self.poisson.iter().any(|&nu| !(nu > 0.0 && nu < 0.5)) {
            return Err(Error::InvalidInput("poisson ratio must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Circular inclusion with its own material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpSpec {
    pub center: Vec2,
    pub radius: f64,
    pub young: f64,
    pub poisson: f64,
}

impl LumpSpec {
    pub fn contains(&self, p: Vec2) -> bool {
        geom::dist(p, self.center) < self.radius
    }

    /// Largest radius the disc may grow to while staying `clearance` inside
    /// the half-disc of `body_radius`.
    pub fn max_radius(&self, body_radius: f64, clearance: f64) -> f64 {
        (self.center[1] - clearance).min(body_radius - geom::norm(self.center) - clearance)
    }
}

/// Per-body means the element materials are drawn around.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialMeans {
    pub young: f64,
    pub poisson: f64,
}

/// Everything the palpation hides: mesh, element materials and lump.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    pub mesh: Arc<Mesh>,
    /// Effective element materials (lump elements overridden).
    pub materials: MaterialField,
    /// Background draw for every element, including those under the lump.
    pub background: MaterialField,
    pub means: MaterialMeans,
    pub lump: Option<LumpSpec>,
    pub body_radius: f64,
    /// Master seed the body was drawn from.
    pub seed: u64,
    /// Index of the body's random stream under `seed`.
    pub index: u64,
    pub change_flag: bool,
}

impl BodyModel {
    /// Assemble a body from explicit parts; lump elements are recomputed.
    pub fn from_parts(
        mesh: Mesh,
        background: MaterialField,
        lump: Option<LumpSpec>,
        body_radius: f64,
    ) -> Result<BodyModel> {
        background.validate(mesh.n_triangles())?;
        let n = background.len();
        let means = MaterialMeans {
            young: background.young.iter().sum::<f64>() / n as f64,
            poisson: background.poisson.iter().sum::<f64>() / n as f64,
        };
        let mut body = BodyModel {
            mesh: Arc::new(mesh),
            materials: background.clone(),
            background,
            means,
            lump,
            body_radius,
            seed: 0,
            index: 0,
            change_flag: false,
        };
        body.assign_lump_materials();
        Ok(body)
    }

    /// Elements whose rest centroid lies strictly inside the lump disc.
    pub fn lump_elements(&self) -> Vec<bool> {
        let m = &self.mesh;
        (0..m.n_triangles())
            .map(|t| self.lump.is_some_and(|l| l.contains(m.rest_centroid(t))))
            .collect()
    }

    fn assign_lump_materials(&mut self) {
        let inside = self.lump_elements();
        self.materials = self.background.clone();
        if let Some(lump) = self.lump {
            for (t, _) in inside.iter().enumerate().filter(|(_, &b)| b) {
                self.materials.young[t] = lump.young;
                self.materials.poisson[t] = lump.poisson;
            }
        }
    }

    /// The same body with the lump removed; every element keeps its
    /// background material.
    pub fn without_lump(&self) -> BodyModel {
        let mut b = self.clone();
        b.lump = None;
        b.change_flag = false;
        b.materials = b.background.clone();
        b
    }

    /// The same mesh and background, every element set to the body means.
    pub fn homogenized(&self) -> BodyModel {
        let n = self.mesh.n_triangles();
        let mut b = self.clone();
        b.background = MaterialField::uniform(n, self.means.young, self.means.poisson);
        b.assign_lump_materials();
        b
    }

    /// Enlarge the lump by exactly `delta` (> 0) and reassign materials.
    pub fn grow_lump(&self, delta: f64) -> Result<BodyModel> {
        let lump = self.lump.ok_or(Error::NoLump)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("lump growth {delta} must be positive")));
        }
        let mut b = self.clone();
        b.lump = Some(LumpSpec {
            radius: lump.radius + delta,
            ..lump
        });
        b.assign_lump_materials();
        Ok(b)
    }
}

/// Body number 0 of the stream family rooted at `seed`.
pub fn generate_body(seed: u64, config: &BodyGenConfig) -> Result<BodyModel> {
    generate_indexed_body(seed, 0, config)
}

/// Body `index` of the dataset rooted at `master_seed`.
pub fn generate_indexed_body(master_seed: u64, index: u64, config: &BodyGenConfig) -> Result<BodyModel> {
    let mut rng = rng::stream(master_seed, index, Purpose::Body);
    let mut body = sample_body(&mut rng, config)?;
    body.seed = master_seed;
    body.index = index;
    Ok(body)
}

fn sample_body(rng: &mut SimRng, cfg: &BodyGenConfig) -> Result<BodyModel> {
    let radius = rng::normal(rng, cfg.radius_mean, cfg.radius_std);
    if radius <= 2.0 * cfg.grid_spacing.max(cfg.perimeter_spacing) {
        return Err(Error::Geometry(format!("body radius {radius} too small for the mesh spacing")));
    }

    let mut points = semicircle_nodes(radius, cfg.grid_spacing, cfg.perimeter_spacing);
    for p in &mut points {
        let dx = rng::normal(rng, 0.0, cfg.node_jitter);
        let dy = rng::normal(rng, 0.0, cfg.node_jitter);
        p[0] += dx;
        // base nodes stay on y = 0 so they remain clamped
        if p[1] != 0.0 {
            p[1] += dy;
        }
    }
    let mesh = mesh_semicircle(points, radius, cfg.perimeter_spacing)?;

    let means = MaterialMeans {
        young: rng::uniform(rng, cfg.young_mean_lo, cfg.young_mean_hi),
        poisson: rng::uniform(rng, cfg.poisson_mean_lo, cfg.poisson_mean_hi),
    };
    let background = sample_background(rng, mesh.n_triangles(), means, cfg);

    let change_flag = rng.gen_bool(cfg.p_change);
    let lump_drawn = rng.gen_bool(cfg.p_lump);
    let lump = if change_flag || lump_drawn {
        Some(place_lump(rng, radius, change_flag, cfg)?)
    } else {
        None
    };

    let mut body = BodyModel::from_parts(mesh, background, lump, radius)?;
    body.means = means;
    body.change_flag = change_flag;
    Ok(body)
}

fn sample_background(
    rng: &mut SimRng,
    n: usize,
    means: MaterialMeans,
    cfg: &BodyGenConfig,
) -> MaterialField {
    let mut field = MaterialField {
        young: Vec::with_capacity(n),
        poisson: Vec::with_capacity(n),
    };
    let young_floor = 1e-3 * means.young;
    for _ in 0..n {
        let e = rng::normal(rng, means.young, cfg.young_std);
        let nu = rng::normal(rng, means.poisson, cfg.poisson_std);
        field.young.push(e.max(young_floor));
        field.poisson.push(nu.clamp(cfg.poisson_min, cfg.poisson_max));
    }
    field
}

fn place_lump(rng: &mut SimRng, body_radius: f64, change: bool, cfg: &BodyGenConfig) -> Result<LumpSpec> {
    let (lo, hi) = if change {
        (cfg.lump_radius_change_lo, cfg.lump_radius_change_hi)
    } else {
        (cfg.lump_radius_no_change_lo, cfg.lump_radius_no_change_hi)
    };
    // Changed lumps must still fit after growing.
    let headroom = if change {
        cfg.lump_growth_mean + 4.0 * cfg.lump_growth_std
    } else {
        0.0
    };
    for _ in 0..cfg.lump_max_retries {
        let rho = rng::uniform(rng, cfg.lump_center_lo, cfg.lump_center_hi);
        let r = rng::uniform(rng, lo, hi);
        let reach = r + headroom + cfg.lump_clearance;
        if rho + reach > body_radius || reach >= rho {
            continue;
        }
        let margin = (reach / rho).asin();
        let phi = rng::uniform(rng, margin, PI - margin);
        return Ok(LumpSpec {
            center: [rho * phi.cos(), rho * phi.sin()],
            radius: r,
            young: cfg.lump_young,
            poisson: cfg.lump_poisson,
        });
    }
    Err(Error::LumpPlacement(cfg.lump_max_retries))
}

/// Resample the background materials around the body's means. Lump
/// elements keep the lump material; the mesh is shared.
pub fn perturb_materials(body: &BodyModel, rng: &mut SimRng, cfg: &BodyGenConfig) -> BodyModel {
    let mut out = body.clone();
    out.background = sample_background(rng, body.mesh.n_triangles(), body.means, cfg);
    out.assign_lump_materials();
    out
}

/// Grow the lump of a change-flagged body by a positive normal draw.
pub fn apply_change(body: &BodyModel, rng: &mut SimRng, cfg: &BodyGenConfig) -> Result<BodyModel> {
    let lump = body.lump.ok_or(Error::NoLump)?;
    if !body.change_flag {
        return Err(Error::InvalidInput("body is not flagged for change".into()));
    }
    let room = lump.max_radius(body.body_radius, cfg.lump_clearance) - lump.radius;
    if room <= 0.0 {
        return Err(Error::LumpPlacement(0));
    }
    let mut delta = None;
    for _ in 0..cfg.lump_max_retries {
        let d = rng::normal(rng, cfg.lump_growth_mean, cfg.lump_growth_std);
        if d > 0.0 && d <= room {
            delta = Some(d);
            break;
        }
    }
    // A degenerate distribution (zero std, mean outside the range) lands here.
    let delta = delta.unwrap_or_else(|| cfg.lump_growth_mean.clamp(f64::MIN_POSITIVE, room));
    body.grow_lump(delta)
}

/// Interior grid nodes at `grid` spacing plus arc nodes at `perimeter`
/// spacing, for the half-disc `y >= 0` of radius `radius`.
pub fn semicircle_nodes(radius: f64, grid: f64, perimeter: f64) -> Vec<Vec2> {
    let mut points = Vec::new();
    let inner = radius - 0.5 * grid;
    let n = (inner / grid).floor() as i64;
    for j in 0..=n {
        for i in -n..=n {
            let p = [i as f64 * grid, j as f64 * grid];
            if geom::norm(p) < inner {
                points.push(p);
            }
        }
    }
    points.extend(arc_nodes(radius, perimeter));
    points
}

fn arc_nodes(radius: f64, perimeter: f64) -> Vec<Vec2> {
    let segments = ((PI * radius) / perimeter).ceil().max(2.0) as usize;
    (0..=segments)
        .map(|k| {
            if k == 0 {
                [radius, 0.0]
            } else if k == segments {
                [-radius, 0.0]
            } else {
                let a = PI * k as f64 / segments as f64;
                [radius * a.cos(), radius * a.sin()]
            }
        })
        .collect()
}

/// Triangulate nodes, keep the half-disc, trim boundary slivers and drop
/// unused nodes.
fn mesh_semicircle(points: Vec<Vec2>, radius: f64, perimeter: f64) -> Result<Mesh> {
    let tris = delaunay::delaunay_triangulate(&points)?;
    let tris = delaunay::restrict_to_semicircle(&points, tris, radius, 0.25 * perimeter);
    let tris = trim_boundary_slivers(&points, tris);
    let mesh = compact(points, tris)?;
    if mesh.n_triangles() < 3 {
        return Err(Error::Geometry(format!("mesh has only {} triangles", mesh.n_triangles())));
    }
    Ok(mesh)
}

/// Remove boundary triangles whose smallest angle is below
/// [`SLIVER_ANGLE`], as long as each of their vertices stays in use.
fn trim_boundary_slivers(points: &[Vec2], mut tris: Vec<[usize; 3]>) -> Vec<[usize; 3]> {
    loop {
        let counts = mesh::edge_counts(&tris);
        let mut uses = vec![0usize; points.len()];
        for tri in &tris {
            for &v in tri {
                uses[v] += 1;
            }
        }
        let victim = tris.iter().position(|tri| {
            let on_boundary = (0..3).any(|k| {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                counts[&(a.min(b), a.max(b))] == 1
            });
            on_boundary
                && tri.iter().all(|&v| uses[v] > 1)
                && geom::min_angle(points[tri[0]], points[tri[1]], points[tri[2]]) < SLIVER_ANGLE
        });
        match victim {
            Some(t) => {
                tris.remove(t);
            }
            None => return tris,
        }
    }
}

fn compact(points: Vec<Vec2>, tris: Vec<[usize; 3]>) -> Result<Mesh> {
    let mut remap = vec![usize::MAX; points.len()];
    let mut kept = Vec::new();
    for tri in &tris {
        for &v in tri {
            if remap[v] == usize::MAX {
                remap[v] = 0;
            }
        }
    }
    for (i, p) in points.into_iter().enumerate() {
        if remap[i] != usize::MAX {
            remap[i] = kept.len();
            kept.push(p);
        }
    }
    let tris = tris.into_iter().map(|t| t.map(|v| remap[v])).collect();
    Mesh::new(kept, tris)
}

/// A mirror-symmetric homogeneous body (no jitter): the right half is
/// triangulated and reflected onto the left, so vertex `i` and
/// `mirror[i]` are reflections of each other about `x = 0`.
pub fn symmetric_body(
    radius: f64,
    grid: f64,
    perimeter: f64,
    young: f64,
    poisson: f64,
) -> Result<(BodyModel, Vec<usize>)> {
    let half: Vec<Vec2> = semicircle_nodes(radius, grid, perimeter)
        .into_iter()
        .filter(|p| p[0] >= 0.0)
        .map(|p| if p[0].abs() < 1e-12 { [0.0, p[1]] } else { p })
        .collect();
    let tris = delaunay::delaunay_triangulate(&half)?;
    let tris: Vec<[usize; 3]> = delaunay::restrict_to_semicircle(&half, tris, radius, 0.25 * perimeter)
        .into_iter()
        .filter(|&[a, b, c]| geom::centroid(half[a], half[b], half[c])[0] > 0.0)
        .collect();

    let mut points = half.clone();
    let mut image = vec![usize::MAX; half.len()];
    for (i, p) in half.iter().enumerate() {
        if p[0] == 0.0 {
            image[i] = i;
        } else {
            image[i] = points.len();
            points.push([-p[0], p[1]]);
        }
    }
    let mut all = tris.clone();
    all.extend(tris.iter().map(|&[a, b, c]| [image[a], image[c], image[b]]));

    let mut mirror = vec![0; points.len()];
    for (i, &j) in image.iter().enumerate() {
        mirror[i] = j;
        mirror[j] = i;
    }
    let mesh = Mesh::new(points, all)?;
    let n = mesh.n_triangles();
    let body = BodyModel::from_parts(mesh, MaterialField::uniform(n, young, poisson), None, radius)?;
    Ok((body, mirror))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> BodyGenConfig {
        BodyGenConfig::default()
    }

    #[test]
    fn same_seed_same_body() {
        let a = generate_body(7, &cfg()).unwrap();
        let b = generate_body(7, &cfg()).unwrap();
        assert_eq!(a, b);
        let c = generate_body(8, &cfg()).unwrap();
        assert_ne!(a.mesh.rest_positions, c.mesh.rest_positions);
    }

    #[test]
    fn lump_probability_zero_gives_no_lump() {
        let mut c = cfg();
        c.p_lump = 0.0;
        c.p_change = 0.0;
        for seed in 0..10 {
            assert!(generate_body(seed, &c).unwrap().lump.is_none());
        }
    }

    #[test]
    fn young_within_six_sigma_or_lump() {
        let c = cfg();
        for seed in 0..20 {
            let body = generate_body(seed, &c).unwrap();
            let inside = body.lump_elements();
            for (t, &e) in body.materials.young.iter().enumerate() {
                if inside[t] {
                    assert_eq!(e, 0.01);
                    assert_eq!(body.materials.poisson[t], 0.1);
                } else {
                    assert!((e - body.means.young).abs() <= 6.0 * 0.0002, "{e}");
                    let nu = body.materials.poisson[t];
                    assert!((0.01..=0.45).contains(&nu));
                }
            }
            assert!((0.0027..=0.0033).contains(&body.means.young));
            assert!((0.09..=0.11).contains(&body.means.poisson));
        }
    }

    #[test]
    fn mesh_is_watertight_and_clamped() {
        for seed in 0..20 {
            let body = generate_body(seed, &cfg()).unwrap();
            let mesh = &body.mesh;
            assert!(mesh.edge_counts().values().all(|&n| n == 1 || n == 2));
            assert!(mesh.fixed_mask.iter().filter(|&&f| f).count() >= 4);
            for (p, &f) in mesh.rest_positions.iter().zip(&mesh.fixed_mask) {
                assert_eq!(f, p[1].abs() <= 1e-9);
                assert!(p[1] >= 0.0);
            }
            mesh.validate().unwrap();
        }
    }

    #[test]
    fn lump_fits_inside_body() {
        let c = cfg();
        for seed in 0..50 {
            let body = generate_body(seed, &c).unwrap();
            let lump = body.lump.unwrap();
            assert!(lump.max_radius(body.body_radius, c.lump_clearance) >= lump.radius);
            let rho = geom::norm(lump.center);
            assert!((0.44..=0.55).contains(&rho));
            let range = if body.change_flag { 0.07..=0.15 } else { 0.11..=0.21 };
            assert!(range.contains(&lump.radius));
        }
    }

    #[test]
    fn perturb_is_deterministic_and_keeps_lump() {
        let c = cfg();
        let body = generate_body(3, &c).unwrap();
        let a = perturb_materials(&body, &mut rng::stream(3, 0, Purpose::Perturb), &c);
        let b = perturb_materials(&body, &mut rng::stream(3, 0, Purpose::Perturb), &c);
        assert_eq!(a, b);
        assert_eq!(a.mesh, body.mesh);
        assert_ne!(a.background, body.background);
        for (t, &inside) in body.lump_elements().iter().enumerate() {
            if inside {
                assert_eq!(a.materials.young[t], body.materials.young[t]);
                assert_eq!(a.materials.poisson[t], body.materials.poisson[t]);
            }
        }
    }

    #[test]
    fn perturbed_young_mean_is_unbiased() {
        // Mean over background elements of 1000 independent draws.
        let c = cfg();
        let body = generate_body(11, &c).unwrap();
        let inside = body.lump_elements();
        let mut rng = rng::stream(11, 0, Purpose::Perturb);
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..1000 {
            let p = perturb_materials(&body, &mut rng, &c);
            for (t, &e) in p.materials.young.iter().enumerate() {
                if !inside[t] {
                    total += e;
                    count += 1;
                }
            }
        }
        let mean = total / count as f64;
        let bound = 3.0 * c.young_std / (count as f64).sqrt();
        assert!((mean - body.means.young).abs() < bound, "{mean} vs {}", body.means.young);
    }

    #[test]
    fn grow_lump_exact() {
        let body = generate_body(5, &cfg()).unwrap();
        let mut body = body;
        let mut lump = body.lump.unwrap();
        lump.radius = 0.10;
        body.lump = Some(lump);
        let grown = body.grow_lump(0.03).unwrap();
        let g = grown.lump.unwrap();
        assert!((g.radius - 0.13).abs() < 1e-15);
        assert_eq!(g.center, lump.center);
    }

    #[test]
    fn apply_change_grows_and_recounts() {
        let mut c = cfg();
        c.p_change = 1.0;
        for seed in 0..30 {
            let body = generate_body(seed, &c).unwrap();
            assert!(body.change_flag);
            let mut rng = rng::stream(seed, 0, Purpose::Change);
            let changed = apply_change(&body, &mut rng, &c).unwrap();
            let (before, after) = (body.lump.unwrap(), changed.lump.unwrap());
            assert!(after.radius > before.radius);
            assert_eq!(after.center, before.center);
            assert!(after.radius <= after.max_radius(body.body_radius, c.lump_clearance) + 1e-12);
            // independent recount against the enlarged disc
            let mesh = &changed.mesh;
            let recount = (0..mesh.n_triangles())
                .filter(|&t| geom::dist(mesh.rest_centroid(t), after.center) < after.radius)
                .count();
            let old = body.lump_elements().iter().filter(|&&b| b).count();
            assert!(recount >= old);
            assert_eq!(changed.materials.young.iter().filter(|&&e| e == 0.01).count(), recount);
        }
    }

    #[test]
    fn apply_change_rejects_unflagged_or_lump_free() {
        let mut c = cfg();
        c.p_change = 0.0;
        let body = generate_body(1, &c).unwrap();
        let mut rng = rng::stream(1, 0, Purpose::Change);
        assert!(apply_change(&body, &mut rng, &c).is_err());
        let mut flagged = body.without_lump();
        flagged.change_flag = true;
        assert!(matches!(apply_change(&flagged, &mut rng, &c), Err(Error::NoLump)));
    }

    #[test]
    fn symmetric_body_mirrors() {
        let (body, mirror) = symmetric_body(1.0, 0.15, 0.1, 0.003, 0.1).unwrap();
        let m = &body.mesh;
        for (i, &j) in mirror.iter().enumerate() {
            let (p, q) = (m.rest_positions[i], m.rest_positions[j]);
            assert_eq!(p[0], -q[0]);
            assert_eq!(p[1], q[1]);
        }
        assert!(m.edge_counts().values().all(|&n| n == 1 || n == 2));
        let area: f64 = (0..m.n_triangles()).map(|t| m.signed_area(&m.rest_positions, t)).sum();
        assert!((area - PI / 2.0).abs() < 0.02, "{area}");
    }
}
