//! Linear-elastic triangles: plane-strain Lamé conversion, small-strain
//! energy density and its exact vertex gradient.
//!
//! For an element with rest edge matrix `Dm = [x1 - x0 | x2 - x0]` and
//! deformed edge matrix `Ds`, the deformation gradient is `F = Ds Dm⁻¹`,
//! the strain `ε = ½(F + Fᵀ) - I` (evaluated from displacements) and
//!
//! ```text
//! ψ = μ ε:ε + ½ λ tr(ε)²        P = ∂ψ/∂F = 2μ ε + λ tr(ε) I
//! ```
//!
//! The element contributes `A ψ` to the energy and `A P Dm⁻ᵀ` to the
//! gradient with respect to `(x1, x2)`; `x0` receives minus their sum.

use crate::body::MaterialField;
use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::mesh::Mesh;

pub type Mat2 = [[f64; 2]; 2];

/// Poisson ratios above this make λ blow up.
pub const MAX_POISSON: f64 = 0.49;

/// Plane-strain Lamé parameters `(λ, μ)`.
pub fn lame_parameters(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0 && young.is_finite()) {
        return Err(Error::InvalidInput(format!("young modulus {young} must be positive")));
    }
    if !(0.0..=MAX_POISSON).contains(&poisson) {
        return Err(Error::InvalidInput(format!(
            "poisson ratio {poisson} outside [0, {MAX_POISSON}]"
        )));
    }
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    Ok((lambda, mu))
}

/// Per-element rest data and material constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementElasticState {
    pub rest_corners: [Vec2; 3],
    pub rest_shape_inverse: Mat2,
    pub rest_area: f64,
    pub lame_lambda: f64,
    pub lame_mu: f64,
}

fn edge_matrix(x0: Vec2, x1: Vec2, x2: Vec2) -> Mat2 {
    let e1 = geom::sub(x1, x0);
    let e2 = geom::sub(x2, x0);
    [[e1[0], e2[0]], [e1[1], e2[1]]]
}

fn inverse(m: Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = 1.0 / det;
    Some([[m[1][1] * inv, -m[0][1] * inv], [-m[1][0] * inv, m[0][0] * inv]])
}

fn mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mul_transposed(a: Mat2, b: Mat2) -> Mat2 {
    // a · bᵀ
    [
        [a[0][0] * b[0][0] + a[0][1] * b[0][1], a[0][0] * b[1][0] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[0][1], a[1][0] * b[1][0] + a[1][1] * b[1][1]],
    ]
}

impl ElementElasticState {
    pub fn new(rest: [Vec2; 3], young: f64, poisson: f64) -> Result<Self> {
        let dm = edge_matrix(rest[0], rest[1], rest[2]);
        let area = 0.5 * geom::orient(rest[0], rest[1], rest[2]);
        if area <= 0.0 {
            return Err(Error::Geometry(format!("element rest area {area} is not positive")));
        }
        let inv = inverse(dm).ok_or_else(|| Error::Geometry("singular rest shape".into()))?;
        let (lame_lambda, lame_mu) = lame_parameters(young, poisson)?;
        Ok(ElementElasticState {
            rest_corners: rest,
            rest_shape_inverse: inv,
            rest_area: area,
            lame_lambda,
            lame_mu,
        })
    }

    /// Energy of this element and the gradient with respect to its three
    /// corners.
    #[inline]
    pub fn energy_and_gradient(&self, x: [Vec2; 3]) -> (f64, [Vec2; 3]) {
        // Displacement gradient F - I = (Ds - Dm) Dm⁻¹, exactly zero at rest.
        let r = &self.rest_corners;
        let du = edge_matrix(geom::sub(x[0], r[0]), geom::sub(x[1], r[1]), geom::sub(x[2], r[2]));
        let f = mul(du, self.rest_shape_inverse);
        let off = 0.5 * (f[0][1] + f[1][0]);
        let eps = [[f[0][0], off], [off, f[1][1]]];
        let tr = eps[0][0] + eps[1][1];
        let eps_sq = eps[0][0] * eps[0][0] + 2.0 * off * off + eps[1][1] * eps[1][1];
        let (mu, lambda) = (self.lame_mu, self.lame_lambda);
        let psi = mu * eps_sq + 0.5 * lambda * tr * tr;

        let p = [
            [2.0 * mu * eps[0][0] + lambda * tr, 2.0 * mu * off],
            [2.0 * mu * off, 2.0 * mu * eps[1][1] + lambda * tr],
        ];
        let h = mul_transposed(p, self.rest_shape_inverse);
        let a = self.rest_area;
        let g1 = [a * h[0][0], a * h[1][0]];
        let g2 = [a * h[0][1], a * h[1][1]];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        (a * psi, [g0, g1, g2])
    }
}

/// Precomputed element states for one body.
#[derive(Debug, Clone)]
pub struct ElasticModel {
    pub elements: Vec<ElementElasticState>,
}

impl ElasticModel {
    pub fn new(mesh: &Mesh, materials: &MaterialField) -> Result<ElasticModel> {
        materials.validate(mesh.n_triangles())?;
        let elements = (0..mesh.n_triangles())
            .map(|t| {
                ElementElasticState::new(
                    mesh.corners(&mesh.rest_positions, t),
                    materials.young[t],
                    materials.poisson[t],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ElasticModel { elements })
    }

    /// Total elastic energy; the gradient is accumulated into `grad`
    /// (which is not cleared). Fixed vertices are not masked here.
    pub fn accumulate(&self, mesh: &Mesh, positions: &[Vec2], grad: &mut [Vec2]) -> f64 {
        let mut energy = 0.0;
        for (tri, el) in mesh.triangles.iter().zip(&self.elements) {
            let x = [positions[tri[0]], positions[tri[1]], positions[tri[2]]];
            let (e, g) = el.energy_and_gradient(x);
            energy += e;
            for k in 0..3 {
                let v = &mut grad[tri[k]];
                v[0] += g[k][0];
                v[1] += g[k][1];
            }
        }
        energy
    }
}

/// Elastic energy and its gradient, zeroed at fixed vertices.
pub fn elastic_energy_and_gradient(
    mesh: &Mesh,
    states: &[ElementElasticState],
    positions: &[Vec2],
) -> Result<(f64, Vec<Vec2>)> {
    if positions.len() != mesh.n_vertices() || states.len() != mesh.n_triangles() {
        return Err(Error::ShapeMismatch(format!(
            "{} positions / {} states for a mesh of {} vertices and {} triangles",
            positions.len(),
            states.len(),
            mesh.n_vertices(),
            mesh.n_triangles()
        )));
    }
    if positions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("positions"));
    }
    let model = ElasticModel {
        elements: states.to_vec(),
    };
    let mut grad = vec![[0.0; 2]; positions.len()];
    let energy = model.accumulate(mesh, positions, &mut grad);
    for (g, &fixed) in grad.iter_mut().zip(&mesh.fixed_mask) {
        if fixed {
            *g = [0.0; 2];
        }
    }
    Ok((energy, grad))
}
