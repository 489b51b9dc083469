use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recorded probe poses and force readings of one press, in single
/// precision (the dataset precision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Direction of the first pose seen from the flat-side midpoint.
    pub angle: f64,
    pub poses: Vec<[f32; 2]>,
    /// Row-major `T × k` readings.
    pub forces: Vec<f32>,
    pub k: usize,
    pub converged: Vec<bool>,
}

impl Trajectory {
    pub fn new(poses: Vec<[f32; 2]>, forces: Vec<f32>, k: usize, converged: Vec<bool>) -> Result<Self> {
        let t = poses.len();
        if t == 0 || k == 0 {
            return Err(Error::InvalidInput("trajectory needs at least one step and k > 0".into()));
        }
        if forces.len() != t * k || converged.len() != t {
            return Err(Error::ShapeMismatch(format!(
                "{t} poses, {} force values (k = {k}), {} flags",
                forces.len(),
                converged.len()
            )));
        }
        if poses.iter().flatten().chain(&forces).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory"));
        }
        let angle = (poses[0][1] as f64).atan2(poses[0][0] as f64);
        Ok(Trajectory {
            angle,
            poses,
            forces,
            k,
            converged,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn force(&self, t: usize) -> &[f32] {
        &self.forces[t * self.k..(t + 1) * self.k]
    }

    /// Euclidean norm of the reading at step `t`.
    pub fn force_norm(&self, t: usize) -> f64 {
        self.force(t).iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// Sum of per-point force magnitudes at step `t` (pairs of components).
    pub fn point_force_magnitude_sum(&self, t: usize) -> f64 {
        self.force(t)
            .chunks_exact(2)
            .map(|c| (c[0] as f64).hypot(c[1] as f64))
            .sum()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}
