//! Quasi-static equilibrium by Adam on the total (elastic + contact) energy.

use crate::body::BodyModel;
use crate::config::{ProbeConfig, SolverConfig};
use crate::contact::{self, ContactResult, Probe};
use crate::elasticity::ElasticModel;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::rng::SimRng;
use crate::trajectory::Trajectory;

/// Free positions plus Adam moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub positions: Vec<Vec2>,
    pub first_moment: Vec<Vec2>,
    pub second_moment: Vec<Vec2>,
    pub step_count: u64,
    pub config: SolverConfig,
}

impl SolverState {
    pub fn new(positions: Vec<Vec2>, config: SolverConfig) -> SolverState {
        let n = positions.len();
        SolverState {
            positions,
            first_moment: vec![[0.0; 2]; n],
            second_moment: vec![[0.0; 2]; n],
            step_count: 0,
            config,
        }
    }

    /// One bias-corrected Adam update. Returns the largest per-coordinate
    /// displacement. Coordinates whose gradient and moments are all zero
    /// (masked fixed vertices) do not move.
    pub fn adam_step(&mut self, gradient: &[Vec2]) -> Result<f64> {
        if gradient.len() != self.positions.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient of {} for {} positions",
                gradient.len(),
                self.positions.len()
            )));
        }
        if gradient.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let c = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let mut max_move = 0.0f64;
        let coords = self
            .positions
            .iter_mut()
            .flatten()
            .zip(self.first_moment.iter_mut().flatten())
            .zip(self.second_moment.iter_mut().flatten())
            .zip(gradient.iter().flatten());
        for (((x, m), v), &g) in coords {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let step = c.lr * (*m / bias1) / ((*v / bias2).sqrt() + c.epsilon);
            *x -= step;
            max_move = max_move.max(step.abs());
        }
        Ok(max_move)
    }
}

/// Outcome of one equilibrium solve.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub positions: Vec<Vec2>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the masked total gradient at the returned positions.
    pub gradient_norm: f64,
    pub contact: ContactResult,
    /// Total energy before each Adam step, when tracing was requested.
    pub trace: Vec<f64>,
}

/// A body prepared for repeated solves.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub body: BodyModel,
    pub elastic: ElasticModel,
    pub config: SolverConfig,
}

impl Simulator {
    pub fn new(body: BodyModel, config: SolverConfig) -> Result<Simulator> {
        let elastic = ElasticModel::new(&body.mesh, &body.materials)?;
        Ok(Simulator {
            body,
            elastic,
            config,
        })
    }

    pub fn rest_positions(&self) -> &[Vec2] {
        &self.body.mesh.rest_positions
    }

    /// Total energy; `grad` is overwritten with the masked total gradient.
    pub fn energy_and_gradient(
        &self,
        positions: &[Vec2],
        probe: Option<&Probe>,
        grad: &mut [Vec2],
    ) -> (f64, ContactResult) {
        let mesh = &self.body.mesh;
        grad.fill([0.0; 2]);
        let mut energy = self.elastic.accumulate(mesh, positions, grad);
        let contact = match probe {
            Some(p) => {
                let c = contact::contact_energy_and_forces(mesh, positions, p);
                energy += c.energy;
                c.accumulate_gradient(grad);
                c
            }
            None => ContactResult::default(),
        };
        for (g, &fixed) in grad.iter_mut().zip(&mesh.fixed_mask) {
            if fixed {
                *g = [0.0; 2];
            }
        }
        (energy, contact)
    }

    pub fn total_energy(&self, positions: &[Vec2], probe: Option<&Probe>) -> f64 {
        let mut grad = vec![[0.0; 2]; positions.len()];
        self.energy_and_gradient(positions, probe, &mut grad).0
    }

    /// Minimize from `warm_start` (default: rest positions) with fresh Adam
    /// moments.
    pub fn solve_equilibrium(&self, probe: Option<&Probe>, warm_start: Option<&[Vec2]>) -> Result<Equilibrium> {
        self.solve(probe, warm_start, false)
    }

    /// As [`Simulator::solve_equilibrium`], recording the energy per step.
    pub fn solve_traced(&self, probe: Option<&Probe>, warm_start: Option<&[Vec2]>) -> Result<Equilibrium> {
        self.solve(probe, warm_start, true)
    }

    fn solve(&self, probe: Option<&Probe>, warm_start: Option<&[Vec2]>, trace: bool) -> Result<Equilibrium> {
        let rest = self.rest_positions();
        let start = match warm_start {
            Some(w) if w.len() != rest.len() => {
                return Err(Error::ShapeMismatch(format!(
                    "warm start has {} vertices, mesh has {}",
                    w.len(),
                    rest.len()
                )))
            }
            Some(w) => w.to_vec(),
            None => rest.to_vec(),
        };
        let mut state = SolverState::new(start, self.config);
        let mut grad = vec![[0.0; 2]; rest.len()];
        let mut energies = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        let mut best = f64::INFINITY;
        let mut stale = 0;
        while iterations < self.config.max_iters {
            let (energy, _) = self.energy_and_gradient(&state.positions, probe, &mut grad);
            if trace {
                energies.push(energy);
            }
            if energy < best {
                best = energy;
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.config.patience {
                    state.config.lr *= self.config.lr_decay;
                    stale = 0;
                }
            }
            let moved = state.adam_step(&grad)?;
            iterations += 1;
            if moved < self.config.tol {
                converged = true;
                break;
            }
        }
        let (energy, contact) = self.energy_and_gradient(&state.positions, probe, &mut grad);
        if !energy.is_finite() {
            return Err(Error::NonFinite("energy"));
        }
        let gradient_norm = grad.iter().flatten().fold(0.0f64, |m, g| m.max(g.abs()));
        Ok(Equilibrium {
            positions: state.positions,
            energy,
            iterations,
            converged,
            gradient_norm,
            contact,
            trace: energies,
        })
    }

    /// Solve each pose warm-started from the previous equilibrium and read
    /// the sensor. The first pose starts from `warm_start` or rest.
    pub fn quasi_static_sweep(
        &self,
        probe: &ProbeConfig,
        poses: &[Vec2],
        warm_start: Option<&[Vec2]>,
        rng: &mut SimRng,
    ) -> Result<(Trajectory, Vec<Vec2>)> {
        let mut current: Vec<Vec2> = warm_start.unwrap_or(self.rest_positions()).to_vec();
        let k = 2 * probe.n_points;
        let mut out_poses = Vec::with_capacity(poses.len());
        let mut forces = Vec::with_capacity(poses.len() * k);
        let mut flags = Vec::with_capacity(poses.len());
        for &pose in poses {
            let p = Probe::new(probe, pose);
            let eq = self.solve_equilibrium(Some(&p), Some(&current))?;
            let reading = contact::read_sensor(&eq.contact, probe.noise_sigma, rng);
            out_poses.push([pose[0] as f32, pose[1] as f32]);
            forces.extend(reading.0.iter().map(|&f| f as f32));
            flags.push(eq.converged);
            current = eq.positions;
        }
        Ok((Trajectory::new(out_poses, forces, k, flags)?, current))
    }
}
