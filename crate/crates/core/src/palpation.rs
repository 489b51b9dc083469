//! Linear press trajectories and trials.

use std::f64::consts::PI;

use crate::config::{PressConfig, ProbeConfig};
use crate::contact::{contact_energy_and_forces, Probe};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::rng::SimRng;
use crate::solver::Simulator;
use crate::trajectory::Trajectory;

/// Evenly spread press directions `π (j + ½) / n`.
pub fn trial_angles(n_traj: usize) -> Vec<f64> {
    (0..n_traj).map(|j| PI * (j as f64 + 0.5) / n_traj as f64).collect()
}

/// Probe centers of a press along `angle`: from the first pose that touches
/// the rest body, inward by `press.step` until `press.depth` is covered.
pub fn press_poses(sim: &Simulator, probe: &ProbeConfig, press: &PressConfig, angle: f64) -> Result<Vec<Vec2>> {
    if !(0.0..=PI).contains(&angle) {
        return Err(Error::InvalidInput(format!("press angle {angle} outside [0, pi]")));
    }
    if !(press.step > 0.0 && press.depth >= press.step) {
        return Err(Error::InvalidInput(format!(
            "press step {} and depth {} must satisfy 0 < step <= depth",
            press.step, press.depth
        )));
    }
    let dir = [angle.cos(), angle.sin()];
    let start = sim.body.body_radius + press.start_offset * probe.radius;
    let at = |i: usize| {
        let r = start - i as f64 * press.step;
        [dir[0] * r, dir[1] * r]
    };
    let mesh = &sim.body.mesh;
    let limit = ((start + sim.body.body_radius) / press.step).ceil() as usize;
    let first = (0..=limit)
        .find(|&i| contact_energy_and_forces(mesh, &mesh.rest_positions, &Probe::new(probe, at(i))).in_contact())
        .ok_or_else(|| Error::Geometry(format!("press at angle {angle} never touches the body")))?;
    let steps = (press.depth / press.step).round() as usize;
    Ok((first..=first + steps).map(at).collect())
}

/// Quasi-static press from the rest configuration.
pub fn press_trajectory(
    sim: &Simulator,
    probe: &ProbeConfig,
    press: &PressConfig,
    angle: f64,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    let poses = press_poses(sim, probe, press, angle)?;
    Ok(sim.quasi_static_sweep(probe, &poses, None, rng)?.0)
}

/// One pass of presses over a fixed material state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub body_id: u64,
    pub trial_index: usize,
    pub material_epoch: usize,
    pub trajectories: Vec<Trajectory>,
}

/// `n_traj` presses at [`trial_angles`], in index order on one noise stream.
pub fn collect_trajectories(
    sim: &Simulator,
    probe: &ProbeConfig,
    press: &PressConfig,
    n_traj: usize,
    rng: &mut SimRng,
) -> Result<Vec<Trajectory>> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("a trial needs at least one trajectory".into()));
    }
    trial_angles(n_traj)
        .into_iter()
        .map(|a| press_trajectory(sim, probe, press, a, rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::symmetric_body;
    use crate::config::SolverConfig;
    use crate::geom;
    use crate::rng::{stream, Purpose};

    fn sim() -> Simulator {
        let (body, _) = symmetric_body(1.0, 0.15, 0.1, 0.003, 0.1).unwrap();
        Simulator::new(body, SolverConfig::default()).unwrap()
    }

    #[test]
    fn angles_are_even_and_increasing() {
        let a = trial_angles(32);
        assert_eq!(a.len(), 32);
        assert!((a[0] - PI / 64.0).abs() < 1e-15);
        for w in a.windows(2) {
            assert!((w[1] - w[0] - PI / 32.0).abs() < 1e-12);
        }
        assert_eq!(trial_angles(1), vec![PI / 2.0]);
    }

    #[test]
    fn poses_are_collinear_and_spaced() {
        let s = sim();
        let press = PressConfig::default();
        let poses = press_poses(&s, &ProbeConfig::default(), &press, 1.1).unwrap();
        assert_eq!(poses.len(), 26);
        for w in poses.windows(3) {
            let c = geom::cross(geom::sub(w[1], w[0]), geom::sub(w[2], w[0]));
            assert!(c.abs() < 1e-12);
            assert!((geom::dist(w[0], w[1]) - press.step).abs() < 1e-12);
        }
        // first pose touches, the one before does not
        let r0 = geom::norm(poses[0]);
        assert!(r0 < 1.0 + 0.1 + 1e-9 && r0 > 1.0 + 0.1 - press.step - 0.01);
    }

    #[test]
    fn angle_outside_range_is_rejected() {
        let s = sim();
        let mut rng = stream(0, 0, Purpose::Sensor(0));
        let cfg = ProbeConfig::default();
        assert!(press_trajectory(&s, &cfg, &PressConfig::default(), -0.1, &mut rng).is_err());
        assert!(press_trajectory(&s, &cfg, &PressConfig::default(), 3.2, &mut rng).is_err());
        assert!(collect_trajectories(&s, &cfg, &PressConfig::default(), 0, &mut rng).is_err());
    }

    #[test]
    fn press_is_deterministic_and_loads_up() {
        let s = sim();
        let probe = ProbeConfig {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let press = PressConfig::default();
        let a = press_trajectory(&s, &probe, &press, 1.3, &mut stream(3, 0, Purpose::Sensor(0))).unwrap();
        let b = press_trajectory(&s, &probe, &press, 1.3, &mut stream(3, 0, Purpose::Sensor(0))).unwrap();
        assert_eq!(a, b);
        assert!((a.angle - 1.3).abs() < 1e-6);
        assert!(a.force_norm(0) > 0.0);
        assert!(a.force_norm(a.len() - 1) >= a.force_norm(0));
        assert!(a.all_converged());
    }
}
