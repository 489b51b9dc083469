//! Simulation hyperparameters and their plain-text `key = value` form.
//!
//! Keys follow the hyperparameter symbols of the data-collection tables
//! (`sigma_noise`, `R_probe`, `kappa_collision`, `L_grid`, `mu_ym_lo`, ...).
//! Lines starting with `#` and blank lines are ignored; unknown and
//! repeated keys are errors. Keys not present keep their defaults.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probe geometry and sensor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub n_points: usize,
    pub radius: f64,
    pub stiffness: f64,
    pub noise_sigma: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            n_points: 16,
            radius: 0.1,
            stiffness: 0.01,
            noise_sigma: 1e-4,
        }
    }
}

/// Adam constants and the stopping rule of the equilibrium solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once the largest per-coordinate move of an iteration is below this.
    pub tol: f64,
    /// Factor applied to the step size when the energy plateaus (1 = never).
    pub lr_decay: f64,
    /// Iterations without a new lowest energy that count as a plateau.
    pub patience: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lr: 1e-3,
            beta1: 0.2,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 2000,
            tol: 1e-6,
            lr_decay: 0.2,
            patience: 20,
        }
    }
}

/// Distribution parameters for random bodies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyGenConfig {
    pub radius_mean: f64,
    pub radius_std: f64,
    pub grid_spacing: f64,
    pub perimeter_spacing: f64,
    /// Per-coordinate Gaussian jitter of mesh nodes.
    pub node_jitter: f64,
    pub young_mean_lo: f64,
    pub young_mean_hi: f64,
    pub young_std: f64,
    pub poisson_mean_lo: f64,
    pub poisson_mean_hi: f64,
    pub poisson_std: f64,
    pub poisson_min: f64,
    pub poisson_max: f64,
    pub lump_young: f64,
    pub lump_poisson: f64,
    pub p_change: f64,
    pub p_lump: f64,
    pub lump_center_lo: f64,
    pub lump_center_hi: f64,
    pub lump_radius_change_lo: f64,
    pub lump_radius_change_hi: f64,
    pub lump_radius_no_change_lo: f64,
    pub lump_radius_no_change_hi: f64,
    pub lump_growth_mean: f64,
    pub lump_growth_std: f64,
    /// Minimum gap between the lump disc and the body outline.
    pub lump_clearance: f64,
    pub lump_max_retries: usize,
}

impl Default for BodyGenConfig {
    fn default() -> Self {
        BodyGenConfig {
            radius_mean: 1.0,
            radius_std: 0.01,
            grid_spacing: 0.15,
            perimeter_spacing: 0.1,
            node_jitter: 0.001,
            young_mean_lo: 0.0027,
            young_mean_hi: 0.0033,
            young_std: 0.0002,
            poisson_mean_lo: 0.09,
            poisson_mean_hi: 0.11,
            poisson_std: 0.01,
            poisson_min: 0.01,
            poisson_max: 0.45,
            lump_young: 0.01,
            lump_poisson: 0.1,
            p_change: 0.1,
            p_lump: 1.0,
            lump_center_lo: 0.44,
            lump_center_hi: 0.55,
            lump_radius_change_lo: 0.07,
            lump_radius_change_hi: 0.15,
            lump_radius_no_change_lo: 0.11,
            lump_radius_no_change_hi: 0.21,
            lump_growth_mean: 0.03,
            lump_growth_std: 0.01,
            lump_clearance: 0.02,
            lump_max_retries: 100,
        }
    }
}

/// Linear press geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressConfig {
    /// Inward advance per recorded pose.
    pub step: f64,
    /// Inward travel after first contact.
    pub depth: f64,
    /// Start distance beyond the body radius, in probe radii.
    pub start_offset: f64,
}

impl Default for PressConfig {
    fn default() -> Self {
        PressConfig {
            step: 0.01,
            depth: 0.25,
            start_offset: 2.0,
        }
    }
}

/// Everything needed to regenerate a dataset, together with the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub body: BodyGenConfig,
    pub probe: ProbeConfig,
    pub solver: SolverConfig,
    pub press: PressConfig,
    pub n_bodies: usize,
    pub n_trials: usize,
    pub n_traj: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            body: BodyGenConfig::default(),
            probe: ProbeConfig::default(),
            solver: SolverConfig::default(),
            press: PressConfig::default(),
            n_bodies: 1000,
            n_trials: 2,
            n_traj: 32,
        }
    }
}

enum Slot<'a> {
    Real(&'a mut f64),
    Count(&'a mut usize),
}

impl SimConfig {
    fn slots(&mut self) -> Vec<(&'static str, Slot<'_>)> {
        let b = &mut self.body;
        let p = &mut self.probe;
        let s = &mut self.solver;
        let pr = &mut self.press;
        vec![
            ("sigma_noise", Slot::Real(&mut p.noise_sigma)),
            ("N_points", Slot::Count(&mut p.n_points)),
            ("R_probe", Slot::Real(&mut p.radius)),
            ("kappa_collision", Slot::Real(&mut p.stiffness)),
            ("beta1", Slot::Real(&mut s.beta1)),
            ("beta2", Slot::Real(&mut s.beta2)),
            ("lr", Slot::Real(&mut s.lr)),
            ("eps_hat", Slot::Real(&mut s.epsilon)),
            ("max_iters", Slot::Count(&mut s.max_iters)),
            ("tol", Slot::Real(&mut s.tol)),
            ("lr_decay", Slot::Real(&mut s.lr_decay)),
            ("lr_patience", Slot::Count(&mut s.patience)),
            ("R_model_mean", Slot::Real(&mut b.radius_mean)),
            ("R_model_std", Slot::Real(&mut b.radius_std)),
            ("L_grid", Slot::Real(&mut b.grid_spacing)),
            ("L_perimeter", Slot::Real(&mut b.perimeter_spacing)),
            ("sigma_jitter", Slot::Real(&mut b.node_jitter)),
            ("mu_ym_lo", Slot::Real(&mut b.young_mean_lo)),
            ("mu_ym_hi", Slot::Real(&mut b.young_mean_hi)),
            ("sigma_ym", Slot::Real(&mut b.young_std)),
            ("mu_pr_lo", Slot::Real(&mut b.poisson_mean_lo)),
            ("mu_pr_hi", Slot::Real(&mut b.poisson_mean_hi)),
            ("sigma_pr", Slot::Real(&mut b.poisson_std)),
            ("pr_min", Slot::Real(&mut b.poisson_min)),
            ("pr_max", Slot::Real(&mut b.poisson_max)),
            ("ym_lump", Slot::Real(&mut b.lump_young)),
            ("pr_lump", Slot::Real(&mut b.lump_poisson)),
            ("p_change", Slot::Real(&mut b.p_change)),
            ("p_lump", Slot::Real(&mut b.p_lump)),
            ("center_lump_lo", Slot::Real(&mut b.lump_center_lo)),
            ("center_lump_hi", Slot::Real(&mut b.lump_center_hi)),
            ("R_lump_change_lo", Slot::Real(&mut b.lump_radius_change_lo)),
            ("R_lump_change_hi", Slot::Real(&mut b.lump_radius_change_hi)),
            ("R_lump_no_change_lo", Slot::Real(&mut b.lump_radius_no_change_lo)),
            ("R_lump_no_change_hi", Slot::Real(&mut b.lump_radius_no_change_hi)),
            ("dR_lump_mean", Slot::Real(&mut b.lump_growth_mean)),
            ("dR_lump_std", Slot::Real(&mut b.lump_growth_std)),
            ("lump_clearance", Slot::Real(&mut b.lump_clearance)),
            ("lump_max_retries", Slot::Count(&mut b.lump_max_retries)),
            ("press_step", Slot::Real(&mut pr.step)),
            ("press_depth", Slot::Real(&mut pr.depth)),
            ("press_start_offset", Slot::Real(&mut pr.start_offset)),
            ("N_p", Slot::Count(&mut self.n_bodies)),
            ("N_trial", Slot::Count(&mut self.n_trials)),
            ("N_traj", Slot::Count(&mut self.n_traj)),
        ]
    }

    /// Parse the `key = value` text form on top of the defaults.
    pub fn parse(text: &str) -> Result<SimConfig> {
        let mut cfg = SimConfig::default();
        let mut seen = HashSet::new();
        {
            let mut slots = cfg.slots();
            for (idx, raw) in text.lines().enumerate() {
                let line_no = idx + 1;
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let err = |msg: String| Error::Config { line: line_no, msg };
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| err("expected `key = value`".into()))?;
                let key = key.trim();
                let value = value.trim();
                let slot = slots
                    .iter_mut()
                    .find(|(name, _)| *name == key)
                    .map(|(_, slot)| slot)
                    .ok_or_else(|| err(format!("unknown key `{key}`")))?;
                if !seen.insert(key.to_string()) {
                    return Err(err(format!("duplicate key `{key}`")));
                }
                match slot {
                    Slot::Real(v) => {
                        let x: f64 = value
                            .parse()
                            .map_err(|_| err(format!("`{value}` is not a number")))?;
                        if !x.is_finite() {
                            return Err(err(format!("`{key}` must be finite")));
                        }
                        **v = x;
                    }
                    Slot::Count(v) => {
                        **v = value
                            .parse()
                            .map_err(|_| err(format!("`{value}` is not a count")))?;
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SimConfig::parse(&text)
    }

    /// Render every key, so `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut copy = *self;
        let mut out = String::new();
        for (name, slot) in copy.slots() {
            match slot {
                Slot::Real(v) => writeln!(out, "{name} = {v:?}").unwrap(),
                Slot::Count(v) => writeln!(out, "{name} = {v}").unwrap(),
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config { line: 0, msg: msg.to_string() });
        let b = &self.body;
        let p = &self.probe;
        let s = &self.solver;
        if p.n_points < 3 || p.radius <= 0.0 || p.stiffness <= 0.0 || p.noise_sigma < 0.0 {
            return bad("probe needs N_points >= 3, R_probe > 0, kappa_collision > 0, sigma_noise >= 0");
        }
        if s.lr <= 0.0 || !(0.0..1.0).contains(&s.beta1) || !(0.0..1.0).contains(&s.beta2) {
            return bad("Adam needs lr > 0 and beta1, beta2 in [0, 1)");
        }
        if s.epsilon <= 0.0 || s.tol < 0.0 || s.max_iters == 0 {
            return bad("eps_hat > 0, tol >= 0 and max_iters >= 1 required");
        }
        if !(s.lr_decay > 0.0 && s.lr_decay <= 1.0) || s.patience == 0 {
            return bad("lr_decay in (0, 1] and lr_patience >= 1 required");
        }
        if b.radius_mean <= 0.0 || b.radius_std < 0.0 {
            return bad("R_model_mean > 0 and R_model_std >= 0 required");
        }
        if b.grid_spacing <= 0.0 || b.perimeter_spacing <= 0.0 || b.node_jitter < 0.0 {
            return bad("L_grid, L_perimeter > 0 and sigma_jitter >= 0 required");
        }
        if b.young_mean_lo <= 0.0 || b.young_mean_hi < b.young_mean_lo || b.young_std < 0.0 {
            return bad("0 < mu_ym_lo <= mu_ym_hi and sigma_ym >= 0 required");
        }
        if !(0.0 < b.poisson_min && b.poisson_min < b.poisson_max && b.poisson_max < 0.5) {
            return bad("0 < pr_min < pr_max < 0.5 required");
        }
        if b.poisson_mean_hi < b.poisson_mean_lo || b.poisson_std < 0.0 {
            return bad("mu_pr_lo <= mu_pr_hi and sigma_pr >= 0 required");
        }
        if b.lump_young <= 0.0 || !(0.0 < b.lump_poisson && b.lump_poisson < 0.5) {
            return bad("ym_lump > 0 and pr_lump in (0, 0.5) required");
        }
        if !(0.0..=1.0).contains(&b.p_change) || !(0.0..=1.0).contains(&b.p_lump) {
            return bad("p_change and p_lump must be probabilities");
        }
        if b.lump_center_lo < 0.0 || b.lump_center_hi < b.lump_center_lo {
            return bad("0 <= center_lump_lo <= center_lump_hi required");
        }
        if b.lump_radius_change_lo <= 0.0
            || b.lump_radius_change_hi < b.lump_radius_change_lo
            || b.lump_radius_no_change_lo <= 0.0
            || b.lump_radius_no_change_hi < b.lump_radius_no_change_lo
        {
            return bad("lump radius ranges must be positive and ordered");
        }
        if b.lump_growth_std < 0.0 || b.lump_clearance < 0.0 || b.lump_max_retries == 0 {
            return bad("dR_lump_std, lump_clearance >= 0 and lump_max_retries >= 1 required");
        }
        let pr = &self.press;
        if pr.step <= 0.0 || pr.depth <= 0.0 || pr.start_offset < 0.0 {
            return bad("press_step, press_depth > 0 and press_start_offset >= 0 required");
        }
        if self.n_trials == 0 || self.n_traj == 0 {
            return bad("N_trial and N_traj must be >= 1");
        }
        if self.n_trials > 200 {
            return bad("N_trial must be <= 200");
        }
        Ok(())
    }
}
