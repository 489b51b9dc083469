//! Dataset generation and the JSON manifest.
//!
//! Layout under the output root:
//!
//! ```text
//! manifest.json
//! bodies/00000/trial_0/traj_000.palp ... traj_031.palp
//! bodies/00000/trial_0/gt.pimg
//! bodies/00000/trial_1/...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{apply_change, generate_indexed_body, perturb_materials, BodyModel, LumpSpec};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::palpation::{collect_trajectories, trial_angles, Trial};
use crate::raster::{rasterize, ClassImage};
use crate::rng::{stream, Purpose};
use crate::solver::Simulator;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BODIES_DIR: &str = "bodies";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub material_epoch: usize,
    pub lump: Option<LumpSpec>,
    pub angles: Vec<f64>,
    /// Paths relative to the dataset root, in angle order.
    pub trajectories: Vec<String>,
    pub ground_truth: String,
    /// Poses whose equilibrium solve hit the iteration cap.
    pub unconverged_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRecord {
    pub id: u64,
    pub change_flag: bool,
    pub body_radius: f64,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub n_bodies: usize,
    pub n_trials: usize,
    pub n_traj: usize,
    pub config: SimConfig,
    pub bodies: Vec<BodyRecord>,
}

impl DatasetManifest {
    /// Parse and check internal consistency (no file-system access).
    pub fn parse(text: &str) -> Result<DatasetManifest> {
        let m: DatasetManifest = serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.check_counts()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is always serializable");
        s.push('\n');
        s
    }

    fn check_counts(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Manifest(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!("unsupported schema version {}", self.schema_version));
        }
        if self.bodies.len() != self.n_bodies {
            return fail(format!("{} body records for n_bodies = {}", self.bodies.len(), self.n_bodies));
        }
        for b in &self.bodies {
            if b.trials.len() != self.n_trials {
                return fail(format!("body {} has {} trials, expected {}", b.id, b.trials.len(), self.n_trials));
            }
            for (i, t) in b.trials.iter().enumerate() {
                if t.index != i || t.trajectories.len() != self.n_traj || t.angles.len() != self.n_traj {
                    return fail(format!("body {} trial {i} is inconsistent with the counts", b.id));
                }
                let paths = t.trajectories.iter().chain(std::iter::once(&t.ground_truth));
                if let Some(p) = paths.into_iter().find(|p| !is_relative_inside(p)) {
                    return fail(format!("path {p:?} escapes the dataset root"));
                }
            }
        }
        Ok(())
    }

    /// Every referenced file must exist under `root`.
    pub fn check_paths(&self, root: &Path) -> Result<()> {
        for b in &self.bodies {
            for t in &b.trials {
                for p in t.trajectories.iter().chain(std::iter::once(&t.ground_truth)) {
                    if !root.join(p).is_file() {
                        return Err(Error::Manifest(format!("missing file {p}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn changed_count(&self) -> usize {
        self.bodies.iter().filter(|b| b.change_flag).count()
    }
}

fn is_relative_inside(p: &str) -> bool {
    !p.is_empty() && !p.starts_with('/') && !p.contains('\\') && p.split('/').all(|c| !c.is_empty() && c != "." && c != "..")
}

/// A generated dataset opened for reading.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Dataset> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = DatasetManifest::parse(&text)?;
        manifest.check_paths(root)?;
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
        })
    }

    fn record(&self, body: usize, trial: usize) -> Result<(&BodyRecord, &TrialRecord)> {
        let b = self
            .manifest
            .bodies
            .get(body)
            .ok_or_else(|| Error::InvalidInput(format!("no body {body}")))?;
        let t = b
            .trials
            .get(trial)
            .ok_or_else(|| Error::InvalidInput(format!("body {body} has no trial {trial}")))?;
        Ok((b, t))
    }

    pub fn trial(&self, body: usize, trial: usize) -> Result<Trial> {
        let (b, t) = self.record(body, trial)?;
        let trajectories = t
            .trajectories
            .iter()
            .map(|p| io::read_trajectory(&self.root.join(p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trial {
            body_id: b.id,
            trial_index: t.index,
            material_epoch: t.material_epoch,
            trajectories,
        })
    }

    pub fn ground_truth(&self, body: usize, trial: usize) -> Result<ClassImage> {
        let (_, t) = self.record(body, trial)?;
        io::read_class_image(&self.root.join(&t.ground_truth))
    }
}

/// Relative directory of one trial, shared by datasets and prediction trees.
pub fn trial_dir(body_id: u64, trial: usize) -> String {
    format!("{BODIES_DIR}/{body_id:05}/trial_{trial}")
}

/// Body states for every trial: trial 0 is the generated body; each later
/// trial resamples the background materials, and the lump of a flagged body
/// grows once, before trial 1.
pub fn trial_bodies(config: &SimConfig, master_seed: u64, index: u64) -> Result<Vec<BodyModel>> {
    let base = generate_indexed_body(master_seed, index, &config.body)?;
    let mut perturb = stream(master_seed, index, Purpose::Perturb);
    let mut change = stream(master_seed, index, Purpose::Change);
    let mut out = vec![base];
    for t in 1..config.n_trials {
        let mut next = perturb_materials(&out[t - 1], &mut perturb, &config.body);
        if t == 1 && next.change_flag && next.lump.is_some() {
            next = apply_change(&next, &mut change, &config.body)?;
        }
        out.push(next);
    }
    Ok(out)
}

fn generate_body_dir(config: &SimConfig, master_seed: u64, index: u64, bodies_dir: &Path) -> Result<BodyRecord> {
    let states = trial_bodies(config, master_seed, index)?;
    let base = &states[0];
    let tmp = bodies_dir.join(format!(".tmp-{index:05}"));
    let dest = bodies_dir.join(format!("{index:05}"));
    let _ = fs::remove_dir_all(&tmp);
    let result = (|| {
        let mut trials = Vec::with_capacity(states.len());
        for (t, body) in states.iter().enumerate() {
            let sim = Simulator::new(body.clone(), config.solver)?;
            let mut rng = stream(master_seed, index, Purpose::Sensor(t as u8));
            let trajs = collect_trajectories(&sim, &config.probe, &config.press, config.n_traj, &mut rng)?;
            let rel = trial_dir(index, t);
            let dir = tmp.join(format!("trial_{t}"));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut paths = Vec::with_capacity(trajs.len());
            for (j, traj) in trajs.iter().enumerate() {
                let name = format!("traj_{j:03}.palp");
                io::write_trajectory(&dir.join(&name), traj)?;
                paths.push(format!("{rel}/{name}"));
            }
            io::write_class_image(&dir.join("gt.pimg"), &rasterize(body))?;
            trials.push(TrialRecord {
                index: t,
                material_epoch: t,
                lump: body.lump,
                angles: trial_angles(config.n_traj),
                trajectories: paths,
                ground_truth: format!("{rel}/gt.pimg"),
                unconverged_steps: trajs.iter().map(|tr| tr.converged.iter().filter(|&&c| !c).count()).sum(),
            });
        }
        fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
        Ok(BodyRecord {
            id: index,
            change_flag: base.change_flag,
            body_radius: base.body_radius,
            n_vertices: base.mesh.n_vertices(),
            n_triangles: base.mesh.n_triangles(),
            trials,
        })
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

/// Generate `config.n_bodies` bodies in parallel on the current rayon pool.
/// `out` must be missing or empty; on failure everything written is removed.
/// `progress` is called once per finished body.
pub fn generate_dataset(
    config: &SimConfig,
    master_seed: u64,
    out: &Path,
    progress: Option<&(dyn Fn(u64) + Sync)>,
) -> Result<DatasetManifest> {
    config.validate()?;
    let created = !out.exists();
    if !created {
        let mut entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            return Err(Error::InvalidInput(format!("{} is not empty", out.display())));
        }
    }
    let bodies_dir = out.join(BODIES_DIR);
    fs::create_dir_all(&bodies_dir).map_err(|e| Error::io(&bodies_dir, e))?;

    let result = (0..config.n_bodies as u64)
        .into_par_iter()
        .map(|i| {
            let r = generate_body_dir(config, master_seed, i, &bodies_dir);
            if let (Ok(_), Some(p)) = (&r, progress) {
                p(i);
            }
            r
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|bodies| {
            let manifest = DatasetManifest {
                schema_version: SCHEMA_VERSION,
                master_seed,
                n_bodies: config.n_bodies,
                n_trials: config.n_trials,
                n_traj: config.n_traj,
                config: *config,
                bodies,
            };
            io::write_atomic(&out.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
            Ok(manifest)
        });
    if result.is_err() {
        if created {
            let _ = fs::remove_dir_all(out);
        } else {
            let _ = fs::remove_dir_all(&bodies_dir);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        let d = SimConfig::default();
        SimConfig {
            n_bodies: 2,
            n_traj: 2,
            press: crate::config::PressConfig { depth: 0.03, ..d.press },
            ..d
        }
    }

    #[test]
    fn relative_path_check() {
        assert!(is_relative_inside("bodies/00000/trial_0/gt.pimg"));
        for bad in ["", "/etc/passwd", "a/../b", "a//b", "./a", "a\\b"] {
            assert!(!is_relative_inside(bad), "{bad}");
        }
    }

    #[test]
    fn trial_bodies_change_once() {
        let mut c = small();
        c.body.p_change = 1.0;
        c.n_trials = 3;
        let states = trial_bodies(&c, 5, 0).unwrap();
        let r: Vec<f64> = states.iter().map(|b| b.lump.unwrap().radius).collect();
        assert!(r[1] > r[0]);
        assert_eq!(r[2], r[1]);
        assert_ne!(states[0].background, states[1].background);
        assert_eq!(states[0].mesh, states[2].mesh);
    }

    #[test]
    fn generate_open_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let m = generate_dataset(&small(), 9, &out, None).unwrap();
        assert_eq!(m.bodies.len(), 2);
        let ds = Dataset::open(&out).unwrap();
        assert_eq!(ds.manifest, m);
        let trial = ds.trial(1, 1).unwrap();
        assert_eq!(trial.trajectories.len(), 2);
        assert_eq!(trial.trajectories[0].len(), 4);
        assert_eq!(ds.ground_truth(0, 0).unwrap().width, 128);
        assert!(ds.trial(2, 0).is_err());
        // no temporary directories left behind
        for e in fs::read_dir(out.join(BODIES_DIR)).unwrap() {
            assert!(!e.unwrap().file_name().to_string_lossy().starts_with('.'));
        }
        assert!(generate_dataset(&small(), 9, &out, None).is_err());
    }

    #[test]
    fn failed_generation_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let mut c = small();
        // lumps can never be placed
        c.body.lump_clearance = 10.0;
        c.body.lump_max_retries = 3;
        assert!(generate_dataset(&c, 1, &out, None).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn manifest_count_checks() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let m = generate_dataset(&small(), 3, &out, None).unwrap();
        assert_eq!(DatasetManifest::parse(&m.to_json()).unwrap(), m);
        let mut bad = m.clone();
        bad.n_bodies = 3;
        assert!(DatasetManifest::parse(&bad.to_json()).is_err());
        let mut bad = m.clone();
        bad.bodies[0].trials[0].ground_truth = "../x".into();
        assert!(DatasetManifest::parse(&bad.to_json()).is_err());
        assert!(DatasetManifest::parse("{").is_err());
        fs::remove_file(out.join("bodies/00001/trial_0/gt.pimg")).unwrap();
        assert!(Dataset::open(&out).is_err());
    }
}
