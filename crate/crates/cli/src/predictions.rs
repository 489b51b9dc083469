//! Prediction trees mirror the dataset layout:
//! `bodies/NNNNN/trial_T/pred_PP.pimg` (one file per ensemble member).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use palpsim::dataset::trial_dir;
use palpsim::io;
use palpsim::raster::ClassImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    All,
    Val,
    Test,
}

impl Split {
    pub fn contains(self, body_id: u64, val_every: u64) -> bool {
        let val = val_every > 0 && body_id.is_multiple_of(val_every);
        match self {
            Split::All => true,
            Split::Val => val,
            Split::Test => !val,
        }
    }
}

pub fn trial_path(root: &Path, body_id: u64, trial: usize) -> PathBuf {
    root.join(trial_dir(body_id, trial))
}

/// Every `pred_*.pimg` of one trial, in file-name order.
pub fn load_stack(root: &Path, body_id: u64, trial: usize) -> Result<Vec<ClassImage>> {
    let dir = trial_path(root, body_id, trial);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("pred_") && n.ends_with(".pimg"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no pred_*.pimg files in {}", dir.display());
    }
    files
        .iter()
        .map(|p| io::read_class_image(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

pub fn pred_file(root: &Path, body_id: u64, trial: usize, member: usize) -> PathBuf {
    trial_path(root, body_id, trial).join(format!("pred_{member:02}.pimg"))
}
