use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{anyhow, Context};
use palpsim::change::{self, ConfusionMatrix, ImageStack};
use palpsim::config::SimConfig;
use palpsim::dataset::{self, Dataset};
use palpsim::forcemap;
use palpsim::io;
use palpsim::raster::{self, ClassImage, Extent, RealImage, IMAGE_SIZE, LUMP};
use rayon::prelude::*;

use crate::predictions::{self, Split};
use crate::{Cli, Command, SimArgs};

pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<palpsim::FormatError> for Failure {
    fn from(e: palpsim::FormatError) -> Self {
        Failure::Data(e.into())
    }
}

impl From<palpsim::Error> for Failure {
    fn from(e: palpsim::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Data(e.into()))?;
    }
    let quiet = cli.quiet;
    match cli.command {
        Command::Generate { sim, out } => generate(&sim, &out, quiet),
        Command::RenderGt {
            sim,
            body,
            trial,
            out,
            ascii,
        } => render_gt(&sim, body, trial, &out, ascii),
        Command::ForceMap {
            data,
            out,
            bandwidth,
            threshold,
            split,
        } => force_map(&data, &out, bandwidth, threshold, split.val_every),
        Command::ChangeScore {
            a,
            b,
            score_map,
            data,
            pred,
            c,
            threshold,
            lump_size,
        } => match (data, pred) {
            (Some(data), Some(pred)) => change_dataset(&data, &pred, c, threshold, lump_size),
            _ if !a.is_empty() => change_pair(&a, &b, score_map.as_deref(), c, threshold, lump_size),
            _ => Err(usage("change-score needs --a/--b stacks or --data with --pred")),
        },
        Command::Metrics {
            data,
            pred,
            image,
            gt,
            split,
            split_args,
        } => match (data, pred, image, gt) {
            (Some(data), Some(pred), None, None) => metrics_dataset(&data, &pred, split, split_args.val_every),
            (None, None, Some(image), Some(gt)) => metrics_pair(&image, &gt),
            _ => Err(usage("metrics needs --data with --pred, or --image with --gt")),
        },
        Command::Inspect { path } => inspect(&path),
    }
}

fn load_config(sim: &SimArgs) -> Result<SimConfig, Failure> {
    let mut config = match &sim.config {
        Some(path) => SimConfig::load(path)?,
        None => SimConfig::default(),
    };
    if let Some(n) = sim.n_bodies {
        config.n_bodies = n;
    }
    if let Some(n) = sim.n_trials {
        config.n_trials = n;
    }
    if let Some(n) = sim.n_traj {
        config.n_traj = n;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn generate(sim: &SimArgs, out: &Path, quiet: bool) -> Outcome {
    let config = load_config(sim)?;
    let done = AtomicUsize::new(0);
    let total = config.n_bodies;
    let progress = |id: u64| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if !quiet {
            eprintln!("body {id:05} done ({k}/{total})");
        }
    };
    let manifest = dataset::generate_dataset(&config, sim.seed, out, Some(&progress))?;
    let unconverged: usize = manifest
        .bodies
        .iter()
        .flat_map(|b| &b.trials)
        .map(|t| t.unconverged_steps)
        .sum();
    println!(
        "wrote {} bodies ({} flagged for change) to {}",
        manifest.n_bodies,
        manifest.changed_count(),
        out.display()
    );
    println!("unconverged solves: {unconverged}");
    println!("tree hash: {}", io::tree_hash(out)?);
    Ok(())
}

fn ascii_art(image: &ClassImage) -> String {
    let mut s = String::with_capacity((image.width + 1) * image.height);
    for row in 0..image.height {
        for col in 0..image.width {
            s.push(match image.get(row, col) {
                0 => '.',
                1 => '#',
                _ => 'o',
            });
        }
        s.push('\n');
    }
    s
}

fn render_gt(sim: &SimArgs, body: u64, trial: usize, out: &Path, ascii: bool) -> Outcome {
    let config = load_config(sim)?;
    if trial >= config.n_trials {
        return Err(usage(format!("trial {trial} out of range (n_trials = {})", config.n_trials)));
    }
    let states = dataset::trial_bodies(&config, sim.seed, body)?;
    let image = raster::rasterize(&states[trial]);
    io::write_class_image(out, &image)?;
    if ascii {
        print!("{}", ascii_art(&image));
    }
    let extent = Extent::default();
    match states[trial].lump {
        Some(l) => println!(
            "lump center ({:.4}, {:.4}) radius {:.4}; rasterized area {:.5}",
            l.center[0],
            l.center[1],
            l.radius,
            raster::lump_size(&image, &extent)
        ),
        None => println!("no lump"),
    }
    Ok(())
}

fn force_map(data: &Path, out: &Path, bandwidth: f64, threshold: Option<f64>, val_every: u64) -> Outcome {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(usage("--bandwidth must be positive"));
    }
    let ds = Dataset::open(data)?;
    let extent = Extent::default();
    let h = forcemap::bandwidth_for(&extent, IMAGE_SIZE, IMAGE_SIZE, bandwidth);
    let keys: Vec<(usize, usize)> = (0..ds.manifest.n_bodies)
        .flat_map(|b| (0..ds.manifest.n_trials).map(move |t| (b, t)))
        .collect();
    let maps = keys
        .par_iter()
        .map(|&(b, t)| -> anyhow::Result<(RealImage, ClassImage)> {
            let trial = ds.trial(b, t)?;
            let points = forcemap::force_map_points(&trial.trajectories)?;
            let map = forcemap::kde_image(&points, h, &extent, IMAGE_SIZE, IMAGE_SIZE)?;
            Ok((map, ds.ground_truth(b, t)?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let ids: Vec<u64> = keys.iter().map(|&(b, _)| ds.manifest.bodies[b].id).collect();
    let pick = |split: Split| -> (Vec<RealImage>, Vec<ClassImage>) {
        maps.iter()
            .zip(&ids)
            .filter(|(_, &id)| split.contains(id, val_every))
            .map(|((m, g), _)| (m.clone(), g.clone()))
            .unzip()
    };
    let (val_maps, val_gts) = pick(Split::Val);
    let threshold = match threshold {
        Some(t) => t,
        None => {
            if val_maps.is_empty() {
                return Err(usage("validation split is empty; pass --threshold or change --val-every"));
            }
            let grid = forcemap::quantile_grid(&val_maps, forcemap::THRESHOLD_LEVELS);
            let (t, f1) = forcemap::best_threshold(&val_maps, &val_gts, &grid)?;
            println!("validation: {} trials, lump F1 {f1:.4}", val_maps.len());
            t
        }
    };
    println!("threshold: {threshold:.6e}");

    for (&(b, t), (map, _)) in keys.iter().zip(&maps) {
        let id = ds.manifest.bodies[b].id;
        let dir = predictions::trial_path(out, id, t);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        io::write_real_image(&dir.join("forcemap.pfim"), map)?;
        let mask = forcemap::binarize(map, threshold);
        io::write_class_image(&predictions::pred_file(out, id, t, 0), &mask.to_class_image())?;
    }
    let (test_maps, test_gts) = pick(Split::Test);
    if !test_maps.is_empty() {
        let mut sum = 0.0;
        for (m, g) in test_maps.iter().zip(&test_gts) {
            sum += forcemap::lump_f1(&forcemap::binarize(m, threshold), g)?;
        }
        println!("test: {} trials, lump F1 {:.4}", test_maps.len(), sum / test_maps.len() as f64);
    }
    println!("wrote {} force maps to {}", maps.len(), out.display());
    Ok(())
}

fn read_stack(paths: &[std::path::PathBuf]) -> anyhow::Result<Vec<ClassImage>> {
    paths
        .iter()
        .map(|p| io::read_class_image(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

/// Relative lump-size growth; an empty first stack grows infinitely if the
/// second has any lump.
fn size_growth(a: &[ClassImage], b: &[ClassImage]) -> anyhow::Result<f64> {
    match change::lump_size_growth(a, b, &Extent::default()) {
        Ok(g) => Ok(g),
        Err(palpsim::Error::EmptyLump) => Ok(if b.iter().any(|im| im.count(LUMP) > 0) {
            f64::INFINITY
        } else {
            0.0
        }),
        Err(e) => Err(e.into()),
    }
}

fn decide(a: &[ClassImage], b: &[ClassImage], c: f64, threshold: f64, lump_size: Option<f64>) -> anyhow::Result<(f64, bool, Option<change::ChangeReport>)> {
    match lump_size {
        Some(rel) => {
            let g = size_growth(a, b)?;
            Ok((g, g > rel, None))
        }
        None => {
            let report = change::change_report(&ImageStack::from_class_images(a)?, &ImageStack::from_class_images(b)?, c)?;
            Ok((report.score, change::classify_change(report.score, threshold), Some(report)))
        }
    }
}

fn check_change_args(c: f64, threshold: f64, lump_size: Option<f64>) -> Outcome {
    if !(c > 0.0 && c.is_finite()) {
        return Err(usage("--c must be positive"));
    }
    if !threshold.is_finite() || lump_size.is_some_and(|r| !r.is_finite()) {
        return Err(usage("thresholds must be finite"));
    }
    Ok(())
}

fn change_pair(
    a: &[std::path::PathBuf],
    b: &[std::path::PathBuf],
    score_map: Option<&Path>,
    c: f64,
    threshold: f64,
    lump_size: Option<f64>,
) -> Outcome {
    check_change_args(c, threshold, lump_size)?;
    let (sa, sb) = (read_stack(a)?, read_stack(b)?);
    let (score, changed, report) = decide(&sa, &sb, c, threshold, lump_size)?;
    if let (Some(path), Some(report)) = (score_map, &report) {
        io::write_real_image(path, &report.scores)?;
    }
    match lump_size {
        Some(_) => println!("lump size growth: {score:.6}"),
        None => println!("change score: {score:.6}"),
    }
    println!("decision: {}", if changed { "changed" } else { "unchanged" });
    Ok(())
}

fn change_dataset(data: &Path, pred: &Path, c: f64, threshold: f64, lump_size: Option<f64>) -> Outcome {
    check_change_args(c, threshold, lump_size)?;
    let ds = Dataset::open(data)?;
    if ds.manifest.n_trials < 2 {
        return Err(Failure::Data(anyhow!("dataset has fewer than 2 trials per body")));
    }
    let results = ds
        .manifest
        .bodies
        .par_iter()
        .map(|body| -> anyhow::Result<(f64, bool, bool)> {
            let a = predictions::load_stack(pred, body.id, 0)?;
            let b = predictions::load_stack(pred, body.id, 1)?;
            let (score, changed, _) = decide(&a, &b, c, threshold, lump_size)?;
            Ok((score, changed, body.change_flag))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut cm = ConfusionMatrix::default();
    for &(_, predicted, actual) in &results {
        cm.record(predicted, actual);
    }
    let scores: Vec<f64> = results.iter().map(|r| r.0).collect();
    let labels: Vec<bool> = results.iter().map(|r| r.2).collect();
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!("                 predicted");
    println!("                 changed  unchanged");
    println!("actual changed   {:>7}  {:>9}", cm.true_pos, cm.false_neg);
    println!("actual unchanged {:>7}  {:>9}", cm.false_pos, cm.true_neg);
    println!("recall: {}", fmt(cm.recall()));
    println!("false alarm rate: {}", fmt(cm.false_alarm_rate()));
    println!("auc: {}", fmt(change::roc_auc(&scores, &labels)));
    Ok(())
}

#[derive(Default)]
struct MetricTotals {
    images: usize,
    macro_f1: f64,
    lump_f1: f64,
    size_err: f64,
    size_n: usize,
    com_err: f64,
    com_n: usize,
    missing_lump: usize,
}

impl MetricTotals {
    fn add(&mut self, pred: &ClassImage, gt: &ClassImage) -> anyhow::Result<()> {
        let extent = Extent::default();
        self.images += 1;
        self.macro_f1 += raster::f1_score(pred, gt)?;
        self.lump_f1 += raster::class_counts(pred, gt, LUMP)?.f1();
        if gt.count(LUMP) > 0 {
            self.size_err += raster::size_error(pred, gt, &extent)?;
            self.size_n += 1;
            match raster::com_error(pred, gt, &extent) {
                Ok(d) => {
                    self.com_err += d;
                    self.com_n += 1;
                }
                Err(palpsim::Error::EmptyLump) => self.missing_lump += 1,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }

    fn print(&self, label: &str) {
        let mean = |s: f64, n: usize| if n == 0 { "n/a".to_string() } else { format!("{:.4}", s / n as f64) };
        println!("split   images  macro_f1  lump_f1  size_err_%  com_err  no_lump_pred");
        println!(
            "{label:<7} {:>6}  {:>8}  {:>7}  {:>10}  {:>7}  {:>12}",
            self.images,
            mean(self.macro_f1, self.images),
            mean(self.lump_f1, self.images),
            mean(self.size_err, self.size_n),
            mean(self.com_err, self.com_n),
            self.missing_lump
        );
    }
}

fn metrics_pair(image: &Path, gt: &Path) -> Outcome {
    let pred = io::read_class_image(image)?;
    let truth = io::read_class_image(gt)?;
    let mut totals = MetricTotals::default();
    totals.add(&pred, &truth)?;
    totals.print("pair");
    Ok(())
}

fn metrics_dataset(data: &Path, pred: &Path, split: Split, val_every: u64) -> Outcome {
    let ds = Dataset::open(data)?;
    let mut totals = MetricTotals::default();
    for (b, body) in ds.manifest.bodies.iter().enumerate() {
        if !split.contains(body.id, val_every) {
            continue;
        }
        for t in 0..ds.manifest.n_trials {
            let gt = ds.ground_truth(b, t)?;
            for p in predictions::load_stack(pred, body.id, t)? {
                totals.add(&p, &gt)?;
            }
        }
    }
    if totals.images == 0 {
        return Err(Failure::Data(anyhow!("no predictions in the selected split")));
    }
    let label = match split {
        Split::All => "all",
        Split::Val => "val",
        Split::Test => "test",
    };
    totals.print(label);
    Ok(())
}

fn inspect(path: &Path) -> Outcome {
    if path.is_dir() {
        let ds = Dataset::open(path)?;
        let m = &ds.manifest;
        let steps: usize = m.bodies.iter().flat_map(|b| &b.trials).map(|t| t.unconverged_steps).sum();
        println!("schema version: {}", m.schema_version);
        println!("master seed: {}", m.master_seed);
        println!("bodies: {} ({} flagged for change)", m.n_bodies, m.changed_count());
        println!("trials per body: {}", m.n_trials);
        println!("trajectories per trial: {}", m.n_traj);
        println!("unconverged solves: {steps}");
        println!("tree hash: {}", io::tree_hash(path)?);
        return Ok(());
    }
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match bytes.get(..4) {
        Some(b"PALP") => {
            let t = io::decode_trajectory(&bytes)?;
            let last = t.len() - 1;
            println!("trajectory: T = {}, k = {}, angle = {:.6}", t.len(), t.k, t.angle);
            println!("converged: {}/{}", t.converged.iter().filter(|&&c| c).count(), t.len());
            println!("force norm first/last: {:.6e} / {:.6e}", t.force_norm(0), t.force_norm(last));
        }
        Some(b"PIMG") => {
            let im = io::decode_class_image(&bytes)?;
            println!(
                "class image {}x{}: background {}, body {}, lump {}",
                im.width,
                im.height,
                im.count(0),
                im.count(1),
                im.count(2)
            );
        }
        Some(b"PFIM") => {
            let im = io::decode_real_image(&bytes)?;
            let (lo, hi) = im.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            println!("real image {}x{}: min {lo:.6e}, max {hi:.6e}, mean {:.6e}", im.width, im.height, im.mean());
        }
        _ => return Err(Failure::Data(anyhow!("{}: unrecognized file", path.display()))),
    }
    Ok(())
}
