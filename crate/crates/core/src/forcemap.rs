//! Force-map baseline: terminal probe positions weighted by terminal force,
//! smoothed with a Gaussian kernel and thresholded into a lump mask.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::raster::{ClassImage, Extent, RealImage, BACKGROUND, IMAGE_SIZE, LUMP};
use crate::trajectory::Trajectory;

/// Fraction of each trajectory (from the end) that contributes to a point.
pub const TERMINAL_FRACTION: f64 = 0.1;

/// Default kernel bandwidth in pixels.
pub const DEFAULT_BANDWIDTH_PIXELS: f64 = 2.0;

/// Number of thresholds in the search grid.
pub const THRESHOLD_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub location: Vec2,
    pub weight: f64,
}

/// One point per trajectory: mean pose and mean reading norm over the last
/// `ceil(0.1 T)` steps.
pub fn force_map_points(trajectories: &[Trajectory]) -> Result<Vec<WeightedPoint>> {
    if trajectories.is_empty() {
        return Err(Error::InvalidInput("trial has no trajectories".into()));
    }
    Ok(trajectories
        .iter()
        .map(|traj| {
            let t = traj.len();
            let n = ((TERMINAL_FRACTION * t as f64).ceil() as usize).clamp(1, t);
            let mut loc = [0.0; 2];
            let mut weight = 0.0;
            for step in t - n..t {
                loc[0] += traj.poses[step][0] as f64;
                loc[1] += traj.poses[step][1] as f64;
                weight += traj.force_norm(step);
            }
            let n = n as f64;
            WeightedPoint {
                location: [loc[0] / n, loc[1] / n],
                weight: weight / n,
            }
        })
        .collect())
}

/// Bandwidth in world units equal to `pixels` pixel pitches.
pub fn bandwidth_for(extent: &Extent, width: usize, height: usize, pixels: f64) -> f64 {
    let (px, py) = extent.pitch(width, height);
    pixels * px.max(py)
}

/// `sum_i w_i exp(-|x - p_i|^2 / (2 h^2))` at every pixel center.
pub fn kde_image(
    points: &[WeightedPoint],
    bandwidth: f64,
    extent: &Extent,
    width: usize,
    height: usize,
) -> Result<RealImage> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidInput(format!("bandwidth {bandwidth} must be positive")));
    }
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let c = extent.pixel_center(row, col, width, height);
            values.push(
                points
                    .iter()
                    .map(|p| {
                        let dx = c[0] - p.location[0];
                        let dy = c[1] - p.location[1];
                        p.weight * (-(dx * dx + dy * dy) * inv).exp()
                    })
                    .sum(),
            );
        }
    }
    RealImage::new(width, height, values)
}

/// Default 128×128 force map.
pub fn force_map(trajectories: &[Trajectory]) -> Result<RealImage> {
    let extent = Extent::default();
    let h = bandwidth_for(&extent, IMAGE_SIZE, IMAGE_SIZE, DEFAULT_BANDWIDTH_PIXELS);
    kde_image(&force_map_points(trajectories)?, h, &extent, IMAGE_SIZE, IMAGE_SIZE)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Lump where set, background elsewhere.
    pub fn to_class_image(&self) -> ClassImage {
        ClassImage {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { LUMP } else { BACKGROUND }).collect(),
        }
    }
}

pub fn binarize(image: &RealImage, threshold: f64) -> Mask {
    Mask {
        width: image.width,
        height: image.height,
        bits: image.values.iter().map(|&v| v >= threshold).collect(),
    }
}

/// F1 of a mask against the lump class of `gt`; 1 when both are empty.
pub fn lump_f1(mask: &Mask, gt: &ClassImage) -> Result<f64> {
    if (mask.width, mask.height) != (gt.width, gt.height) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} mask vs {}x{} image",
            mask.width, mask.height, gt.width, gt.height
        )));
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&m, &g) in mask.bits.iter().zip(&gt.pixels) {
        match (m, g == LUMP) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fnn;
    Ok(if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 })
}

/// `levels` evenly spaced quantiles (0 to 1 inclusive) of all pooled values.
pub fn quantile_grid(images: &[RealImage], levels: usize) -> Vec<f64> {
    let mut all: Vec<f64> = images.iter().flat_map(|im| im.values.iter().copied()).collect();
    if all.is_empty() || levels == 0 {
        return Vec::new();
    }
    all.sort_by(f64::total_cmp);
    let last = all.len() - 1;
    let mut grid: Vec<f64> = (0..levels)
        .map(|i| {
            let q = if levels == 1 { 0.5 } else { i as f64 / (levels - 1) as f64 };
            all[(q * last as f64).round() as usize]
        })
        .collect();
    grid.dedup();
    grid
}

/// Threshold maximizing mean lump F1 over the pairs; ties keep the earliest
/// grid entry.
pub fn best_threshold(images: &[RealImage], truths: &[ClassImage], grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty threshold grid".into()));
    }
    if images.len() != truths.len() || images.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} force maps vs {} ground truths",
            images.len(),
            truths.len()
        )));
    }
    let mut best = (grid[0], f64::NEG_INFINITY);
    for &t in grid {
        let mut sum = 0.0;
        for (im, gt) in images.iter().zip(truths) {
            sum += lump_f1(&binarize(im, t), gt)?;
        }
        let mean = sum / images.len() as f64;
        if mean > best.1 {
            best = (t, mean);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(poses: &[[f32; 2]], norm: f32) -> Trajectory {
        let forces = poses.iter().flat_map(|_| [norm, 0.0]).collect();
        Trajectory::new(poses.to_vec(), forces, 2, vec![true; poses.len()]).unwrap()
    }

    #[test]
    fn terminal_window_is_ceil_tenth() {
        // T = 11 -> the last 2 steps
        let poses: Vec<[f32; 2]> = (0..11).map(|i| [0.0, 2.0 - 0.1 * i as f32]).collect();
        let p = force_map_points(&[traj(&poses, 3.0)]).unwrap();
        let expected = (poses[9][1] as f64 + poses[10][1] as f64) / 2.0;
        assert!((p[0].location[1] - expected).abs() < 1e-12);
        assert!((p[0].weight - 3.0).abs() < 1e-12);
        assert!(force_map_points(&[]).is_err());
    }

    #[test]
    fn single_point_kde_matches_gaussian() {
        let ext = Extent::default();
        let h = 0.1;
        let loc = ext.pixel_center(40, 70, 128, 128);
        let img = kde_image(&[WeightedPoint { location: loc, weight: 2.0 }], h, &ext, 128, 128).unwrap();
        assert!((img.get(40, 70) - 2.0).abs() < 1e-15);
        let q = ext.pixel_center(45, 60, 128, 128);
        let d2 = (q[0] - loc[0]).powi(2) + (q[1] - loc[1]).powi(2);
        assert!((img.get(45, 60) - 2.0 * (-d2 / (2.0 * h * h)).exp()).abs() < 1e-15);
        assert!(kde_image(&[], 0.0, &ext, 4, 4).is_err());
    }

    #[test]
    fn binarize_inclusive_and_f1() {
        let im = RealImage::new(2, 2, vec![0.1, 0.5, 0.5, 0.9]).unwrap();
        let m = binarize(&im, 0.5);
        assert_eq!(m.bits, vec![false, true, true, true]);
        let gt = ClassImage::new(2, 2, vec![1, 2, 1, 2]).unwrap();
        assert!((lump_f1(&m, &gt).unwrap() - 0.8).abs() < 1e-15);
        let empty = ClassImage::new(2, 2, vec![1; 4]).unwrap();
        assert_eq!(lump_f1(&binarize(&im, 1.0), &empty).unwrap(), 1.0);
    }

    #[test]
    fn best_threshold_finds_separating_level() {
        let im = RealImage::new(4, 1, vec![0.0, 0.2, 0.7, 0.9]).unwrap();
        let gt = ClassImage::new(4, 1, vec![1, 1, 2, 2]).unwrap();
        let grid = quantile_grid(std::slice::from_ref(&im), THRESHOLD_LEVELS);
        assert_eq!(grid, vec![0.0, 0.2, 0.7, 0.9]);
        let (t, f1) = best_threshold(&[im], &[gt], &grid).unwrap();
        assert_eq!(t, 0.7);
        assert_eq!(f1, 1.0);
        assert!(best_threshold(&[], &[], &[]).is_err());
    }
}
