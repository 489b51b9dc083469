//! Change detection over permutation-ensemble image stacks.

use crate::error::{Error, Result};
use crate::raster::{lump_size, ClassImage, Extent, RealImage};

pub const DEFAULT_CONFIDENCE_CONSTANT: f64 = 0.25;
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// `P >= 2` equally shaped images; class labels enter as their raw index.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub images: Vec<RealImage>,
}

impl ImageStack {
    pub fn new(images: Vec<RealImage>) -> Result<ImageStack> {
        if images.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "an image stack needs at least 2 images, got {}",
                images.len()
            )));
        }
        for im in &images[1..] {
            im.same_shape(&images[0])?;
        }
        Ok(ImageStack { images })
    }

    pub fn from_class_images(images: &[ClassImage]) -> Result<ImageStack> {
        ImageStack::new(
            images
                .iter()
                .map(|im| RealImage {
                    width: im.width,
                    height: im.height,
                    values: im.pixels.iter().map(|&v| v as f64).collect(),
                })
                .collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.images[0].width
    }

    pub fn height(&self) -> usize {
        self.images[0].height
    }
}

/// Per-pixel mean and population standard deviation.
pub fn stack_stats(stack: &ImageStack) -> (RealImage, RealImage) {
    let (w, h) = (stack.width(), stack.height());
    let n = stack.images.len() as f64;
    let mut mean = RealImage::zeros(w, h);
    let mut std = RealImage::zeros(w, h);
    for i in 0..w * h {
        let m = stack.images.iter().map(|im| im.values[i]).sum::<f64>() / n;
        let var = stack.images.iter().map(|im| (im.values[i] - m).powi(2)).sum::<f64>() / n;
        mean.values[i] = m;
        std.values[i] = var.sqrt();
    }
    (mean, std)
}

/// `C / (C + (σ1 + σ2) / 2)` per pixel.
pub fn confidence_map(sigma1: &RealImage, sigma2: &RealImage, c: f64) -> Result<RealImage> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("confidence constant {c} must be positive")));
    }
    sigma1.same_shape(sigma2)?;
    let values = sigma1
        .values
        .iter()
        .zip(&sigma2.values)
        .map(|(&a, &b)| c / (c + 0.5 * (a + b)))
        .collect();
    RealImage::new(sigma1.width, sigma1.height, values)
}

/// `|μ1 - μ2| · c` per pixel.
pub fn score_map(mean1: &RealImage, mean2: &RealImage, confidence: &RealImage) -> Result<RealImage> {
    mean1.same_shape(mean2)?;
    mean1.same_shape(confidence)?;
    let values = mean1
        .values
        .iter()
        .zip(&mean2.values)
        .zip(&confidence.values)
        .map(|((&a, &b), &c)| (a - b).abs() * c)
        .collect();
    RealImage::new(mean1.width, mean1.height, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeReport {
    pub confidence: RealImage,
    pub scores: RealImage,
    /// Mean of the score map.
    pub score: f64,
}

pub fn change_report(a: &ImageStack, b: &ImageStack, c: f64) -> Result<ChangeReport> {
    let (mean_a, std_a) = stack_stats(a);
    let (mean_b, std_b) = stack_stats(b);
    mean_a.same_shape(&mean_b)?;
    let confidence = confidence_map(&std_a, &std_b, c)?;
    let scores = score_map(&mean_a, &mean_b, &confidence)?;
    let score = scores.mean();
    Ok(ChangeReport {
        confidence,
        scores,
        score,
    })
}

pub fn change_score(a: &ImageStack, b: &ImageStack, c: f64) -> Result<f64> {
    Ok(change_report(a, b, c)?.score)
}

/// Changed iff the score strictly exceeds the threshold.
pub fn classify_change(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// Relative growth of the mean predicted lump size from stack `a` to `b`;
/// the alternative classifier compares it to a threshold.
pub fn lump_size_growth(a: &[ClassImage], b: &[ClassImage], extent: &Extent) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("empty image set".into()));
    }
    let mean = |set: &[ClassImage]| set.iter().map(|im| lump_size(im, extent)).sum::<f64>() / set.len() as f64;
    let before = mean(a);
    if before == 0.0 {
        return Err(Error::EmptyLump);
    }
    Ok((mean(b) - before) / before)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_pos += 1,
            (false, false) => self.true_neg += 1,
            (false, true) => self.false_neg += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    /// Fraction of changed cases detected; `None` without changed cases.
    pub fn recall(&self) -> Option<f64> {
        let p = self.true_pos + self.false_neg;
        (p > 0).then(|| self.true_pos as f64 / p as f64)
    }

    /// Fraction of unchanged cases flagged as changed.
    pub fn false_alarm_rate(&self) -> Option<f64> {
        let n = self.false_pos + self.true_neg;
        (n > 0).then(|| self.false_pos as f64 / n as f64)
    }
}

/// Area under the ROC curve (Mann-Whitney, ties count half).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    if scores.len() != labels.len() {
        return None;
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(w: usize, h: usize, v: &[f64]) -> RealImage {
        RealImage::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn stats_of_zero_one_pair() {
        let s = ImageStack::new(vec![real(2, 1, &[0.0, 1.0]), real(2, 1, &[1.0, 1.0])]).unwrap();
        let (m, sd) = stack_stats(&s);
        assert_eq!(m.values, vec![0.5, 1.0]);
        assert_eq!(sd.values, vec![0.5, 0.0]);
    }

    #[test]
    fn stack_needs_two_same_shaped_images() {
        assert!(ImageStack::new(vec![real(1, 1, &[0.0])]).is_err());
        assert!(ImageStack::new(vec![real(1, 1, &[0.0]), real(2, 1, &[0.0, 0.0])]).is_err());
    }

    #[test]
    fn confidence_examples() {
        let c = 0.25;
        let s = real(1, 1, &[c]);
        assert_eq!(confidence_map(&s, &s, c).unwrap().values[0], 0.5);
        let z = real(1, 1, &[0.0]);
        assert_eq!(confidence_map(&z, &z, c).unwrap().values[0], 1.0);
        let s = real(1, 1, &[0.9]);
        assert!((confidence_map(&s, &s, 0.1).unwrap().values[0] - 0.1).abs() < 1e-15);
        assert!(confidence_map(&z, &z, 0.0).is_err());
    }

    #[test]
    fn one_pixel_difference() {
        let n = 128 * 128;
        let mut b = vec![0.0; n];
        b[77] = 1.0;
        let a = ImageStack::new(vec![RealImage::zeros(128, 128), RealImage::zeros(128, 128)]).unwrap();
        let bs = ImageStack::new(vec![real(128, 128, &b), real(128, 128, &b)]).unwrap();
        let s = change_score(&a, &bs, 0.25).unwrap();
        assert!((s - 1.0 / 16384.0).abs() < 1e-18);
        assert_eq!(change_score(&a, &a, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn threshold_is_strict() {
        assert!(!classify_change(0.1, 0.1));
        assert!(classify_change(0.1000001, 0.1));
    }

    #[test]
    fn confusion_and_auc() {
        let mut cm = ConfusionMatrix::default();
        for (p, a) in [(true, true), (false, true), (true, false), (false, false), (false, false)] {
            cm.record(p, a);
        }
        assert_eq!(cm.recall(), Some(0.5));
        assert_eq!(cm.false_alarm_rate(), Some(1.0 / 3.0));
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1], &[true, false, false]), Some(1.0));
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]), Some(0.5));
        assert_eq!(roc_auc(&[0.5], &[true]), None);
    }

    #[test]
    fn lump_growth() {
        let ext = Extent::default();
        let a = ClassImage::new(2, 1, vec![2, 1]).unwrap();
        let b = ClassImage::new(2, 1, vec![2, 2]).unwrap();
        assert!((lump_size_growth(std::slice::from_ref(&a), &[b], &ext).unwrap() - 1.0).abs() < 1e-12);
        let none = ClassImage::new(2, 1, vec![1, 1]).unwrap();
        assert!(lump_size_growth(&[none], &[a], &ext).is_err());
    }
}
