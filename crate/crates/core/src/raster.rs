//! Ground-truth class images and the image-space metrics: macro F1 over
//! the foreground classes, lump size and lump center of mass.

use serde::{Deserialize, Serialize};

use crate::body::BodyModel;
use crate::contact::SpatialGrid;
use crate::error::{Error, Result};
use crate::geom::Vec2;

pub const BACKGROUND: u8 = 0;
pub const BODY: u8 = 1;
pub const LUMP: u8 = 2;

pub const IMAGE_SIZE: usize = 128;

/// World rectangle covered by an image. Row 0 is the top (`y_max`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Extent {
    fn default() -> Self {
        Extent {
            x_min: -1.2,
            x_max: 1.2,
            y_min: -0.2,
            y_max: 2.2,
        }
    }
}

impl Extent {
    pub fn pitch(&self, width: usize, height: usize) -> (f64, f64) {
        (
            (self.x_max - self.x_min) / width as f64,
            (self.y_max - self.y_min) / height as f64,
        )
    }

    pub fn pixel_area(&self, width: usize, height: usize) -> f64 {
        let (px, py) = self.pitch(width, height);
        px * py
    }

    pub fn pixel_center(&self, row: usize, col: usize, width: usize, height: usize) -> Vec2 {
        let (px, py) = self.pitch(width, height);
        [
            self.x_min + (col as f64 + 0.5) * px,
            self.y_max - (row as f64 + 0.5) * py,
        ]
    }
}

/// Row-major image of class labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl ClassImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<ClassImage> {
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|&&v| v > LUMP) {
            return Err(Error::InvalidInput(format!("class value {v} outside 0..=2")));
        }
        Ok(ClassImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, class: u8) -> ClassImage {
        ClassImage {
            width,
            height,
            pixels: vec![class; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn count(&self, class: u8) -> usize {
        self.pixels.iter().filter(|&&v| v == class).count()
    }

    pub fn same_shape(&self, other: &ClassImage) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Row-major image of real values (force maps, change scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<RealImage> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(RealImage {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> RealImage {
        RealImage {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn same_shape(&self, other: &RealImage) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// 128×128 ground truth over the default extent.
pub fn rasterize(body: &BodyModel) -> ClassImage {
    rasterize_with(body, &Extent::default(), IMAGE_SIZE, IMAGE_SIZE)
}

/// Label each pixel by its center: lump disc, else any rest triangle,
/// else background.
pub fn rasterize_with(body: &BodyModel, extent: &Extent, width: usize, height: usize) -> ClassImage {
    let mesh = &body.mesh;
    let (px, py) = extent.pitch(width, height);
    let grid = SpatialGrid::over_mesh(&mesh.rest_positions, &mesh.triangles, 4.0 * px.max(py));
    let mut pixels = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let p = extent.pixel_center(row, col, width, height);
            let class = if body.lump.is_some_and(|l| l.contains(p)) {
                LUMP
            } else if grid.locate(p, &mesh.rest_positions, &mesh.triangles).is_some() {
                BODY
            } else {
                BACKGROUND
            };
            pixels.push(class);
        }
    }
    ClassImage {
        width,
        height,
        pixels,
    }
}

/// Pixel confusion counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ClassCounts {
    /// F1, with 1 when the class is absent from both images.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_pos + self.false_pos + self.false_neg;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.true_pos as f64 / denom as f64
        }
    }
}

pub fn class_counts(pred: &ClassImage, gt: &ClassImage, class: u8) -> Result<ClassCounts> {
    pred.same_shape(gt)?;
    let mut c = ClassCounts::default();
    for (&p, &g) in pred.pixels.iter().zip(&gt.pixels) {
        match (p == class, g == class) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Macro-average of the body and lump F1 scores.
pub fn f1_score(pred: &ClassImage, gt: &ClassImage) -> Result<f64> {
    let body = class_counts(pred, gt, BODY)?.f1();
    let lump = class_counts(pred, gt, LUMP)?.f1();
    Ok(0.5 * (body + lump))
}

/// World area of the lump pixels.
pub fn lump_size(image: &ClassImage, extent: &Extent) -> f64 {
    image.count(LUMP) as f64 * extent.pixel_area(image.width, image.height)
}

/// Mean world position of the lump pixel centers.
pub fn lump_com(image: &ClassImage, extent: &Extent) -> Result<Vec2> {
    let mut sum = [0.0; 2];
    let mut n = 0usize;
    for row in 0..image.height {
        for col in 0..image.width {
            if image.get(row, col) == LUMP {
                let p = extent.pixel_center(row, col, image.width, image.height);
                sum[0] += p[0];
                sum[1] += p[1];
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyLump);
    }
    Ok([sum[0] / n as f64, sum[1] / n as f64])
}

/// `|size(pred) - size(gt)| / size(gt)` in percent; undefined for a
/// lump-free ground truth.
pub fn size_error(pred: &ClassImage, gt: &ClassImage, extent: &Extent) -> Result<f64> {
    pred.same_shape(gt)?;
    let truth = lump_size(gt, extent);
    if truth == 0.0 {
        return Err(Error::EmptyLump);
    }
    Ok((lump_size(pred, extent) - truth).abs() / truth * 100.0)
}

/// Distance between the lump centers of mass.
pub fn com_error(pred: &ClassImage, gt: &ClassImage, extent: &Extent) -> Result<f64> {
    pred.same_shape(gt)?;
    let a = lump_com(pred, extent)?;
    let b = lump_com(gt, extent)?;
    Ok((a[0] - b[0]).hypot(a[1] - b[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{generate_body, symmetric_body, LumpSpec};
    use std::f64::consts::PI;

    fn img(w: usize, h: usize, px: &[u8]) -> ClassImage {
        ClassImage::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn f1_identity_and_empty_prediction() {
        let body = generate_body(1, &Default::default()).unwrap();
        let gt = rasterize(&body);
        assert_eq!(f1_score(&gt, &gt).unwrap(), 1.0);
        let blank = ClassImage::filled(128, 128, BACKGROUND);
        assert_eq!(f1_score(&blank, &gt).unwrap(), 0.0);
    }

    #[test]
    fn f1_hand_counted_toy() {
        // body: tp 1, fn 1 -> 2/3; lump: tp 1, fp 1 -> 2/3
        let gt = img(2, 2, &[1, 1, 2, 0]);
        let pred = img(2, 2, &[1, 2, 2, 0]);
        assert!((class_counts(&pred, &gt, BODY).unwrap().f1() - 2.0 / 3.0).abs() < 1e-15);
        assert!((class_counts(&pred, &gt, LUMP).unwrap().f1() - 2.0 / 3.0).abs() < 1e-15);
        assert!((f1_score(&pred, &gt).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_shape_mismatch() {
        assert!(f1_score(&img(1, 2, &[0, 1]), &img(2, 1, &[0, 1])).is_err());
    }

    #[test]
    fn rejects_bad_class_values() {
        assert!(ClassImage::new(1, 1, vec![3]).is_err());
        assert!(ClassImage::new(2, 1, vec![0]).is_err());
    }

    #[test]
    fn lump_free_body_has_no_lump_pixels_and_sits_above_base() {
        let (body, _) = symmetric_body(1.0, 0.15, 0.1, 0.003, 0.1).unwrap();
        let im = rasterize(&body);
        assert_eq!(im.count(LUMP), 0);
        let ext = Extent::default();
        for row in 0..128 {
            for col in 0..128 {
                if im.get(row, col) == BODY {
                    assert!(ext.pixel_center(row, col, 128, 128)[1] >= 0.0);
                }
            }
        }
        assert!(im.count(BODY) > 1000);
    }

    fn with_disc(center: Vec2, radius: f64) -> BodyModel {
        let (mut body, _) = symmetric_body(1.0, 0.15, 0.1, 0.003, 0.1).unwrap();
        body.lump = Some(LumpSpec {
            center,
            radius,
            young: 0.01,
            poisson: 0.1,
        });
        body
    }

    #[test]
    fn disc_area_and_center() {
        let ext = Extent::default();
        let body = with_disc([0.1, 0.5], 0.1);
        let im = rasterize(&body);
        let area = PI * 0.01;
        let size = lump_size(&im, &ext);
        assert!((size - area).abs() / area < 0.10, "{size} vs {area}");
        let com = lump_com(&im, &ext).unwrap();
        let (px, _) = ext.pitch(128, 128);
        assert!((com[0] - 0.1).abs() < 0.5 * px && (com[1] - 0.5).abs() < 0.5 * px, "{com:?}");
    }

    #[test]
    fn finer_raster_converges_to_disc() {
        let ext = Extent::default();
        let body = with_disc([-0.2, 0.55], 0.13);
        let area = PI * 0.13 * 0.13;
        let coarse = (lump_size(&rasterize_with(&body, &ext, 128, 128), &ext) - area).abs();
        let fine = (lump_size(&rasterize_with(&body, &ext, 512, 512), &ext) - area).abs();
        assert!(fine <= coarse + 1e-12 && fine / area < 0.01, "{coarse} {fine}");
    }

    #[test]
    fn size_and_com_errors() {
        let ext = Extent::default();
        let gt = rasterize(&with_disc([0.0, 0.5], 0.1));
        assert_eq!(size_error(&gt, &gt, &ext).unwrap(), 0.0);
        assert_eq!(com_error(&gt, &gt, &ext).unwrap(), 0.0);

        // shift every lump pixel one column to the right
        let mut shifted = gt.clone();
        for row in 0..128 {
            for col in (1..128).rev() {
                let v = gt.get(row, col - 1);
                let here = gt.get(row, col);
                shifted.pixels[row * 128 + col] = if v == LUMP { LUMP } else if here == LUMP { BODY } else { here };
            }
        }
        let (px, _) = ext.pitch(128, 128);
        assert!((com_error(&shifted, &gt, &ext).unwrap() - px).abs() < 1e-12);
        assert!(size_error(&shifted, &gt, &ext).unwrap().abs() < 1e-12);

        let blank = ClassImage::filled(128, 128, BODY);
        assert!(matches!(size_error(&gt, &blank, &ext), Err(Error::EmptyLump)));
        assert!(matches!(lump_com(&blank, &ext), Err(Error::EmptyLump)));
    }

    #[test]
    fn size_error_twenty_percent() {
        let ext = Extent::new_unit();
        let gt = img(10, 1, &[2, 2, 2, 2, 2, 0, 0, 0, 0, 0]);
        let pred = img(10, 1, &[2, 2, 2, 2, 2, 2, 0, 0, 0, 0]);
        assert!((size_error(&pred, &gt, &ext).unwrap() - 20.0).abs() < 1e-12);
        assert!((lump_size(&gt, &ext) - 5.0 * ext.pixel_area(10, 1)).abs() < 1e-15);
        let single = img(10, 1, &[0, 0, 2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(lump_com(&single, &ext).unwrap(), ext.pixel_center(0, 2, 10, 1));
    }

    impl Extent {
        fn new_unit() -> Extent {
            Extent {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            }
        }
    }
}
