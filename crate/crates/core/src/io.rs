//! Binary file formats (little-endian throughout).
//!
//! Trajectory (`PALP`): magic, u32 version = 1, u32 T, u32 pose_dim = 2,
//! u32 k, then T records of `pose_dim + k` f32 values, then T converged
//! bytes (0 or 1).
//!
//! Class image (`PIMG`): magic, u16 height, u16 width, row-major class
//! bytes in 0..=2.
//!
//! Real image (`PFIM`): magic, u16 height, u16 width, row-major f32 values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, FormatError, Result};
use crate::raster::{ClassImage, RealImage, LUMP};
use crate::trajectory::Trajectory;

pub const TRAJECTORY_MAGIC: [u8; 4] = *b"PALP";
pub const TRAJECTORY_VERSION: u32 = 1;
pub const TRAJECTORY_HEADER_LEN: usize = 20;
pub const POSE_DIM: u32 = 2;
pub const CLASS_IMAGE_MAGIC: [u8; 4] = *b"PIMG";
pub const REAL_IMAGE_MAGIC: [u8; 4] = *b"PFIM";
pub const IMAGE_HEADER_LEN: usize = 8;

type FormatResult<T> = std::result::Result<T, FormatError>;

/// Encoded size of a trajectory with `t` steps and `k` force components.
pub fn trajectory_len(t: usize, k: usize) -> Option<usize> {
    let record = k.checked_add(POSE_DIM as usize)?.checked_mul(4)?.checked_add(1)?;
    t.checked_mul(record)?.checked_add(TRAJECTORY_HEADER_LEN)
}

pub fn encode_trajectory(traj: &Trajectory) -> Vec<u8> {
    let t = traj.len();
    let mut out = Vec::with_capacity(trajectory_len(t, traj.k).unwrap_or(0));
    out.extend_from_slice(&TRAJECTORY_MAGIC);
    for v in [TRAJECTORY_VERSION, t as u32, POSE_DIM, traj.k as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for step in 0..t {
        for v in traj.poses[step].iter().chain(traj.force(step)) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend(traj.converged.iter().map(|&c| c as u8));
    out
}

fn magic(bytes: &[u8], expected: [u8; 4], header_len: usize) -> FormatResult<()> {
    if bytes.len() < header_len {
        return Err(FormatError::Truncated {
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("length checked");
    if found != expected {
        return Err(FormatError::BadMagic(found));
    }
    Ok(())
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("in bounds"))
}

fn u16_at(bytes: &[u8], offset: usize) -> u16 {
    u16::from_le_bytes(bytes[offset..offset + 2].try_into().expect("in bounds"))
}

fn f32_at(bytes: &[u8], offset: usize) -> FormatResult<f32> {
    let v = f32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("in bounds"));
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FormatError::NonFinite(offset))
    }
}

fn exact_len(bytes: &[u8], expected: Option<usize>) -> FormatResult<usize> {
    let expected = expected.unwrap_or(usize::MAX);
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes(bytes.len() - expected));
    }
    Ok(expected)
}

pub fn decode_trajectory(bytes: &[u8]) -> FormatResult<Trajectory> {
    magic(bytes, TRAJECTORY_MAGIC, TRAJECTORY_HEADER_LEN)?;
    let version = u32_at(bytes, 4);
    if version != TRAJECTORY_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let t = u32_at(bytes, 8);
    let pose_dim = u32_at(bytes, 12);
    let k = u32_at(bytes, 16);
    if t == 0 {
        return Err(FormatError::BadHeader { field: "T", value: t });
    }
    if pose_dim != POSE_DIM {
        return Err(FormatError::BadHeader {
            field: "pose_dim",
            value: pose_dim,
        });
    }
    if k == 0 {
        return Err(FormatError::BadHeader { field: "k", value: k });
    }
    let (t, k) = (t as usize, k as usize);
    exact_len(bytes, trajectory_len(t, k))?;

    let mut poses = Vec::with_capacity(t);
    let mut forces = Vec::with_capacity(t * k);
    let mut offset = TRAJECTORY_HEADER_LEN;
    for _ in 0..t {
        poses.push([f32_at(bytes, offset)?, f32_at(bytes, offset + 4)?]);
        offset += 8;
        for _ in 0..k {
            forces.push(f32_at(bytes, offset)?);
            offset += 4;
        }
    }
    let mut converged = Vec::with_capacity(t);
    for (index, &value) in bytes[offset..].iter().enumerate() {
        match value {
            0 => converged.push(false),
            1 => converged.push(true),
            _ => return Err(FormatError::BadFlag { index, value }),
        }
    }
    // Shapes and finiteness are already guaranteed here.
    Ok(Trajectory::new(poses, forces, k, converged).expect("validated while decoding"))
}

fn image_header(bytes: &[u8], expected: [u8; 4], bytes_per_pixel: usize) -> FormatResult<(usize, usize)> {
    magic(bytes, expected, IMAGE_HEADER_LEN)?;
    let h = u16_at(bytes, 4);
    let w = u16_at(bytes, 6);
    if h == 0 {
        return Err(FormatError::BadHeader {
            field: "height",
            value: h as u32,
        });
    }
    if w == 0 {
        return Err(FormatError::BadHeader {
            field: "width",
            value: w as u32,
        });
    }
    let (h, w) = (h as usize, w as usize);
    exact_len(bytes, Some(IMAGE_HEADER_LEN + h * w * bytes_per_pixel))?;
    Ok((h, w))
}

fn dims_u16(width: usize, height: usize) -> Result<(u16, u16)> {
    match (u16::try_from(height), u16::try_from(width)) {
        (Ok(h), Ok(w)) if h > 0 && w > 0 => Ok((h, w)),
        _ => Err(Error::InvalidInput(format!(
            "image size {width}x{height} does not fit the format"
        ))),
    }
}

pub fn encode_class_image(image: &ClassImage) -> Result<Vec<u8>> {
    let (h, w) = dims_u16(image.width, image.height)?;
    let mut out = Vec::with_capacity(IMAGE_HEADER_LEN + image.pixels.len());
    out.extend_from_slice(&CLASS_IMAGE_MAGIC);
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&image.pixels);
    Ok(out)
}

pub fn decode_class_image(bytes: &[u8]) -> FormatResult<ClassImage> {
    let (h, w) = image_header(bytes, CLASS_IMAGE_MAGIC, 1)?;
    let pixels = &bytes[IMAGE_HEADER_LEN..];
    if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, &v)| v > LUMP) {
        return Err(FormatError::BadClass { index, value });
    }
    Ok(ClassImage {
        width: w,
        height: h,
        pixels: pixels.to_vec(),
    })
}

/// Values are stored as f32.
pub fn encode_real_image(image: &RealImage) -> Result<Vec<u8>> {
    let (h, w) = dims_u16(image.width, image.height)?;
    let mut out = Vec::with_capacity(IMAGE_HEADER_LEN + 4 * image.values.len());
    out.extend_from_slice(&REAL_IMAGE_MAGIC);
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    for &v in &image.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_real_image(bytes: &[u8]) -> FormatResult<RealImage> {
    let (h, w) = image_header(bytes, REAL_IMAGE_MAGIC, 4)?;
    let values = (0..h * w)
        .map(|i| f32_at(bytes, IMAGE_HEADER_LEN + 4 * i).map(f64::from))
        .collect::<FormatResult<Vec<f64>>>()?;
    Ok(RealImage {
        width: w,
        height: h,
        values,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.flush()?;
        drop(f);
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_atomic(path, &encode_trajectory(traj))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    Ok(decode_trajectory(&read_bytes(path)?)?)
}

pub fn write_class_image(path: &Path, image: &ClassImage) -> Result<()> {
    write_atomic(path, &encode_class_image(image)?)
}

pub fn read_class_image(path: &Path) -> Result<ClassImage> {
    Ok(decode_class_image(&read_bytes(path)?)?)
}

pub fn write_real_image(path: &Path, image: &RealImage) -> Result<()> {
    write_atomic(path, &encode_real_image(image)?)
}

pub fn read_real_image(path: &Path) -> Result<RealImage> {
    Ok(decode_real_image(&read_bytes(path)?)?)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let kind = entry.file_type().map_err(|e| Error::io(&path, e))?;
        if kind.is_dir() {
            collect_files(root, &path, out)?;
        } else if kind.is_file() {
            let rel = path.strip_prefix(root).expect("walk stays under root");
            let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push((rel.join("/"), path));
        }
    }
    Ok(())
}

/// SHA-256 over every regular file under `root`, in sorted relative-path
/// order: path bytes, a NUL, the u64 LE length, then the contents.
pub fn tree_hash(root: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for (rel, path) in files {
        let bytes = read_bytes(&path)?;
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
