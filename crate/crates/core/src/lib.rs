//! Quasi-static 2D finite-element palpation of soft bodies.
//!
//! A [`body::BodyModel`] is a triangulated half-disc with per-element
//! materials and an optional stiff circular lump. A [`solver::Simulator`]
//! presses a ring-shaped probe into it and records force readings; the
//! [`dataset`] module runs whole trials and writes them in the [`io`]
//! formats. [`raster`], [`forcemap`] and [`change`] evaluate images.

pub mod body;
pub mod change;
pub mod config;
pub mod contact;
pub mod dataset;
pub mod delaunay;
pub mod elasticity;
pub mod error;
pub mod forcemap;
pub mod geom;
pub mod io;
pub mod mesh;
pub mod palpation;
pub mod raster;
pub mod rng;
pub mod solver;
pub mod trajectory;

pub use error::{Error, FormatError, Result};
