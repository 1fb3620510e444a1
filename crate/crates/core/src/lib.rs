//! Tracking-by-detection with confidence-adaptive Kalman filtering, EMA
//! appearance and global assignment, plus appearance-free tracklet linking,
//! Gaussian-smoothed interpolation and a small evaluation kit.

pub mod aflink;
pub mod appearance;
pub mod assignment;
pub mod association;
pub mod config;
pub mod error;
pub mod evalkit;
pub mod geometry;
pub mod interpolation;
pub mod manifest;
pub mod mot_io;
pub mod motion;
pub mod tracker;
pub mod workflow;

pub use error::{Error, Result};
pub use geometry::BBox;
