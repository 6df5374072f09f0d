//! Numerics for multi-UAV mutual localization.
//!
//! The crate is `no_std` (with `alloc`) and covers the pieces that do not touch
//! the filesystem or threads:
//!
//! - [`channel`]: log-distance path loss, dB-domain RSSI error and the derived
//!   distance-error table.
//! - [`model`]: UAV state, GPS-style position noise and anchor reports.
//! - [`localize`]: least squares, L1 via ADMM and gradient-descent multilateration,
//!   plus error conversion and error weights.
//! - [`magd`]: the mobility-adaptive gradient-descent estimator.
//! - [`threat`]: report tampering and attack scheduling.
//! - [`defense`]: time-evolving anomaly detection and reputation propagation.
//!
//! All sampling functions take an explicit random stream, so results are a pure
//! function of the inputs and the stream state.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod defense;
mod error;
pub mod geometry;
pub mod localize;
pub mod magd;
pub mod math;
pub mod model;
pub mod threat;

pub use error::{Error, Result};
pub use geometry::Vec3;
