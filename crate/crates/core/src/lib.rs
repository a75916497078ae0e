//! Density-matrix toolkit for stochastic stabilizer-measurement emulation (QME).
//!
//! Measuring an involutive observable `S` without recording the outcome is the
//! same channel as applying `S` with probability one half. This crate builds
//! that identity out into a small simulation stack: one- and two-qubit density
//! matrices, measurement and dephasing channels, a superconducting-qubit noise
//! model with an imperfect CZ gate, Bell-state codes, shot-level tomography, a
//! least-squares fitter for CZ error parameters, and sweep harnesses.

#![forbid(unsafe_code)]

pub mod channels;
pub mod codes;
pub mod densmat;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod noise;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};
