//! Equatorial microphone array (EMA) processing: encodes the pressure on a
//! ring of microphones around a rigid sphere into ACN/N3D ambisonic signals,
//! simulates that capture analytically for verification, and renders the
//! result binaurally from spherical-harmonic HRTFs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dsp;
pub mod encoder;
pub mod error;
pub mod harmonics;
pub mod io;
pub mod radial;
pub mod renderer;
pub mod simulator;
pub mod sphmath;

pub use error::{Error, Result};
