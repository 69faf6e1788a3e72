//! Thresholding simulation of anisotropic, volume-preserving mean-curvature
//! flow of a particle resting on a rigid substrate.
//!
//! The crate provides periodic grids and container geometries, anisotropies and
//! convolution kernels, the extended surface tensions, the nonlocal energy
//! `E_h` with its sharp-interface counterpart, and the thresholding scheme.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anisotropy;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod kernel;
pub mod quadrature;
pub mod report;
pub mod energy;
pub mod expr;
pub mod shapes;
pub mod tensions;
pub mod scheme;
pub mod harness;
