//! Principal eigenvalue problems for the p-Laplacian and the infinity
//! Laplacian on 2D grid domains.
//!
//! The crate rasterizes unions of balls and rectangles onto uniform grids
//! ([`geometry`], [`grid`]), minimizes the nonlinear Rayleigh quotient for the
//! p-Laplacian principal eigenpair ([`plap`]), solves the infinity
//! ground-state equation with a monotone two-branch fixed-point scheme
//! ([`inf`]), and orchestrates the dumbbell experiments that exhibit two
//! genuinely different ground states at the same eigenvalue ([`experiments`]).
//!
//! With the default `parallel` feature the inner loops (Jacobi sweeps,
//! energy/gradient map-reduces, distance propagation) run on rayon; without it
//! the same kernels run sequentially. Results are bit-identical either way:
//! sums use fixed-size blocks and every other reduction is an
//! order-independent max.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod inf;
pub mod io;
pub mod par;
pub mod plap;

pub use error::{Error, Result};
