//! Pseudospectral simulation of 2D Boussinesq flow in the periodic channel
//! (−1,1)×𝕋 with temperature-only control synthesis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod spectral;
pub mod elliptic;
pub mod quadrature;
pub mod solver;
pub mod return_method;
pub mod smooth;
pub mod control;
pub mod pipeline;
pub mod io;
pub mod cli;
