//! Camassa–Holm multipeakons: the n-peakon Hamiltonian flow, its tower of
//! first integrals and bi-Hamiltonian structure, and dissipative continuation
//! of trajectories through peakon collisions.

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bihamiltonian;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod field;
pub mod integrals;
pub mod num;
pub mod ode;
pub mod quad;
pub mod sampling;
pub mod state;

pub use error::{Error, Result};
pub use integrals::{eval_h, grad_h, Convention, IntegralTable, IntegralTower, IntegralValue};
pub use state::{energy, kernel_matrix, metric_matrix, momentum, validate_state, PeakonState};
