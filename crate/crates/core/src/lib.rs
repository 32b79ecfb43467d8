//! Generating functions quadratic at infinity for contact Hamiltonian
//! isotopies of the zero section in `J^1 R^n`, built from broken
//! Hamiltonian-translated horizontal trajectories.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod action;
pub mod contact;
pub mod error;
pub mod families;
pub mod flow;
pub mod genfun;
pub mod hamlang;
pub mod legendrian;
mod newton;
pub mod rng;

pub use action::Path;
pub use contact::{ContactPoint, TangentVector};
pub use error::{Error, Result};
pub use flow::{FlowMap, FlowSpec, Trajectory};
pub use genfun::{CutoffParams, FiberPoint, Partition};
pub use hamlang::{HamiltonianExpr, JetValue};
pub use legendrian::Grid;
