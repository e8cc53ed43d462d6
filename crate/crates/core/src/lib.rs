//! Sparse Positivstellensatz hierarchies for polynomial optimization over
//! block-structured variables `(X, Y, Z)`.
//!
//! Objectives and constraints are split along the blocks `X ∪ Y` and
//! `Y ∪ Z`; the relaxations built here never introduce moments coupling `X`
//! with `Z`.

pub mod certificate;
pub mod cli;
pub mod error;
pub mod moments;
pub mod oracle;
pub mod poly;
pub mod relaxation;
pub mod solver;

pub use error::{Error, Result};
pub use poly::{Block, BlockLayout, ExponentVector, Polynomial, ProblemInstance, Rational};
pub use relaxation::{ConicProgram, LinearProgram, Variant};
pub use solver::{SolveReport, SolveStatus};
