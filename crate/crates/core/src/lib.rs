//! Exact solver for vehicle routing problems whose objective is a ratio of
//! two linear route functions: cost over load, or profit over time.
//!
//! The solution pipeline combines dual bounds from an integer relaxation
//! and from the linear relaxation, enumerates every route whose reduced
//! cost can still matter, and solves the reduced set-partitioning problem
//! with an integer Dinkelbach loop over a branch-and-bound solver.

pub mod bounds;
pub mod brute;
pub mod error;
pub mod exact;
pub mod gen;
pub mod genr;
pub mod instance;
pub mod lp;
pub mod matrix;
pub mod mip;
pub mod model;
pub mod ngpath;

pub use error::{Error, Result};
pub use instance::{Instance, ObjectiveKind};
pub use model::{Ratio, Route, Solution};
