//! Binary linear programs to QUBO via multilevel constraint transformations.

pub mod levelness;
pub mod model;
pub mod penalties;
pub mod poly;
pub mod reduction;
pub mod pipeline;
pub mod solver;
pub mod verify;
pub mod problems;
pub mod bench;
