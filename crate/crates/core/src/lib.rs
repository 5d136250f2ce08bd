pub mod geometry;
pub mod problems;
pub mod ep_solver;
pub mod algorithm;
pub mod instances;
pub mod cli;
