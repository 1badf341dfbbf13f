pub mod error;
pub mod rng;
pub mod models;
pub mod graph;
pub mod fpp;
pub mod limit_tree;
pub mod exploration;
pub mod local_limit;
pub mod parallel;
pub mod experiments;
pub mod cli;
