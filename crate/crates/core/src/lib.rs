pub mod cli;
pub mod config;
pub mod conservation;
pub mod extremal;
pub mod noether;
pub mod problem;
pub mod regularity;
pub mod report;
pub mod sampling;
pub mod sections;
pub mod symbolic;
pub mod transform;
