//! Branching programs over dags: black pebbling, dag evaluation, the GEN
//! problem, the reduction between them, program transformations in both
//! directions, and executable verification of the `k^p` size lower bound on
//! small instances.

pub mod analysis;
pub mod bp;
pub mod cli;
pub mod dag;
pub mod dageval;
pub mod error;
pub mod genprob;
pub mod pebbling;
pub mod reduction;
pub mod report;
pub mod transform;

pub use error::Error;
