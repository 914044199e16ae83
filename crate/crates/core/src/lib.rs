//! Energy-minimizing computation offloading across devices, edge servers
//! and a cloud server, learned with a from-scratch DDPG agent whose
//! continuous actions are rounded to binary decisions.

pub mod baselines;
pub mod compute;
pub mod ddpg;
pub mod env;
mod error;
pub mod exec;
pub mod harness;
pub mod net;
pub mod refine;
pub mod seeding;

pub use error::{Error, Result};
