//! Scenario runners reproducing the numerical experiments.

pub mod noise;
pub mod recovery;
pub mod scenario;
pub mod run;
