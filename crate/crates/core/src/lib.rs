pub mod dse;
pub mod error;
pub mod fieldsim;
pub mod ledger;
pub mod pipeline;
pub mod planner;
pub mod popgen;
pub mod prob;
pub mod rng;
pub mod scheme;
pub mod synthmap;

pub use error::{Error, Result};
