//! Meeting scheduling over a shared weekly calendar.

pub mod baselines;
pub mod calendar;
pub mod checkpoint;
pub mod dialogue;
pub mod env;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod nn;
pub mod policy;
pub mod slotmap;
pub mod trainer;

pub use error::{Error, Result};
