#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod config;
pub mod experiments;
pub mod io;
pub mod map;
pub mod partition;
pub mod renewal;
pub mod rng;
pub mod runner;

pub use density::{Grid, GridDensity, TailFunction};
pub use error::{Error, Result};
pub use map::{Branch, LsvMap, ParameterSequence};
