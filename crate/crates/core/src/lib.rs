pub mod advi;
pub mod bma;
pub mod curves;
pub mod data;
pub mod diagnostics;
pub mod config;
pub mod criteria;
pub mod draws;
pub mod dual;
pub mod error;
pub mod evidence;
pub mod hmc;
pub mod io;
pub mod model;
pub mod numeric;
pub mod obs;
pub mod priors;
pub mod rng;
pub mod simulate;
pub mod targets;
pub mod transform;

pub use error::{Error, Result};
