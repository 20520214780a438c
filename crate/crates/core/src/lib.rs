//! Earth-observation CONOPS models against moving ground targets: a nadir
//! baseline, agile slewing, and multistage constellation reconfiguration.

pub mod agility;
pub mod astro;
pub mod error;
pub mod harness;
pub mod maneuver;
pub mod mcrp;
pub mod tc;
pub mod visibility;

pub use error::{Error, Result};
