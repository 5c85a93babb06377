pub mod analysis;
pub mod error;
pub mod hopper;
pub mod instances;
pub mod oracle;
pub mod overlay;
pub mod ratecast;
pub mod rlnc;
pub mod sim;

pub use error::{Error, Result};
