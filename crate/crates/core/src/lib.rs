pub mod attacks;
pub mod container;
pub mod encoding;
pub mod error;
pub mod readout;
pub mod reservoir;

pub use error::{QrcError, Result};
