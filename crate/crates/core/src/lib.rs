//! Exact sparse simulation of C-GHZ state preparation with weak cross-Kerr
//! entanglers, homodyne detection and feed-forward.

pub mod analysis;
pub mod entangler;
pub mod error;
pub mod homodyne;
pub mod optics;
pub mod protocols;
pub mod report;
pub mod state;

pub use error::{Error, Result};
