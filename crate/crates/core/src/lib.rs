//! Multi-user downlink simulation with zero-forcing beamforming over a
//! greedily chosen user subset, and iterative reception of repeat-accumulate
//! coded QPSK at the unselected-user-aware terminals.

pub mod channel;
pub mod coding;
pub mod demod;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod rate;
pub mod receiver;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
