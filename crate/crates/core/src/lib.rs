//! Body-scale NFC simulator.

pub mod circuit;
pub mod energy;
pub mod geometry;
pub mod magnetics;
pub mod protocol;
pub mod scenario;
