//! Multi-camera 3D multi-object tracking where each track may absorb one
//! detection per camera, solved as entropic optimal transport with a
//! dustbin row and column for unmatched mass.
//!
//! Data flows `scenario` -> `tracker` (built on `geometry`, `motion`, `fota`)
//! -> `metrics`. `setloss` applies the same matching to query-based training
//! losses; `cli` wires everything into the `fota` binary.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod hungarian;
pub mod metrics;
pub mod model;
pub mod fota;
pub mod motion;
pub mod scenario;
pub mod setloss;
pub mod tracker;
