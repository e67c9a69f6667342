//! Power-plane generation for single PCB layers and layer stacks.
//!
//! The main solver ([`gomlp`]) evolves labeled handle points with a genetic
//! optimizer; each candidate is scored by training a small MLP on pins plus
//! handles, rasterizing its decision regions, and counting split islands.
//! [`astar`] is the MST + A* routing baseline, and [`multilayer`] assigns
//! nets to layers by clustering on inverse Hausdorff / Earth Mover distance.

pub mod astar;
pub mod bench;
pub mod error;
pub mod eval;
pub mod genopt;
pub mod gomlp;
pub mod io;
pub mod model;
pub mod multilayer;
pub mod neural;
pub mod render;
pub mod synth;

pub use error::{Error, Result};
