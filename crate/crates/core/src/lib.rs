//! Outdoor-to-indoor 3D positioning with a window-edge diffraction path model.
//!
//! Ranges from anchors outside a building to a node inside are modelled as
//! paths diffracted by the horizontal window edges of the node's floor. The
//! crate provides the diffraction geometry, an offline NLOS-bias
//! characterisation, range simulation, four families of position
//! estimators and a Monte-Carlo harness that scores them.

pub mod bias;
pub mod config;
pub mod diffraction;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod measurement;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{AnchorConfig, BuildingModel, Edge, EdgeKind, NodePosition, Point3};
