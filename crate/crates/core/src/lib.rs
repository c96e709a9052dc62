#![cfg_attr(not(test), no_std)]
//! Building blocks for camera relocalization experiments in rendered
//! underwater scenes.
//!
//! The crate covers the full desk-scale pipeline: quaternion and pose
//! algebra ([`geom`]), geometry-aware training losses ([`loss`]), a
//! ray-cast scene renderer with water-column effects ([`scene`]),
//! timestamped dataset handling ([`data`]), a small convolutional pose
//! regressor trained by hand-rolled backprop ([`regressor`]), pose
//! synthesis and photometric augmentation ([`augment`]), an extended
//! Kalman filter fusing visual pose estimates with compass and
//! altimeter readings ([`fusion`]), and error metrics plus reporting
//! types ([`eval`]).
//!
//! Everything is deterministic under a caller-supplied seed; no IO, no
//! clocks, no global state. File formats and the command-line pipeline
//! live in the companion `aquapose` crate.

extern crate alloc;

pub mod augment;
pub mod data;
pub mod eval;
pub mod fusion;
pub mod geom;
pub mod loss;
pub mod regressor;
pub mod rng;
pub mod scene;
