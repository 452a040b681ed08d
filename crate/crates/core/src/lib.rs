//! Gaze-driven diegetic interface runtime.
//!
//! Printed buttons located through fiducial markers are turned into
//! interface events and Cartesian velocity commands:
//!
//! 1. [`fusion`] pools marker observations into one pose per button,
//! 2. [`zone`] projects each button's interaction rectangle into the image and
//!    tests it against the gaze point,
//! 3. [`input`] accumulates dwell activation with a Schmitt trigger,
//! 4. [`servo`] maps activations to a caged, force-limited end-effector
//!    velocity.
//!
//! [`sim`] closes the loop with a kinematic world, [`bench`] runs the block
//! pick-and-place protocol on top of it, and [`session`] records, replays
//! and times the pipeline.

pub mod geometry;
pub mod registry;
pub mod fusion;
pub mod zone;
pub mod input;
pub mod servo;
pub mod sim;
pub mod runtime;
pub mod session;
pub mod bench;
pub mod latency;
