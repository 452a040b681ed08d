//! Kinematic world: end-effector, cubes, stencil, table contact and the
//! simulated marker and gaze channels.
//!
//! The world frame has z up with the table plane at `table_height_m`; the
//! user sits on the +y side looking towards −y.

mod scene;
mod world;

pub use scene::{
    load_pipeline_config, parse_json, Attachment, CubeConfig, EndEffectorConfig, HeadConfig, HeadSway, MarkerPlacement,
    Mount, NoiseConfig, SceneConfig, SceneError, SceneFile, StencilConfig,
};
pub use world::{Grasp, GripperState, NoiseStreams, SimState, World};
